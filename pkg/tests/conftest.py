import numpy as np
import pytest

from defectlab import scenarios


@pytest.fixture(scope="session")
def kink():
    return scenarios.kink_profile()


@pytest.fixture(scope="session")
def core():
    return scenarios.vortex_core()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_ACCEPTANCE = []


@pytest.fixture(scope="session")
def acceptance():
    """Recorder for one-line acceptance verdicts, echoed in the terminal summary."""
    def record(criterion, passed, detail):
        line = f"{'PASS' if passed else 'FAIL'}  criterion {criterion:<5} {detail}"
        _ACCEPTANCE.append(line)
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)

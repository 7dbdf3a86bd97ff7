import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from defectlab.profiles import (SCALAR, VECTOR, PotentialModel, eval_potential, line_energy,
                                normalized_vortex_energy, potential_constants, solve_kink,
                                surface_tension, truncate_kink, vortex_disk_energy,
                                vortex_profile)

KAPPA1 = 2.0 * math.sqrt(2.0) / 3.0


def test_kink_matches_tanh(kink):
    s = np.linspace(-18, 18, 4001)
    assert np.max(np.abs(kink(s) - np.tanh(s / math.sqrt(2.0)))) <= 1e-8
    _, dq = kink.evaluate(s)
    assert np.max(np.abs(dq - (1 - np.tanh(s / math.sqrt(2.0)) ** 2) / math.sqrt(2.0))) <= 1e-8


def test_kink_first_integral(kink):
    assert kink.first_integral_residual <= 1e-8
    assert kink.ode_residual <= 1e-5
    assert kink(0.0) == 0.0


def test_kink_tail_is_exponential(kink):
    # beyond the table the tail must keep decaying at rate sqrt(2)
    far = np.array([25.0, 30.0])
    _, dq = kink.evaluate(far)
    assert np.all(dq > 0)
    rate = math.log(dq[0] / dq[1]) / 5.0
    assert rate == pytest.approx(math.sqrt(2.0), rel=1e-6)


def test_surface_tension_closed_form():
    assert abs(surface_tension().kappa - KAPPA1) <= 1e-10


def test_surface_tension_scales_with_potential():
    # kappa = int sqrt(2 F) grows like sqrt(scale)
    assert surface_tension(PotentialModel("scalar", 4.0)).kappa == pytest.approx(2 * KAPPA1, rel=1e-10)


def test_line_energy_equals_tension(kink):
    assert line_energy(kink) == pytest.approx(KAPPA1, abs=1e-9)


def test_truncated_profile(kink):
    tr = truncate_kink(kink, 1.0, 0.05)
    s = np.linspace(-40, 40, 2001)
    q = tr(s)
    assert np.all(np.abs(q[np.abs(s) >= tr.outer]) == 1.0)
    inner = np.abs(s) <= tr.inner
    assert np.array_equal(q[inner], kink(s[inner]))
    assert tr.match_error() == pytest.approx(1 - math.tanh(tr.outer / math.sqrt(2)), rel=1e-6)
    assert tr.line_energy() == pytest.approx(KAPPA1, abs=1e-9)


def test_truncation_rejects_unresolved_ratio(kink):
    with pytest.raises(ValueError):
        truncate_kink(kink, 0.5, 0.1)


def test_vortex_disk_energy_closed_form():
    # pi (1 + 1/12) inside the unit core plus pi ln R outside
    for R in (1.0, 10.0, 200.0):
        assert vortex_disk_energy(R) == pytest.approx(math.pi * (13 / 12 + math.log(R)), rel=1e-12)


def test_normalized_vortex_energy_tends_to_one():
    vals = [normalized_vortex_energy(1.0, e) for e in (1e-2, 1e-4, 1e-8)]
    assert all(a > b > 1 for a, b in zip(vals, vals[1:]))
    assert vals[-1] - 1 == pytest.approx(13 / 12 / abs(math.log(1e-8)), rel=1e-10)


def test_vortex_profile_degree_one():
    th = np.linspace(0, 2 * math.pi, 9)
    s = np.stack([3 * np.cos(th), 3 * np.sin(th)])
    v = vortex_profile(s)
    assert np.allclose(np.linalg.norm(v, axis=0), 1.0)
    assert np.allclose(vortex_profile(np.array([[0.2], [0.1]])), [[0.2], [0.1]])


def test_vortex_core_asymptotics(core):
    assert core.residual < 1e-6
    rho, _ = core.evaluate(np.array([20.0, 25.0]))
    # rho = 1 - 1/(2 r^2) + O(r^-4)
    assert np.allclose(rho, 1 - 1 / (2 * np.array([20.0, 25.0]) ** 2), atol=2e-5)
    assert core.drho[0] > 0


def test_vortex_core_field_jacobian(core, rng):
    s = rng.uniform(-3, 3, size=(2, 50))
    u, jac = core.field(s)
    h = 1e-6
    for j in range(2):
        e = np.zeros((2, 1))
        e[j] = h
        fd = (core.field(s + e)[0] - core.field(s - e)[0]) / (2 * h)
        assert np.allclose(jac[:, j], fd, atol=1e-6)


def test_potential_rejects_non_finite():
    with pytest.raises(ValueError):
        eval_potential(SCALAR, np.array([np.nan]))


def test_potential_guard_clamps():
    with pytest.warns(RuntimeWarning):
        F = SCALAR.F(np.array([100.0]))
    assert F[0] == pytest.approx(0.25 * 99.0 ** 2)


def test_potential_constants():
    c = potential_constants(VECTOR)
    # F / (1 - r)^2 = (1 + r)^2 / 4 on [0, 2]
    assert c["c_low"] == pytest.approx(0.25, abs=1e-3)
    assert c["c_high"] == pytest.approx(2.25, abs=1e-3)
    assert c["far_floor"] == pytest.approx(2.25)


def test_bad_potential_kind():
    with pytest.raises(ValueError):
        PotentialModel("tensor")
    with pytest.raises(ValueError):
        solve_kink(VECTOR)


@settings(max_examples=40, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3))
def test_vector_potential_is_radial(a, b):
    u = np.array([a, b])
    r = math.hypot(a, b)
    assert VECTOR.F(u) == pytest.approx(0.25 * (r * r - 1) ** 2, abs=1e-12)
    assert np.allclose(VECTOR.f(u), (r * r - 1) * u)

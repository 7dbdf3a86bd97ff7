import math

import numpy as np
import pytest

from defectlab.grid import Grid
from defectlab.initial_data import (FieldState, NotSupportedError, measure_preparedness,
                                    normalization, prepare_scalar_data, prepare_vector_data,
                                    rigid_kink_field, zeta_floor)
from defectlab.profiles import truncate_kink, vortex_profile
from defectlab.scenarios import circle_chart, sine_graph
from defectlab.string_geometry import normal_frame, static_line
from defectlab.tubular_chart import build_chart

# weighted second moment of the kink energy: int s^2 q'^2 ds / kappa_1 = (pi^2 - 6) / 6
SECOND_MOMENT = (math.pi ** 2 - 6.0) / 6.0


@pytest.fixture(scope="module")
def line_chart():
    surf = static_line(1.0, 2)
    return build_chart(surf, normal_frame(surf, 1), 0.4, 1.0, spatial_period=[1.0, 0.0])


def _line_grid(h):
    n = int(round(1 / h))
    return Grid.box((0.0, -0.5), (1.0, 0.5), (n, n + 1), (True, False))


def test_line_data_is_the_truncated_profile(line_chart, kink):
    eps = 0.04
    grid = _line_grid(0.01)
    state = prepare_scalar_data(line_chart, truncate_kink(kink, 0.4, eps), eps, grid)
    x2 = grid.mesh()[1]
    assert np.allclose(state.u[0], truncate_kink(kink, 0.4, eps)(x2 / eps), atol=1e-12)
    assert np.all(state.ut == 0.0)


def test_circle_data_at_rest(kink):
    chart = circle_chart()
    eps = 0.1
    grid = Grid.box((-3.2, -3.2), (3.2, 3.2), (256, 256), (True, True))
    tr = truncate_kink(kink, 1.0, eps)
    state = prepare_scalar_data(chart, tr, eps, grid, coarse=4)
    x, y = grid.mesh()
    r = np.hypot(x, y)
    assert np.max(np.abs(state.u[0] - tr((r - 2.0) / eps))) < 5e-5
    assert np.max(np.abs(state.ut)) < 5e-5
    # the interior of the circle sits in the negative vacuum
    assert state.u[0][128, 128] == -1.0


def test_thin_chart_rejected(line_chart, kink):
    eps = 0.005
    grid = Grid.box((0.0, -0.5), (1.0, 0.5), (8, 9), (True, False))
    with pytest.raises(ValueError):
        prepare_scalar_data(line_chart, truncate_kink(kink, 0.4, 0.04), eps, grid)


def test_rigid_kink_velocity_is_time_derivative(kink):
    g, dg = sine_graph(0.1, 1.0)
    grid = _line_grid(0.01)
    eps = 0.05
    _, ut = rigid_kink_field(kink, g, dg, eps, grid, t=0.2)
    h = 1e-5
    up, _ = rigid_kink_field(kink, g, dg, eps, grid, t=0.2 + h)
    um, _ = rigid_kink_field(kink, g, dg, eps, grid, t=0.2 - h)
    assert np.max(np.abs(ut - (up - um) / (2 * h))) < 1e-5 * np.max(np.abs(ut))


def test_vector_data_straight_line():
    grid = Grid.box((0.0, -0.5, -0.5), (0.2, 0.5, 0.5), (4, 40, 40), (True, False, False))
    zero = lambda s: np.zeros(2)
    st = prepare_vector_data(zero, zero, 0.2, grid)
    x1, x2, x3 = grid.mesh()
    assert np.allclose(st.u, vortex_profile(np.stack([x2, x3]) / 0.2))
    assert np.all(st.ut == 0)


def test_vector_velocity_is_time_derivative(core):
    g1, dg1 = sine_graph(0.1, 1.0)
    graph = lambda s: np.array([g1(s), 0.5 * g1(s)])
    d_graph = lambda s: np.array([dg1(s), 0.5 * dg1(s)])
    grid = Grid.box((0.0, -0.4, -0.4), (1.0, 0.4, 0.4), (40, 34, 34), (True, False, False))
    eps = 0.1
    st = prepare_vector_data(graph, d_graph, eps, grid, core=core, t=0.1)
    h = 1e-5
    up = prepare_vector_data(graph, d_graph, eps, grid, core=core, t=0.1 + h).u
    um = prepare_vector_data(graph, d_graph, eps, grid, core=core, t=0.1 - h).u
    assert np.max(np.abs(st.ut - (up - um) / (2 * h))) < 1e-5 * np.max(np.abs(st.ut))


def test_closed_loops_not_supported():
    grid = Grid.box((0.0, -0.5, -0.5), (0.2, 0.5, 0.5), (4, 40, 40), (True, False, False))
    zero = lambda s: np.zeros(2)
    with pytest.raises(NotSupportedError):
        prepare_vector_data(zero, zero, 0.1, grid, closed_loop=True)


def test_state_validation():
    grid = Grid.box((0.0, 0.0), (1.0, 1.0), (10, 10), (True, True))
    u = np.zeros((1, 10, 10))
    with pytest.raises(ValueError):
        FieldState(grid, 0.1, u, u)  # h = 0.1 > eps / 4
    bad = u.copy()
    bad[0, 0, 0] = np.nan
    with pytest.raises(ValueError):
        FieldState(grid, 1.0, bad, u)
    with pytest.raises(ValueError):
        FieldState(grid, 1.0, np.zeros((3, 10, 10)), np.zeros((3, 10, 10)))


def test_state_binary_round_trip(tmp_path, rng):
    grid = Grid.box((0.0, -1.0), (1.0, 1.0), (16, 17), (True, False))
    st = FieldState(grid, 0.5, rng.standard_normal((1, 16, 17)), rng.standard_normal((1, 16, 17)),
                    0.25)
    path = tmp_path / "state.bin"
    st.save(path)
    back = FieldState.load(path)
    assert back.grid == grid and back.t == 0.25 and back.eps == 0.5
    assert np.array_equal(back.u, st.u) and np.array_equal(back.ut, st.ut)
    assert path.stat().st_size == 2 * 16 * 17 * 8
    st.export_slice_csv(tmp_path / "slice.csv")
    rows = np.loadtxt(tmp_path / "slice.csv", delimiter=",", skiprows=1)
    assert rows.shape == (17, 3)


def test_normalization_and_floor():
    assert normalization(1, 0.1) == pytest.approx(0.1 / (2 * math.sqrt(2) / 3))
    assert normalization(2, 0.1) == pytest.approx(1 / (math.pi * math.log(10)))
    assert zeta_floor(1, 0.1) == pytest.approx(0.01)
    assert zeta_floor(2, 0.1) == pytest.approx(1 / math.log(10))


def test_line_preparedness_matches_second_moment(line_chart, kink):
    eps = 0.04
    grid = _line_grid(0.005)
    state = prepare_scalar_data(line_chart, truncate_kink(kink, 0.4, eps), eps, grid)
    rep = measure_preparedness(state, line_chart, n1=64, nnu=161)
    assert rep.outside_energy == pytest.approx(0.0, abs=1e-12)
    assert rep.tangential_motion < 1e-12
    assert rep.normalized_energy == pytest.approx(SECOND_MOMENT * eps ** 2, rel=0.03)
    assert rep.zeta0 == zeta_floor(1, eps)
    assert rep.to_dict()["zeta0"] == rep.zeta0


def test_circle_preparedness_scaling(kink):
    chart = circle_chart()
    vals = []
    for eps, n in ((0.1, 512), (0.05, 1024)):
        grid = Grid.box((-3.2, -3.2), (3.2, 3.2), (n, n), (True, True))
        state = prepare_scalar_data(chart, truncate_kink(kink, 1.0, eps), eps, grid, coarse=n // 128)
        rep = measure_preparedness(state, chart, n1=128, nnu=int(2 / (eps / 8)) + 1)
        vals.append(rep.zeta0_raw / eps ** 2)
    assert vals == pytest.approx([SECOND_MOMENT] * 2, rel=0.02)

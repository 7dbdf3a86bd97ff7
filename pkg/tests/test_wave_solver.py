import math

import numpy as np
import pytest

from defectlab import kernels
from defectlab import wave_solver as ws
from defectlab.grid import Grid
from defectlab.initial_data import FieldState
from defectlab.profiles import SCALAR, VECTOR
from defectlab.scenarios import run_rigid_kink

BACKENDS = ["python", "cython"] if kernels.BACKEND == "cython" else ["python"]


def _periodic(n, dim=2):
    return Grid.box((0.0,) * dim, (1.0,) * dim, (n,) * dim, (True,) * dim)


def _laplacian_error(n, order, module):
    grid = _periodic(n)
    x, y = grid.mesh()
    u = (np.sin(2 * math.pi * x) * np.cos(4 * math.pi * y))[None]
    acc = np.empty_like(u)
    kernels.acceleration(u, acc, grid.spacing, 0.0, grid.periodic, order, module=module)
    return np.max(np.abs(acc + 20 * math.pi ** 2 * u))


@pytest.mark.parametrize("backend", BACKENDS)
@pytest.mark.parametrize("order,ratio", [(2, 4.0), (4, 16.0)])
def test_laplacian_converges_at_stated_order(backend, order, ratio):
    mod = kernels.backend_module(backend)
    e1, e2 = _laplacian_error(32, order, mod), _laplacian_error(64, order, mod)
    assert e2 / e1 * ratio == pytest.approx(1.0, rel=0.05)


@pytest.mark.parametrize("backend", BACKENDS)
def test_force_term_on_constant_field(backend):
    mod = kernels.backend_module(backend)
    grid = _periodic(8)
    u = np.full((2, 8, 8), 0.6)
    acc = np.empty_like(u)
    maxsq, bad = kernels.acceleration(u, acc, grid.spacing, 3.0, grid.periodic, module=mod)
    assert np.allclose(acc, -3.0 * (0.72 - 1.0) * 0.6, atol=1e-12)
    assert maxsq == pytest.approx(0.72) and bad == 0


@pytest.mark.parametrize("backend", BACKENDS)
def test_laplacian_3d(backend):
    mod = kernels.backend_module(backend)
    errs = []
    for n in (16, 32):
        grid = _periodic(n, 3)
        x, y, z = grid.mesh()
        u = np.stack([np.sin(2 * math.pi * x) * np.cos(2 * math.pi * z),
                      np.cos(2 * math.pi * y)])
        acc = np.empty_like(u)
        kernels.acceleration(u, acc, grid.spacing, 0.0, grid.periodic, module=mod)
        exact = -4 * math.pi ** 2 * u * np.array([2.0, 1.0])[:, None, None, None]
        errs.append(np.max(np.abs(acc - exact)))
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)


@pytest.mark.parametrize("backend", BACKENDS)
def test_fixed_edges_get_zero_acceleration(backend):
    mod = kernels.backend_module(backend)
    grid = Grid.box((0.0, 0.0), (1.0, 1.0), (16, 17), (True, False))
    u = np.random.default_rng(3).standard_normal((1, 16, 17))
    acc = np.empty_like(u)
    kernels.acceleration(u, acc, grid.spacing, 1.0, grid.periodic, module=mod)
    assert np.all(acc[0, :, 0] == 0) and np.all(acc[0, :, -1] == 0)


def test_backends_agree(rng):
    if len(BACKENDS) < 2:
        pytest.skip("compiled kernels not built")
    py, cy = (kernels.backend_module(b) for b in BACKENDS)
    for shape, per in (((2, 24, 25), (True, False)), ((2, 8, 9, 10), (True, False, False))):
        u = rng.standard_normal(shape)
        ut = rng.standard_normal(shape)
        h = [0.1 + 0.01 * i for i in range(len(per))]
        a1, a2 = np.empty_like(u), np.empty_like(u)
        r1 = kernels.acceleration(u, a1, h, 2.0, per, module=py)
        r2 = kernels.acceleration(u, a2, h, 2.0, per, module=cy)
        assert np.allclose(a1, a2, rtol=1e-12, atol=1e-12)
        assert r1[0] == pytest.approx(r2[0]) and r1[1] == r2[1]
        e1 = kernels.energy(u, ut, h, 2.0, per, module=py)
        e2 = kernels.energy(u, ut, h, 2.0, per, module=cy)
        assert e1 == pytest.approx(e2, rel=1e-12)


@pytest.mark.parametrize("backend", BACKENDS)
def test_discrete_energy_closed_form(backend):
    # forward differences of A sin(2 pi x): (2 sin(pi h) / h)^2 A^2 / 4 per unit area
    mod = kernels.backend_module(backend)
    n, amp = 32, 0.3
    grid = _periodic(n)
    x, _ = grid.mesh()
    u = (amp * np.sin(2 * math.pi * x))[None]
    h = grid.spacing[0]
    e = kernels.energy(u, np.zeros_like(u), grid.spacing, 0.0, grid.periodic, module=mod)
    assert e == pytest.approx(0.5 * (2 * math.sin(math.pi * h) / h) ** 2 * amp ** 2 / 2, rel=1e-12)
    c = np.full((1, n, n), 0.5)
    pot = kernels.energy(c, np.ones_like(c), grid.spacing, 4.0, grid.periodic, module=mod)
    assert pot == pytest.approx(0.5 + 4.0 * 0.25 * 0.75 ** 2, rel=1e-12)


def test_drift_is_half_kick_then_drift():
    u, ut, acc = np.ones((1, 4)), np.full((1, 4), 2.0), np.full((1, 4), 4.0)
    kernels.drift(u, ut, acc, 0.25, 0.5)
    assert np.all(ut == 3.0) and np.all(u == 2.5)


def test_time_step_contract():
    grid = _periodic(64)
    cfg = ws.SolverConfig(t_end=1.0, cfl=0.5)
    dt, n = cfg.time_step(grid, 0.1)
    assert n * dt == pytest.approx(1.0) and dt <= 0.5 / 64
    with pytest.raises(ValueError):
        cfg.time_step(grid, 0.02)
    with pytest.raises(ValueError):
        ws.SolverConfig(t_end=1.0, cfl=1.0)


def _bump_state(n=128, eps=0.1):
    grid = _periodic(n)
    x, y = grid.mesh()
    r2 = (x - 0.5) ** 2 + (y - 0.5) ** 2
    u = (1.0 - 0.5 * np.exp(-r2 / 0.005))[None]
    return FieldState(grid, eps, u, np.zeros_like(u))


def test_energy_conserved_and_time_reversible():
    runs = {}
    for n in (128, 256):
        state = _bump_state(n)
        runs[n] = (state, ws.run(state, ws.SolverConfig(t_end=1.0)))
    drift = {n: tr.energy_drift() for n, (_, tr) in runs.items()}
    assert all(slope < 1e-4 for slope, _ in drift.values())
    # the bounded energy oscillation of the scheme is O(dt^2)
    assert drift[128][1] / drift[256][1] == pytest.approx(4.0, rel=0.2)
    state, traj = runs[128]
    back = ws.evolve(traj.snapshots[-1], ws.SolverConfig(t_end=1.0), -traj.dt, traj.steps)
    assert np.max(np.abs(back.u - state.u)) < 1e-10


def test_light_cone_holds_and_detects_violation():
    state = _bump_state()
    grid = state.grid
    cfg = ws.SolverConfig(t_end=0.3, snapshot_every=0.1)
    traj = ws.run(state, cfg)
    region = ws.region_mask(grid, [((0.0, 0.0), (0.3, 1.0))])
    reports = ws.light_cone_series(traj, region)
    assert len(reports) == 3 and all(r.passed for r in reports)
    # teleport the bump into the region: energy appears faster than light
    late = traj.snapshots[1]
    moved = FieldState(grid, state.eps, np.roll(late.u, -int(0.4 * 128), axis=1), late.ut, late.t)
    bad = ws.light_cone_check(state, moved, region)
    assert not bad.passed and bad.margin > 1e-3


def test_erosion_wraps_periodic_axes():
    grid = _periodic(64)
    mask = ws.region_mask(grid, [((0.0, 0.0), (0.2, 1.0))])
    inner = ws.erode(grid, mask, 0.05)
    x = grid.axes()[0]
    outside = x[~mask[:, 0]]
    # distance to the nearest complement node, across the x = 0 seam as well
    gap = np.abs(x[:, None] - outside[None, :])
    dist = np.minimum(gap, 1.0 - gap).min(axis=1)
    assert np.array_equal(inner[:, 0], dist > 0.05)
    assert inner[3, 0] and not inner[2, 0]


def test_blow_up_reported():
    state = _bump_state(32, eps=0.5)
    cfg = ws.SolverConfig(t_end=1.0)
    with pytest.raises(ws.BlowUpError) as info:
        ws.evolve(state, cfg, 3.0 * state.grid.spacing[0], 200)
    assert info.value.step > 0 and len(info.value.location) == 2


def test_fixed_edges_need_boundary_data():
    grid = Grid.box((0.0, 0.0), (1.0, 1.0), (16, 17), (True, False))
    st = FieldState(grid, 1.0, np.zeros((1, 16, 17)), np.zeros((1, 16, 17)))
    with pytest.raises(ValueError):
        ws.run(st, ws.SolverConfig(t_end=0.1))


def test_rigid_kink_second_order():
    coarse = run_rigid_kink(64, t_end=0.25)
    fine = run_rigid_kink(128, t_end=0.25)
    assert coarse.error / fine.error == pytest.approx(4.0, rel=0.2)
    assert fine.drift[0] < 1e-4 and fine.light_cone_margin < 1e-6


def test_vector_energy_density_sums_to_total(rng):
    grid = _periodic(24, 3)
    st = FieldState(grid, 1.0, rng.standard_normal((2, 24, 24, 24)),
                    rng.standard_normal((2, 24, 24, 24)))
    dens = ws.energy_density(st, VECTOR)
    assert np.sum(dens) * grid.cell_volume == pytest.approx(ws.total_energy(st, VECTOR), rel=1e-12)
    assert ws.total_energy(st, SCALAR) != ws.total_energy(st, VECTOR) or SCALAR.scale == VECTOR.scale

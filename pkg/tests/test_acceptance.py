"""End-to-end acceptance criteria at their stated tolerances (tens of minutes on one core)."""
import math

import numpy as np
import pytest
from scipy.integrate import quad

from defectlab import diagnostics as dg
from defectlab import scenarios as sc
from defectlab.profiles import SCALAR, line_energy, solve_kink, surface_tension
from defectlab.string_geometry import CircleSurface, normal_frame
from defectlab.tubular_chart import build_chart, minimality_record, verify_metric_bounds

pytestmark = pytest.mark.slow

LADDER = (0.1, 0.05, 0.025)
DRIFT_LIMIT = 1e-4
LIGHT_CONE_LIMIT = 1e-6
KAPPA1 = 2 * math.sqrt(2) / 3


@pytest.fixture(scope="module")
def rigid():
    return {n: sc.run_rigid_kink(n, eps=0.1) for n in (256, 512)}


@pytest.fixture(scope="module")
def circles():
    return {eps: sc.run_circle(eps) for eps in LADDER}


@pytest.fixture(scope="module")
def circle_track():
    return sc.run_circle(0.05, radius=1.0, rho0=0.5, T1=0.3, t_end=0.7 * math.pi / 2,
                         half_width=1.6, resolution=16, zeta=False, gap=False, d2e=False)


@pytest.fixture(scope="module")
def vortex_track():
    return sc.run_rigid_vortex(0.05)


def test_kink_profile(acceptance):
    prof = solve_kink(SCALAR)
    s = np.linspace(-prof.half_width, prof.half_width, 20001)
    q, dq = prof.evaluate(s)
    sup = np.max(np.abs(q - np.tanh(s / math.sqrt(2))))
    first = np.max(np.abs(0.5 * dq ** 2 - 0.25 * (q ** 2 - 1) ** 2))
    ok = sup <= 1e-8 and first <= 1e-8
    acceptance(1, ok, f"sup |q - tanh| = {sup:.2e}, first-integral residual = {first:.2e}")
    assert ok


def test_surface_tension(acceptance):
    # antiderivative of sqrt(2F) = (1 - s^2) / sqrt 2 is (s - s^3 / 3) / sqrt 2
    exact = 2 * (1 - 1 / 3) / math.sqrt(2)
    assert exact == pytest.approx(KAPPA1, rel=1e-15)
    err = abs(surface_tension(SCALAR).kappa - exact)
    ok = err <= 1e-10
    acceptance(2, ok, f"|kappa_1 - 2 sqrt2 / 3| = {err:.2e}")
    assert ok
    # the ledger energy of the solved profile is the same constant
    assert line_energy(sc.kink_profile()) == pytest.approx(KAPPA1, rel=1e-8)


def test_rigid_kink_reproduction(acceptance, rigid):
    err = rigid[512].error
    ratio = rigid[256].error / err
    ok = err <= 1e-3 and abs(ratio - 4.0) <= 0.8
    acceptance(3, ok, f"L2 error at h = 1/512: {err:.2e}, halving ratio {ratio:.3f}")
    assert ok


def test_collapsing_circle_radius(acceptance, circle_track):
    run = circle_track
    horizon = 0.7 * math.pi / 2
    sel = run.tracked_times <= horizon + 1e-12
    worst = float(np.max(run.radius_error[sel]))
    tol = max(2 * run.grid.spacing[0], 5 * 0.05)
    ok = worst <= tol and run.tracked_times[sel][-1] >= horizon - 1e-9 and run.grid.shape == (1024, 1024)
    acceptance(5, ok, f"max |R(t) - cos t| = {worst:.2e} (tol {tol:.3g}) on {run.grid.shape}")
    assert ok


def test_d2e_scaling(acceptance, circles):
    vals = [circles[e].d2e for e in LADDER]
    slope = sc.log2_slope(LADDER, vals)
    ok = abs(slope - 1.0) <= 0.3
    acceptance(6, ok, f"d^2 e slope {slope:.3f} ({', '.join(f'{v:.4g}' for v in vals)})")
    assert ok


def test_tensor_gap_scaling(acceptance, circles):
    vals = [circles[e].gap.gap for e in LADDER]
    slope = sc.log2_slope(LADDER, vals)
    ok = slope >= 0.8
    acceptance(7, ok, f"tensor gap slope {slope:.3f} ({', '.join(f'{v:.3g}' for v in vals)})")
    assert ok


def test_zeta_boundedness(acceptance, circles):
    ratios = [float(np.max(circles[e].series.zeta3)) / circles[e].zeta0.zeta0 for e in LADDER]
    growth = [b / a for a, b in zip(ratios, ratios[1:])]
    ok = all(g <= 1.25 for g in growth) and all(np.isfinite(ratios))
    acceptance(8, ok, f"sup zeta_3 / zeta_0 = {', '.join(f'{r:.3f}' for r in ratios)}")
    assert ok


def test_vortex_energy_normalization(acceptance):
    consts = [sc.vortex_energy_ratio(e)[1] for e in LADDER]
    spread = max(consts) / min(consts) - 1.0
    ok = min(consts) > 0 and spread <= 0.25
    acceptance(9, ok, f"C = {', '.join(f'{c:.3f}' for c in consts)} (spread {spread:.3f})")
    assert ok


def test_rigid_vortex_tracking(acceptance, vortex_track):
    worst = float(np.max(vortex_track.errors))
    ok = worst <= vortex_track.tolerance and vortex_track.times[-1] >= 1.0 - 1e-12
    acceptance(10, ok, f"max center error {worst:.2e} (tol {vortex_track.tolerance:.3g})")
    assert ok


def test_wiggly_counterexample(acceptance):
    results = [sc.wiggly_gap(w) for w in (0.4, 0.2, 0.1)]
    gaps = [r.gap_to_limit for r in results]
    persistent = min(gaps) >= 0.1 * gaps[0]
    ratio = sc.wiggly_matrix_error(0.4, resolution=8) / sc.wiggly_matrix_error(0.4, resolution=16)
    ok = persistent and abs(ratio - 4.0) <= 0.8
    acceptance(11, ok, f"gaps {', '.join(f'{g:.4f}' for g in gaps)}, matrix refinement {ratio:.2f}")
    assert ok


def test_metric_verifier(acceptance):
    chart = sc.circle_chart()
    bounds = verify_metric_bounds(chart, samples=4000)
    finite = all(r.passed and math.isfinite(r.constant) for r in bounds.records)
    minimal = minimality_record(chart).constant
    control = CircleSurface(2.0, speed=0.8)
    off = minimality_record(build_chart(control, normal_frame(control, 1, orientation=-1.0),
                                        1.0, 1.2)).constant
    ok = finite and minimal <= 1e-6 and off >= 1e-2
    acceptance(12, ok, f"{len(bounds.records)} bounds finite={finite}, minimality {minimal:.2e}, "
                       f"control {off:.2e}")
    assert ok


def test_conservation_and_causality(acceptance, rigid, circles, circle_track, vortex_track):
    runs = {f"rigid n={n}": (r.drift[0], r.light_cone_margin) for n, r in rigid.items()}
    for eps, run in circles.items():
        runs[f"circle eps={eps}"] = (run.drift[0], run.summary()["light_cone_margin"])
    runs["circle R=1"] = (circle_track.drift[0], circle_track.summary()["light_cone_margin"])
    runs["vortex line"] = (vortex_track.drift[0], vortex_track.light_cone_margin)
    drift = max(d for d, _ in runs.values())
    margin = max(m for _, m in runs.values())
    ok = drift <= DRIFT_LIMIT and margin <= LIGHT_CONE_LIMIT
    acceptance(4, ok, f"{len(runs)} runs: max drift {drift:.2e}/unit time, "
                      f"max light-cone margin {margin:.2e}")
    assert ok


OFFSETS = (0.05, 0.1, 0.2)


def _kink_oracle(a, eps=0.005, rho=1.0):
    f = lambda y: abs(y) * (math.tanh((y - a) / (eps * math.sqrt(2))) - math.copysign(1.0, y)) ** 2
    return quad(f, -rho, rho, points=[0.0, a], limit=400)[0]


@pytest.mark.xfail(strict=True, reason="the |y|-weighted step distance of a displaced kink "
                                       "grows like 2 a^2, so the log-slope is 2, not 3")
def test_kink_functional_cubic_growth(acceptance):
    vals = [sc.displaced_kink_functional(a) for a in OFFSETS]
    assert vals == pytest.approx([_kink_oracle(a) for a in OFFSETS], rel=1e-3)
    slope = sc.log2_slope(OFFSETS, vals)
    ok = abs(slope - 3.0) <= 0.4
    acceptance("13a", ok, f"k=1 functional slope {slope:.3f} (expected 3 +- 0.4)")
    assert ok


def test_kink_functional_quadratic_law():
    # the sharp-step value 2 a^2 is approached as eps -> 0, up to an O(a eps) correction
    vals = [sc.displaced_kink_functional(a, eps=5e-4, n=40001) for a in OFFSETS]
    assert vals == pytest.approx([_kink_oracle(a, eps=5e-4) for a in OFFSETS], rel=1e-3)
    assert vals == pytest.approx([2 * a * a for a in OFFSETS], rel=0.02)


def test_vortex_functional_cubic_growth(acceptance):
    dictionary = dg.default_dictionary(1.0)
    vals = [sc.displaced_vortex_functional(a, dictionary=dictionary) for a in OFFSETS]
    # sharp-core limit: J -> pi delta_a, so the gap is pi max |w(a) - w(0)|
    origin = dictionary.at_origin()
    oracle = [math.pi * np.max(np.abs(dictionary.values(np.array([a]), np.zeros(1))[:, 0] - origin))
              for a in OFFSETS]
    assert vals == pytest.approx(oracle, rel=0.05)
    slope = sc.log2_slope(OFFSETS, vals)
    ok = abs(slope - 3.0) <= 0.4
    acceptance("13b", ok, f"k=2 functional slope {slope:.3f}")
    assert ok

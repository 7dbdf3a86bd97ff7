"""End-to-end pipelines: build the surface and chart, prepare data, evolve, diagnose."""
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import diagnostics as dg
from . import wave_solver as ws
from .grid import Grid
from .initial_data import (FieldState, measure_preparedness, normalization, prepare_scalar_data,
                           prepare_vector_data, rigid_kink_field)
from .profiles import SCALAR, VECTOR, solve_kink, solve_vortex_core, truncate_kink
from .string_geometry import circle_string, normal_frame, static_line, surface_tensor
from .tubular_chart import build_chart, verify_metric_bounds

# coarse grid spacing for interpolated signed distances
COARSE_SPACING = 0.025

_KINK = {}
_CORE = {}


def kink_profile():
    if "q" not in _KINK:
        _KINK["q"] = solve_kink(SCALAR)
    return _KINK["q"]


def vortex_core():
    if "core" not in _CORE:
        _CORE["core"] = solve_vortex_core(VECTOR)
    return _CORE["core"]


def log2_slope(x, y):
    """Least-squares slope of log2 y against log2 x."""
    return float(np.polyfit(np.log2(np.asarray(x, float)), np.log2(np.asarray(y, float)), 1)[0])


def sine_graph(amplitude, wavelength):
    k = 2 * math.pi / wavelength
    return (lambda s: amplitude * np.sin(k * s)), (lambda s: amplitude * k * np.cos(k * s))


# ---------------------------------------------------------------------------
# rigid kink (exact travelling solution)


@dataclass
class RigidKinkResult:
    n: int
    h: float
    error: float
    drift: tuple
    light_cone_margin: float
    seconds: float


def run_rigid_kink(n, eps=0.1, amplitude=0.1, t_end=1.0, cfl=0.5, threads=1):
    """Kink u = q((x2 - g(x1 - t))/eps) on [0,1) x [-1/2, 1/2] with exact values on x2 = +-1/2."""
    prof = kink_profile()
    g, dgr = sine_graph(amplitude, 1.0)

    def exact(t, pts):
        xi = pts[:, 0] - t
        q, dq = prof.evaluate((pts[:, 1] - g(xi)) / eps)
        return q[None], (dq * dgr(xi) / eps)[None]

    grid = Grid.box((0.0, -0.5), (1.0, 0.5), (n, n + 1), (True, False))
    u, ut = rigid_kink_field(prof, g, dgr, eps, grid)
    state = FieldState(grid, eps, u, ut)
    cfg = ws.SolverConfig(t_end=t_end, cfl=cfl, boundary_values=exact, threads=threads,
                          snapshot_every=t_end / 4 if t_end > 0 else None)
    start = time.time()
    traj = ws.run(state, cfg)
    elapsed = time.time() - start
    ue, _ = rigid_kink_field(prof, g, dgr, eps, grid, t=traj.snapshots[-1].t)
    w = grid.quadrature_weights()
    err = math.sqrt(np.sum((traj.snapshots[-1].u - ue) ** 2 * w) / np.sum(ue ** 2 * w))
    region = ws.region_mask(grid, [((0.0, -0.5), (0.5, 0.5))])
    margin = max(r.margin for r in ws.light_cone_series(traj, region))
    return RigidKinkResult(n, grid.spacing[0], err, traj.energy_drift(), margin, elapsed)


# ---------------------------------------------------------------------------
# collapsing circle


def circle_chart(radius=2.0, rho0=1.0, T1=1.2):
    surf = circle_string(radius)
    frame = normal_frame(surf, 1, orientation=-1.0)
    return build_chart(surf, frame, rho0, T1)


@dataclass
class CircleRun:
    eps: float
    radius: float
    grid: Grid
    zeta0: object
    trajectory: object
    radii: np.ndarray = None
    radius_error: np.ndarray = None
    tracked_times: np.ndarray = None
    d2e: float = None
    outside_energy: float = None
    series: object = None
    gap: object = None
    light_cone: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)

    @property
    def drift(self):
        return self.trajectory.energy_drift()

    def summary(self):
        out = {"eps": self.eps, "radius": self.radius, "grid": list(self.grid.shape),
               "zeta0": self.zeta0.to_dict() if self.zeta0 else None,
               "energy_drift_per_time": self.drift[0], "energy_excursion": self.drift[1],
               "light_cone_margin": max((r.margin for r in self.light_cone), default=0.0),
               "timings": self.timings}
        if self.radius_error is not None:
            out["radius_error_max"] = float(np.max(self.radius_error))
        if self.d2e is not None:
            out["d2e"] = self.d2e
            out["outside_energy"] = self.outside_energy
        if self.series is not None:
            out["zeta3_max"] = float(np.max(self.series.zeta3))
            out["zeta1_max"] = float(np.max(self.series.zeta1))
            out["zeta2_max"] = float(np.max(self.series.zeta2))
        if self.gap is not None:
            out["gap"] = self.gap.to_dict()
        return out


def circle_gap_dictionary(radius, t_end):
    """Spacetime bumps straddling the string at three angles, all tensor entries."""
    centers = []
    for tc in (0.3 * t_end, 0.6 * t_end):
        r_t = radius * math.cos(tc / radius)
        for ang in (0.0, math.pi / 4, math.pi / 2):
            for r in (r_t - 0.2, r_t, r_t + 0.2):
                centers.append((tc, r * math.cos(ang), r * math.sin(ang)))
    widths = [(0.3 * t_end, 0.5, 0.5), (0.6 * t_end, 1.0, 1.0)]
    entries = [(a, b) for a in range(3) for b in range(3)]
    return dg.spacetime_dictionary(centers, widths, entries)


def run_circle(eps, radius=2.0, rho0=1.0, T1=1.2, t_end=1.0, half_width=3.2, resolution=8,
               cfl=0.5, rho1=0.9, cstar=None, ns=7, n1=128, snapshot_every=0.05, zeta=True,
               gap=True, d2e=True, track=True, threads=1, coarse=None, chart=None):
    """Collapsing circle x = R cos(t/R) (cos y, sin y) with the prepared kink around it."""
    timings = {}
    start = time.time()
    chart = chart or circle_chart(radius, rho0, T1)
    prof = kink_profile()
    n = int(round(2 * half_width / (eps / resolution)))
    grid = Grid.box((-half_width,) * 2, (half_width,) * 2, (n, n), (True, True))
    if coarse is None:
        coarse = max(1, int(round(COARSE_SPACING / grid.spacing[0])))
    state = prepare_scalar_data(chart, truncate_kink(prof, rho0, eps), eps, grid, coarse=coarse)
    timings["prepare"] = time.time() - start
    start = time.time()
    zeta0 = measure_preparedness(state, chart, n1=n1, nnu=int(round(2 * rho0 / (eps / 8))) + 1,
                                 coarse=coarse) if zeta else None
    timings["preparedness"] = time.time() - start

    delta = normalization(1, eps)
    hooks = []
    probes = {}
    sampler = None
    if zeta:
        if cstar is None:
            cstar = verify_metric_bounds(chart, samples=2000).get("cstar").constant
        s_max = rho1 / (2 * cstar)
        s_vals = np.linspace(0.0, s_max, ns)
        ynu = np.linspace(-rho1, rho1, int(round(2 * rho1 / (eps / 8))) + 1)
        mesh = np.meshgrid(s_vals, np.arange(n1) / n1, ynu, indexing="ij")
        y = np.stack(mesh, axis=-1)
        sampler = dg.PullbackSampler(chart, y, grid, eps)
        hooks.append(sampler)
    moments = None
    if gap:
        moments = dg.TensorMoments(circle_gap_dictionary(radius, t_end), delta, SCALAR)
        probes["moments"] = moments
    near_far = []
    if d2e:
        def weighted(snap):
            d = chart.distance_on_grid(snap.t, snap.grid.axes(), coarse=coarse)
            near_far.append((snap.t,) + dg.weighted_distance_integral(snap, d, SCALAR))
        probes["d2e"] = weighted
    radii = []
    if track:
        def tracker(snap):
            pts = dg.zero_crossings(snap.u[0], snap.grid)
            radii.append((snap.t, float(np.mean(np.linalg.norm(pts, axis=-1))) if len(pts) else
                          float("nan")))
        probes["track"] = tracker

    start = time.time()
    cfg = ws.SolverConfig(t_end=t_end, cfl=cfl, snapshot_every=snapshot_every, threads=threads)
    traj = _run_light(state, cfg, probes, hooks)
    timings["evolve"] = time.time() - start
    result = CircleRun(eps, radius, grid, zeta0, traj, timings=timings)
    result.light_cone = traj.light_cone

    if track:
        arr = np.array(radii)
        result.tracked_times = arr[:, 0]
        result.radii = arr[:, 1]
        result.radius_error = np.abs(arr[:, 1] - radius * np.cos(arr[:, 0] / radius))
    if d2e:
        arr = np.array(near_far)
        result.d2e = float(_trap_time(arr[:, 1], arr[:, 0]))
        result.outside_energy = float(_trap_time(arr[:, 2], arr[:, 0]))
    start = time.time()
    if zeta:
        pb = sampler.result()
        result.series = dg.zeta_series(pb, s_vals, rho1, cstar, 1.0, delta, SCALAR)
    if gap:
        surf_emt = surface_tensor(chart.surface, np.asarray(moments.times), ny=1024)
        result.gap = dg.emt_gap(moments, surf_emt)
    timings["diagnose"] = time.time() - start
    return result


def _trap_time(values, times):
    if len(times) < 2:
        return 0.0
    return float(np.sum(0.5 * (values[1:] + values[:-1]) * np.diff(times)))


class _LightConeWatch:
    """Snapshot probe checking finite propagation between consecutive snapshots."""

    def __init__(self, region):
        self.region = region
        self.previous = None
        self.reports = []

    def __call__(self, snap):
        model = SCALAR if snap.k == 1 else VECTOR
        if self.previous is not None:
            self.reports.append(ws.light_cone_from_density(*self.previous, snap, self.region,
                                                           model))
            self.previous = None
        # only the weighted density of the earlier snapshot is needed, not its fields
        self.previous = (ws.energy_density(snap, model) * snap.grid.quadrature_weights(), snap.t)


def _run_light(state, cfg, probes, hooks, region=None):
    """Run keeping only the first and last snapshots; probes see every snapshot."""
    if region is None:
        # half-space box on the first axis: half of the defect crosses its boundary
        lower = tuple(o for o in state.grid.origin)
        upper = tuple(o + L for o, L in zip(state.grid.origin, state.grid.lengths))
        mid = state.grid.origin[0] + 0.5 * state.grid.lengths[0]
        region = ws.region_mask(state.grid, [((mid,) + lower[1:], upper)])
    watch = _LightConeWatch(region)
    probes = dict(probes)
    probes["light_cone"] = watch
    traj = ws.run(state, cfg, probes=probes, hooks=hooks, keep_snapshots=False)
    traj.light_cone = watch.reports
    return traj


# ---------------------------------------------------------------------------
# vortex lines


def vortex_energy_ratio(eps, shape=(64, 512, 512), width=1.6, threads=1):
    """(pi |ln eps|)^-1 times the energy per unit length of the prepared straight vortex line."""
    n1, n2, n3 = shape
    h = width / (n2 - 1)
    length = n1 * h
    grid = Grid.box((0.0, -width / 2, -width / 2), (length, width / 2, width / 2), shape,
                    (True, False, False))
    zero = lambda s: np.zeros(2)
    state = prepare_vector_data(zero, zero, eps, grid)
    energy = ws.total_energy(state, VECTOR, threads)
    ratio = energy / length / (math.pi * abs(math.log(eps)))
    return ratio, (ratio - 1.0) * abs(math.log(eps))


@dataclass
class VortexTrack:
    times: np.ndarray
    errors: np.ndarray
    tolerance: float
    drift: tuple
    light_cone_margin: float


def run_rigid_vortex(eps=0.05, shape=(384, 192, 192), length=2.0, half_width=1.0,
                     amplitude=0.2, t_end=1.0, cfl=0.5, snapshot_every=0.1, threads=1):
    """Travelling vortex line with the exact core; returns the tracked-center error history."""
    core = vortex_core()
    g1, dg1 = sine_graph(amplitude, length)
    graph = lambda s: np.array([g1(s), 0.5 * g1(s)])
    d_graph = lambda s: np.array([dg1(s), 0.5 * dg1(s)])
    n1, n2, n3 = shape
    grid = Grid.box((0.0, -half_width, -half_width), (length, half_width, half_width), shape,
                    (True, False, False))
    state = prepare_vector_data(graph, d_graph, eps, grid, core=core)
    x1 = grid.axes()[0]

    def exact(t, pts):
        xi = pts[:, 0] - t
        gg = np.stack([g1(xi), 0.5 * g1(xi)])
        dd = np.stack([dg1(xi), 0.5 * dg1(xi)])
        s = (pts[:, 1:].T - gg) / eps
        u, jac = core.field(s)
        return u, np.einsum("ijp,jp->ip", jac, dd) / eps

    errors = []
    times = []

    def tracker(snap):
        centers, _ = dg.vortex_centers(snap)
        xi = x1 - snap.t
        target = np.stack([g1(xi), 0.5 * g1(xi)], axis=-1)
        errors.append(float(np.nanmax(np.linalg.norm(centers - target, axis=-1))))
        times.append(snap.t)

    cfg = ws.SolverConfig(t_end=t_end, cfl=cfl, snapshot_every=snapshot_every, model=VECTOR,
                          boundary_values=exact, threads=threads)
    region = ws.region_mask(grid, [((0.0, 0.0, -half_width), (length, half_width, half_width))])
    traj = _run_light(state, cfg, {"track": tracker}, (), region)
    tol = max(2 * max(grid.spacing), 5 * eps)
    margin = max((r.margin for r in traj.light_cone), default=0.0)
    return VortexTrack(np.array(times), np.array(errors), tol, traj.energy_drift(), margin)


# ---------------------------------------------------------------------------
# wiggly strings


@dataclass
class WigglyResult:
    wavelength: float
    amplitude: float
    eps: float
    gap_to_limit: float
    gap_to_average: float
    matrix_error: float


def wiggly_matrix(gp):
    """Nodewise tensor of the travelling kink, in units of eps^-2 q'^2."""
    z = np.zeros_like(gp)
    return np.array([[1 + gp ** 2, -gp ** 2, gp], [gp ** 2, 1 - gp ** 2, gp], [-gp, gp, z]])


def wiggly_dictionary(length, t_half):
    centers = [(0.0, c, 0.0) for c in (0.25 * length, 0.5 * length)]
    widths = [(t_half, 0.3 * length, 0.3), (t_half, 0.45 * length, 0.45)]
    entries = [(a, b) for a in range(3) for b in range(3)]
    return dg.spacetime_dictionary(centers, widths, entries)


def wiggly_gap(wavelength, ratio=0.3, eps_per_wavelength=8.0, length=0.8, height=0.5,
               t_half=0.4, nt=9, resolution=8):
    """Gaps between delta_eps T_eps of g = a sin(2 pi x / lambda) and the flat-line tensors.

    Uses the exact travelling solution on a grid at nt times in [-t_half, t_half].
    """
    amplitude = ratio * wavelength
    eps = wavelength / eps_per_wavelength
    prof = kink_profile()
    g, dgr = sine_graph(amplitude, wavelength)
    h = eps / resolution
    n1 = int(round(length / h))
    n2 = int(round(2 * height / h)) + 1
    grid = Grid.box((0.0, -height), (length, height), (n1, n2), (True, False))
    delta = normalization(1, eps)
    dictionary = wiggly_dictionary(length, t_half)
    moments = dg.TensorMoments(dictionary, delta, SCALAR)
    times = np.linspace(-t_half, t_half, nt)
    for t in times:
        u, ut = rigid_kink_field(prof, g, dgr, eps, grid, t=t)
        moments(FieldState(grid, eps, u, ut, t))
    worst = wiggly_matrix_error(wavelength, ratio, eps_per_wavelength, resolution, length, height)
    line = static_line(length, 2)
    emt = surface_tensor(line, times, ny=1024)
    limit = dg.emt_gap(moments, emt)
    mean_sq = 0.5 * (amplitude * 2 * math.pi / wavelength) ** 2
    averaged = np.array([[1 + mean_sq, -mean_sq, 0.0], [mean_sq, 1 - mean_sq, 0.0],
                         [0.0, 0.0, 0.0]])
    avg_emt = type(emt)(emt.t, emt.y, emt.points,
                        np.broadcast_to(averaged, emt.projection.shape).copy(), emt.area,
                        emt.normal_speed)
    to_avg = dg.emt_gap(moments, avg_emt)
    return WigglyResult(wavelength, amplitude, eps, limit.gap, to_avg.gap, worst)


def wiggly_matrix_error(wavelength, ratio=0.3, eps_per_wavelength=8.0, resolution=8,
                        length=0.8, height=0.5, t=0.0):
    """Max nodewise deviation of the grid tensor from the closed-form matrix, relative to its peak."""
    amplitude = ratio * wavelength
    eps = wavelength / eps_per_wavelength
    prof = kink_profile()
    g, dgr = sine_graph(amplitude, wavelength)
    h = eps / resolution
    grid = Grid.box((0.0, -height), (length, height),
                    (int(round(length / h)), int(round(2 * height / h)) + 1), (True, False))
    u, ut = rigid_kink_field(prof, g, dgr, eps, grid, t=t)
    T = dg.emt_field(FieldState(grid, eps, u, ut, t), SCALAR).tensor
    x1, x2 = grid.mesh()
    _, dq = prof.evaluate((x2 - g(x1 - t)) / eps)
    ref = dq ** 2 / eps ** 2 * wiggly_matrix(dgr(x1 - t))
    # one-sided differences on the fixed edges are first order; compare the interior
    inner = (slice(None), slice(None), slice(None), slice(1, -1))
    return float(np.max(np.abs(T - ref)[inner]) / np.max(np.abs(ref)))


# ---------------------------------------------------------------------------
# defect-functional calibration


def displaced_kink_functional(offset, eps=0.005, rho=1.0, n=4001):
    """Scalar confinement functional of q((y - a)/eps) sampled on [-rho, rho]."""
    y = np.linspace(-rho, rho, n)
    q, _ = kink_profile().evaluate((y - offset) / eps)
    return dg.defect_confinement_scalar(q, [y], rho)


def displaced_vortex_functional(offset, eps=0.005, rho=1.0, n=801, dictionary=None):
    """Planar dual-norm estimate for the truncated vortex profile centered at (a, 0)."""
    from .profiles import vortex_profile
    ax = np.linspace(-rho, rho, n)
    y1, y2 = np.meshgrid(ax, ax, indexing="ij")
    v = vortex_profile(np.stack([(y1 - offset) / eps, y2 / eps]))
    return dg.defect_confinement_vector(v[:, None], [np.zeros(1), ax, ax], rho, dictionary)

"""Measured quantities: energies, energy-momentum tensors, pulled-back fields and defect functionals."""
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import trapezoid

from .grid import Stencil
from .profiles import SCALAR, VECTOR
from .wave_solver import energy_density as _energy_density


def _model_for(k):
    return SCALAR if k == 1 else VECTOR


def energy_density(state, model=None):
    return _energy_density(state, model or _model_for(state.k))


def centered_gradient(u, grid):
    """Second-order centered gradient of a component-first field: (comp, ndim, ...)."""
    out = np.empty((u.shape[0], grid.ndim) + u.shape[1:])
    for ax, (h, per) in enumerate(zip(grid.spacing, grid.periodic)):
        a = ax + 1
        if per:
            out[:, ax] = (np.roll(u, -1, a) - np.roll(u, 1, a)) / (2 * h)
        else:
            out[:, ax] = np.gradient(u, h, axis=a, edge_order=2)
    return out


# ---------------------------------------------------------------------------
# energy-momentum tensor


@dataclass
class EnergyMomentumField:
    """tensor[a, b] = T^a_b at every node (a: row, up; b: column, down)."""

    tensor: np.ndarray
    t: float

    @property
    def energy(self):
        return self.tensor[0, 0]

    def lowered(self):
        """T_ab = eta_ac T^c_b, symmetric for a smooth field."""
        low = self.tensor.copy()
        low[0] *= -1.0
        return low


def field_derivatives(state):
    """(comp, D, ...) with D = 1 + N: index 0 is u_t, then the spatial gradient."""
    grad = centered_gradient(state.u, state.grid)
    return np.concatenate([state.ut[:, None], grad], axis=1)


def emt_field(state, model=None):
    """T^a_b = delta^a_b (eta^{cd} u_c . u_d / 2 + F / eps^2) - eta^{ac} u_c . u_b."""
    model = model or _model_for(state.k)
    du = field_derivatives(state)
    D = du.shape[1]
    sign = np.ones(D)
    sign[0] = -1.0
    r2 = np.sum(state.u * state.u, axis=0)
    lag = 0.5 * np.einsum("c,kc...->...", sign, du * du)
    lag = lag + model.scale * 0.25 * (r2 - 1.0) ** 2 / state.eps ** 2
    outer = np.einsum("ka...,kb...->ab...", du, du)
    tensor = -np.einsum("a,ab...->ab...", sign, outer)
    for a in range(D):
        tensor[a, a] += lag
    return EnergyMomentumField(tensor, state.t)


def emt_divergence(prev, cur, nxt, model=None):
    """Residual d_a T^a_b at cur.t: centered in time across snapshots, centered in space."""
    tp, tc, tn = (emt_field(s, model) for s in (prev, cur, nxt))
    span = nxt.t - prev.t
    div = (tn.tensor[0] - tp.tensor[0]) / span
    grid = cur.grid
    for i in range(grid.ndim):
        row = tc.tensor[i + 1]
        div = div + centered_gradient(row, grid)[:, i]
    return div


# ---------------------------------------------------------------------------
# pull-back to chart coordinates


class CoverageError(RuntimeError):
    pass


@dataclass
class PulledBackField:
    """v = u o psi and dv[..., a] = sum_c (D_c u o psi) dpsi^c/dy^a at chart points y."""

    y: np.ndarray
    v: np.ndarray        # (comp, ...)
    dv: np.ndarray       # (comp, ..., D)
    eps: float
    chart: object
    order: int = 3
    _metric: object = field(default=None, repr=False)

    @property
    def k(self):
        return self.v.shape[0]

    def metric(self):
        if self._metric is None:
            self._metric = self.chart.metric(self.y, with_drift=False)
        return self._metric

    @property
    def tangential(self):
        n_tau = self.y.shape[-1] - self.chart.k
        return self.dv[..., :n_tau]

    @property
    def normal(self):
        n_tau = self.y.shape[-1] - self.chart.k
        return self.dv[..., n_tau:]


def _chain_rule(du, dpsi):
    # du (comp, D, npts), dpsi (npts, D, D) indexed [comp, coord]
    return np.einsum("kcp,pca->kpa", du, dpsi)


def _uncovered(y, bad):
    cells = y[bad][:5]
    return CoverageError(f"{int(bad.sum())} chart points lie outside the grid, e.g. "
                         f"{cells.tolist()}")


def pull_back_state(state, chart, y, time_tol=1e-9):
    """Pull back a single snapshot at chart points whose image lies on t = state.t."""
    y = np.asarray(y, dtype=float)
    shape = y.shape[:-1]
    flat = y.reshape(-1, y.shape[-1])
    psi, dpsi = chart.jacobian(flat)
    if np.max(np.abs(psi[:, 0] - state.t)) > time_tol:
        raise ValueError("chart points do not lie on the time slice of the snapshot")
    st = Stencil(state.grid, psi[:, 1:])
    if not np.all(st.valid):
        raise _uncovered(flat, ~st.valid)
    val, grad = st.sample(state.u, derivatives=True)
    vt = st.sample(state.ut)
    du = np.concatenate([vt[:, None], grad], axis=1)
    dv = _chain_rule(du, dpsi)
    k = state.k
    return PulledBackField(y, val.reshape((k,) + shape), dv.reshape((k,) + shape + (-1,)),
                           state.eps, chart)


def _hermite(s, dt, f0, d0, f1, d1):
    s2 = s * s
    s3 = s2 * s
    return ((2 * s3 - 3 * s2 + 1) * f0 + (s3 - 2 * s2 + s) * dt * d0
            + (-2 * s3 + 3 * s2) * f1 + (s3 - s2) * dt * d1)


class PullbackSampler:
    """Solver hook sampling u, u_t and grad u at the images psi(y) of chart points.

    Each point is interpolated in space (cubic Lagrange) at the two time levels
    that bracket its time coordinate and in time by cubic Hermite, using u_t as
    the derivative of u, the acceleration as that of u_t and grad u_t as that
    of grad u.
    """

    def __init__(self, chart, y, grid, eps):
        y = np.asarray(y, dtype=float)
        self.chart = chart
        self.grid = grid
        self.eps = eps
        self.y = y
        flat = y.reshape(-1, y.shape[-1])
        self.psi, self.dpsi = chart.jacobian(flat)
        self.order = np.argsort(self.psi[:, 0], kind="stable")
        self.times = self.psi[self.order, 0]
        self.cursor = 0
        self.npts = flat.shape[0]
        self.du = None
        self.val = None
        self.done = np.zeros(self.npts, dtype=bool)
        self.missing = np.zeros(self.npts, dtype=bool)
        self._pending = None

    def before(self, t, dt, u, ut, acc):
        tiny = 1e-12 * max(1.0, abs(t))
        if self.cursor < self.npts and self.times[self.cursor] < t - tiny:
            # points earlier than the run start cannot be reached
            stop = np.searchsorted(self.times, t - tiny, side="left")
            self.missing[self.order[self.cursor:stop]] = True
            self.cursor = stop
        stop = np.searchsorted(self.times, t + dt + tiny, side="right")
        if stop == self.cursor:
            self._pending = None
            return
        idx = self.order[self.cursor:stop]
        self.cursor = stop
        st = Stencil(self.grid, self.psi[idx, 1:])
        self.missing[idx[~st.valid]] = True
        if self.val is None:
            k = u.shape[0]
            self.val = np.zeros((k, self.npts))
            self.du = np.zeros((k, self.grid.ndim + 1, self.npts))
        start = self._gather(st, u, ut, acc)
        self._pending = (idx, st, t, dt, start)

    @staticmethod
    def _gather(st, u, ut, acc):
        val, grad = st.sample(u, derivatives=True)
        vt, gradt = st.sample(ut, derivatives=True)
        va = st.sample(acc)
        if val.ndim == 1:
            val, grad, vt, gradt, va = val[None], grad[None], vt[None], gradt[None], va[None]
        return val, grad, vt, gradt, va

    def after(self, t, u, ut, acc):
        if self._pending is None:
            return
        idx, st, t0, dt, (u0, g0, v0, gv0, a0) = self._pending
        u1, g1, v1, gv1, a1 = self._gather(st, u, ut, acc)
        s = (self.psi[idx, 0] - t0) / dt
        self.val[:, idx] = _hermite(s, dt, u0, v0, u1, v1)
        self.du[:, 0, idx] = _hermite(s, dt, v0, a0, v1, a1)
        self.du[:, 1:, idx] = _hermite(s, dt, g0, gv0, g1, gv1)
        self.done[idx] = True
        self._pending = None

    def result(self):
        bad = self.missing | ~self.done
        flat = self.y.reshape(-1, self.y.shape[-1])
        if np.any(bad):
            raise _uncovered(flat, bad)
        k = self.val.shape[0]
        shape = self.y.shape[:-1]
        dv = _chain_rule(self.du, self.dpsi)
        return PulledBackField(self.y, self.val.reshape((k,) + shape),
                               dv.reshape((k,) + shape + (-1,)), self.eps, self.chart)


def transformed_energy(pb, model=None, metric=None):
    """e(v; G) = a^{ab} v_a . v_b / 2 + F(v)/eps^2 and e_nu = |grad_nu v|^2 / 2 + F(v)/eps^2."""
    model = model or _model_for(pb.k)
    metric = metric or pb.metric()
    r2 = np.sum(pb.v * pb.v, axis=0)
    pot = model.scale * 0.25 * (r2 - 1.0) ** 2 / pb.eps ** 2
    quad = 0.5 * np.einsum("...ab,k...a,k...b->...", metric.a, pb.dv, pb.dv)
    nu = 0.5 * np.sum(pb.normal ** 2, axis=(0, -1))
    return quad + pot, nu + pot


# ---------------------------------------------------------------------------
# defect confinement


def _normal_weights(ynu, rho):
    """Trapezoid weights on a uniform normal axis restricted to |y| <= rho."""
    h = ynu[1] - ynu[0]
    w = np.full(ynu.shape, h)
    w[0] *= 0.5
    w[-1] *= 0.5
    return np.where(np.abs(ynu) <= rho + 1e-12 * h, w, 0.0)


def defect_profile_scalar(w, ynu, rho):
    """Per-slice functional: integral of |y| (w - sign y)^2 over |y| < rho (trapezoid rule)."""
    wts = _normal_weights(ynu, rho)
    return np.sum(np.abs(ynu) * (w - np.sign(ynu)) ** 2 * wts, axis=-1)


def defect_confinement_scalar(v, axes, rho):
    """Mean over the periodic tangential axis (unit measure) of the per-slice functional."""
    v = np.asarray(v)
    if v.ndim == 1:
        return float(defect_profile_scalar(v, axes[-1], rho))
    return float(np.mean(defect_profile_scalar(v, axes[-1], rho)))


def jacobian_field(v, axes):
    """J = det grad_nu v over the last two axes by centered differences, and its slice integrals."""
    h1 = axes[-2][1] - axes[-2][0]
    h2 = axes[-1][1] - axes[-1][0]
    d1 = np.gradient(v, h1, axis=-2, edge_order=2)
    d2 = np.gradient(v, h2, axis=-1, edge_order=2)
    J = d1[0] * d2[1] - d2[0] * d1[1]
    w = np.outer(_trap(axes[-2]), _trap(axes[-1]))
    return J, np.sum(J * w, axis=(-2, -1))


def _trap(ax):
    h = ax[1] - ax[0]
    w = np.full(ax.shape, h)
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


def _septic_step(s):
    """1 for s <= 0, 0 for s >= 1, C^3 in between; returns (value, d/ds, d2/ds2)."""
    s = np.clip(s, 0.0, 1.0)
    p = 35 * s**4 - 84 * s**5 + 70 * s**6 - 20 * s**7
    dp = 140 * s**3 - 420 * s**4 + 420 * s**5 - 140 * s**6
    d2p = 420 * s**2 - 1680 * s**3 + 2100 * s**4 - 840 * s**5
    return 1.0 - p, -dp, -d2p


@dataclass(frozen=True)
class TestFunction:
    """omega = scale * P(y) * chi(|y|) on the normal plane; P in {1, |y|^3, (e.y)|y|^2}."""

    kind: str
    rho: float
    plateau: float
    direction: tuple = (1.0, 0.0)
    scale: float = 1.0

    def evaluate(self, y1, y2):
        """(omega, grad, hessian) with grad (2, ...) and hessian (2, 2, ...)."""
        r = np.sqrt(y1 * y1 + y2 * y2)
        y = np.stack([y1, y2])
        r0, r1 = self.plateau * self.rho, self.rho
        c, dc, d2c = _septic_step((r - r0) / (r1 - r0))
        dc = dc / (r1 - r0)
        d2c = d2c / (r1 - r0) ** 2
        rs = np.where(r > 0, r, 1.0)
        unit = y / rs
        eye = np.eye(2).reshape(2, 2, *([1] * r.ndim))
        uu = unit[:, None] * unit[None]
        g_chi = dc * unit
        h_chi = d2c * uu + np.where(r > 0, dc / rs, 0.0) * (eye - uu)
        if self.kind == "plateau":
            P = np.ones_like(r)
            gP = np.zeros_like(y)
            hP = np.zeros((2, 2) + r.shape)
        elif self.kind == "radial":
            P = r ** 3
            gP = 3 * r * y
            hP = 3 * np.where(r > 0, 1.0 / rs, 0.0) * y[:, None] * y[None] + 3 * r * eye
        elif self.kind == "directional":
            e = np.asarray(self.direction, dtype=float).reshape(2, *([1] * r.ndim))
            ey = np.sum(e * y, axis=0)
            P = ey * r * r
            gP = e * r * r + 2 * ey * y
            hP = 2 * (e[:, None] * y[None] + y[:, None] * e[None]) + 2 * ey * eye
        else:
            raise ValueError(f"unknown test function kind {self.kind!r}")
        om = P * c
        grad = gP * c + P * g_chi
        hess = hP * c + gP[:, None] * g_chi[None] + g_chi[:, None] * gP[None] + P * h_chi
        return self.scale * om, self.scale * grad, self.scale * hess


def _admissible_scale(fn, samples=601):
    """Largest scale with |grad w| <= |y|^2 and max(|w|, |grad w|, |D^2 w|) <= 1."""
    ax = np.linspace(-fn.rho, fn.rho, samples)
    y1, y2 = np.meshgrid(ax, ax, indexing="ij")
    om, grad, hess = replace(fn, scale=1.0).evaluate(y1, y2)
    r2 = y1 * y1 + y2 * y2
    gnorm = np.sqrt(np.sum(grad * grad, axis=0))
    ratio = np.max(np.where(r2 > 0, gnorm / np.where(r2 > 0, r2, 1.0), 0.0))
    half_trace = 0.5 * (hess[0, 0] + hess[1, 1])
    spread = np.sqrt(0.25 * (hess[0, 0] - hess[1, 1]) ** 2 + hess[0, 1] ** 2)
    hnorm = np.max(np.abs(half_trace) + spread)
    w21 = max(np.max(np.abs(om)), np.max(gnorm), hnorm)
    # sampled sup; the 0.98 factor covers the gap to the continuous sup
    return 0.98 / max(ratio, w21)


@dataclass
class TestDictionary:
    """Fixed family of admissible test functions for the planar dual norm."""

    rho: float
    elements: list

    def __post_init__(self):
        if not self.elements:
            raise ValueError("test dictionary is empty")

    def values(self, y1, y2):
        return np.stack([fn.evaluate(y1, y2)[0] for fn in self.elements])

    def at_origin(self):
        return np.array([fn.evaluate(np.zeros(1), np.zeros(1))[0][0] for fn in self.elements])


def default_dictionary(rho, directions=8, plateaus=(0.25, 0.5, 0.75)):
    """Plateau bumps, the radial cubic and directional cubics, each scaled to be admissible."""
    raw = [TestFunction("plateau", rho, p) for p in plateaus]
    raw.append(TestFunction("radial", rho, 0.5))
    for i in range(directions):
        ang = 2 * math.pi * i / directions
        raw.append(TestFunction("directional", rho, 0.5, (math.cos(ang), math.sin(ang))))
    # the admissibility constraints are rotation invariant, so one scale serves every direction
    scales = {}
    out = []
    for fn in raw:
        key = (fn.kind, fn.plateau)
        if key not in scales:
            scales[key] = _admissible_scale(replace(fn, direction=(1.0, 0.0)))
        out.append(replace(fn, scale=scales[key]))
    return TestDictionary(rho, out)


def defect_slices_vector(v, axes, rho, dictionary=None):
    """Per tangential slice: max over the dictionary of |int omega J - pi omega(0)|."""
    dictionary = dictionary or default_dictionary(rho)
    if abs(dictionary.rho - rho) > 1e-12:
        raise ValueError("dictionary radius does not match the requested radius")
    J, _ = jacobian_field(v, axes)
    y1, y2 = np.meshgrid(axes[-2], axes[-1], indexing="ij")
    om = dictionary.values(y1, y2)                      # (K, m, m)
    w = np.outer(_trap(axes[-2]), _trap(axes[-1]))
    pair = np.einsum("kij,...ij->...k", om * w, J)
    gap = np.abs(pair - math.pi * dictionary.at_origin())
    return np.max(gap, axis=-1), np.argmax(gap, axis=-1)


def defect_confinement_vector(v, axes, rho, dictionary=None):
    """Average over the tangential axis (unit measure) of the per-slice dual-norm estimate."""
    vals, _ = defect_slices_vector(v, axes, rho, dictionary)
    return float(np.mean(vals))


# ---------------------------------------------------------------------------
# zeta series


@dataclass
class DiagnosticSeries:
    s: np.ndarray
    zeta1: np.ndarray
    zeta2: np.ndarray
    zeta3: np.ndarray
    theta1: np.ndarray        # (ns, n_tangential)
    window: np.ndarray
    bad_fraction: np.ndarray
    normal_defect: np.ndarray  # (ns, n_tangential)

    def to_rows(self):
        return [{"s": float(s), "zeta1": float(a), "zeta2": float(b), "zeta3": float(c),
                 "window": float(w), "bad_fraction": float(f)}
                for s, a, b, c, w, f in zip(self.s, self.zeta1, self.zeta2, self.zeta3,
                                            self.window, self.bad_fraction)]


def zeta_series(pb, s_values, rho1, cstar, kappa2, delta, model=None, dictionary=None,
                kappa3=0.1, kappa4=0.25):
    """zeta_1,2,3 on slices y0 = s of a pulled-back field on a (s, y1, y_nu...) grid.

    Windows are W(s) = B(rho1 - cstar s); the tangential axis has unit measure.
    """
    k = pb.k
    model = model or _model_for(k)
    y = pb.y
    if k == 1:
        ynu = y[0, 0, :, 2]
        r = np.abs(y[..., 2])
        wnu = _trap(ynu)[None, None, :]
    else:
        a1 = y[0, 0, :, 0, 2]
        a2 = y[0, 0, 0, :, 3]
        nu_axes = [a1, a2]
        r = np.sqrt(y[..., 2] ** 2 + y[..., 3] ** 2)
        wnu = np.outer(_trap(a1), _trap(a2))[None, None]
    s_values = np.asarray(s_values, dtype=float)
    window = rho1 - cstar * s_values
    if np.any(window < rho1 / 2 - 1e-12):
        raise ValueError("window radius fell below rho1/2: s-range too long for the cone slope")
    if window.max() > np.max(r) + 1e-12:
        raise ValueError("pulled-back grid does not cover the largest window")
    e_G, e_nu = transformed_energy(pb, model)
    n1 = y.shape[1]
    r2 = r * r
    wts = []
    for i, rad in enumerate(window):
        wts.append(np.where(r[i] <= rad + 1e-12, wnu[0], 0.0) / n1)
    wts = np.stack(wts)
    zeta1 = delta * np.sum((1 + kappa2 * r2) * e_G * wts, axis=tuple(range(1, r.ndim))) - 1.0
    dtau = np.sum(pb.tangential ** 2, axis=(0, -1))
    zeta3 = delta * np.sum((dtau + r2 * e_nu) * wts, axis=tuple(range(1, r.ndim)))
    half = rho1 / 2
    if k == 1:
        dn = np.stack([defect_profile_scalar(pb.v[0, i], ynu, half) for i in range(len(s_values))])
        plain = np.where(r <= rho1 + 1e-12, 1.0, 0.0) * wnu
    else:
        dictionary = dictionary or default_dictionary(half)
        dn = []
        for i in range(len(s_values)):
            sub = _restrict_ball(pb.v[:, i], nu_axes, half)
            dn.append(defect_slices_vector(sub[0], sub[1], half, dictionary)[0])
        dn = np.stack(dn)
        plain = np.where(r <= rho1 + 1e-12, 1.0, 0.0) * wnu
    zeta2 = dn.mean(axis=1)
    theta1 = delta * np.sum(e_nu * plain, axis=tuple(range(2, r.ndim))) - 1.0
    bad = np.mean((theta1 > kappa4) | (dn > kappa3), axis=1)
    return DiagnosticSeries(s_values, zeta1, zeta2, zeta3, theta1, window, bad, dn)


def _restrict_ball(v, axes, rho):
    """Crop a planar slice field to the square [-rho, rho]^2 (nodes included)."""
    sel = [np.nonzero(np.abs(ax) <= rho + 1e-12)[0] for ax in axes]
    sub = v[..., sel[0][0]:sel[0][-1] + 1, sel[1][0]:sel[1][-1] + 1]
    return sub, [ax[s[0]:s[-1] + 1] for ax, s in zip(axes, sel)]


# ---------------------------------------------------------------------------
# dual-norm gap between field and surface tensors


def _bump(x, center, width):
    """Smooth bump (1 - ((x-c)/w)^2)^4 on |x - c| < w, and its derivative."""
    z = (x - center) / width
    inside = np.abs(z) < 1
    b = np.where(inside, (1 - z * z) ** 4, 0.0)
    db = np.where(inside, -8 * z * (1 - z * z) ** 3 / width, 0.0)
    return b, db


@dataclass(frozen=True)
class SpacetimeBump:
    """phi(t, x) = scale * prod_i bump(x_i; c_i, w_i), paired against one tensor entry (a, b)."""

    centers: tuple
    widths: tuple
    entry: tuple
    scale: float = 1.0

    def factors(self, axis, x):
        return _bump(x, self.centers[axis], self.widths[axis])

    def __call__(self, points):
        val = np.ones(points.shape[:-1])
        for i in range(points.shape[-1]):
            val = val * self.factors(i, points[..., i])[0]
        return self.scale * val


def bump_norm_scale(widths):
    """Scale making sup|phi| and sup|grad phi| of a product bump at most one."""
    peak_slope = 8 * (1 / math.sqrt(7)) * (1 - 1 / 7) ** 3   # max of |b'| * w
    grad = math.sqrt(sum((peak_slope / w) ** 2 for w in widths))
    return 1.0 / max(1.0, grad)


def spacetime_dictionary(centers, widths, entries):
    """All combinations of bump centers/widths (tuples over t, x1, ..) and tensor entries."""
    out = []
    for c in centers:
        for w in widths:
            for e in entries:
                out.append(SpacetimeBump(tuple(c), tuple(w), tuple(e), bump_norm_scale(w)))
    if not out:
        raise ValueError("test dictionary is empty")
    return out


class TensorMoments:
    """Snapshot probe accumulating <phi, delta T^a_b> for a spacetime bump dictionary.

    Spatial factors are applied separably (one matrix product per axis on 2-D
    grids); the time integral uses the trapezoid rule over the probed snapshots.
    """

    def __init__(self, dictionary, delta, model=None):
        self.dictionary = dictionary
        self.delta = delta
        self.model = model
        self.times = []
        self.values = []
        self._factors = None

    def _prepare(self, grid):
        axes = grid.axes()
        keys = [sorted({(m.centers[i + 1], m.widths[i + 1]) for m in self.dictionary})
                for i in range(grid.ndim)]
        mats = [np.stack([_bump(ax, c, w)[0] for c, w in kk], axis=1) for ax, kk in zip(axes, keys)]
        lookup = [{kw: j for j, kw in enumerate(kk)} for kk in keys]
        pos = np.array([[lookup[i][(m.centers[i + 1], m.widths[i + 1])] for i in range(grid.ndim)]
                        for m in self.dictionary])
        self._factors = (mats, pos)

    def __call__(self, state):
        if self._factors is None:
            self._prepare(state.grid)
        mats, pos = self._factors
        T = emt_field(state, self.model).tensor * (self.delta * state.grid.quadrature_weights())
        D = T.shape[0]
        mom = T.reshape((D * D,) + T.shape[2:])
        # contract the last axis first, keeping earlier dictionary axes at the back
        for mat in reversed(mats):
            mom = np.moveaxis(mom @ mat, -1, 1)
        # mom is now (D*D, K_1, ..., K_n)
        vals = np.empty(len(self.dictionary))
        for j, m in enumerate(self.dictionary):
            a, b = m.entry
            ft = _bump(np.array([state.t]), m.centers[0], m.widths[0])[0][0]
            vals[j] = m.scale * ft * mom[(a * D + b,) + tuple(pos[j])]
        self.times.append(state.t)
        self.values.append(vals)

    def integrals(self):
        t = np.asarray(self.times)
        v = np.asarray(self.values)
        if t.size == 1:
            return v[0]
        return trapezoid(v, t, axis=0)


@dataclass
class DualNormEstimate:
    gap: float
    best: object
    size: int
    lower_bound: bool = True
    field_values: np.ndarray = None
    surface_values: np.ndarray = None

    def to_dict(self):
        b = self.best
        return {"gap": self.gap, "size": self.size, "lower_bound": self.lower_bound,
                "best": {"centers": list(b.centers), "widths": list(b.widths),
                         "entry": list(b.entry), "scale": b.scale}}


def surface_pairings(surface_emt, dictionary):
    out = np.empty(len(dictionary))
    for j, m in enumerate(dictionary):
        a, b = m.entry
        # pair_components integrates phi * P^a_b * sqrt(-gamma)
        out[j] = surface_emt.pair_components(m)[..., a, b]
    return out


def emt_gap(moments, surface_emt, dictionary=None):
    """max over the dictionary of |<m, delta T_eps> - <m, T(surface)>| (a lower bound)."""
    dictionary = dictionary or moments.dictionary
    if len(dictionary) != len(moments.dictionary):
        raise ValueError("field moments were computed for a different dictionary")
    field_vals = moments.integrals()
    surf = surface_pairings(surface_emt, dictionary)
    diff = np.abs(field_vals - surf)
    j = int(np.argmax(diff))
    return DualNormEstimate(float(diff[j]), dictionary[j], len(dictionary), True, field_vals, surf)


# ---------------------------------------------------------------------------
# defect tracking


def zero_crossings(u, grid):
    """Points where a scalar field changes sign along grid edges (linear interpolation)."""
    axes = grid.axes()
    pts = []
    for ax in range(grid.ndim):
        a = u
        b = np.roll(u, -1, ax)
        if not grid.periodic[ax]:
            sl = [slice(None)] * grid.ndim
            sl[ax] = slice(0, -1)
            a = a[tuple(sl)]
            b = b[tuple(sl)]
        hit = (a * b < 0) | ((a == 0) & (b != 0))
        idx = np.nonzero(hit)
        if idx[0].size == 0:
            continue
        fa, fb = a[idx], b[idx]
        frac = fa / (fa - fb)
        coords = []
        for d in range(grid.ndim):
            c = axes[d][idx[d]]
            if d == ax:
                c = c + frac * grid.spacing[d]
            coords.append(c)
        pts.append(np.stack(coords, axis=-1))
    if not pts:
        return np.zeros((0, grid.ndim))
    return np.concatenate(pts)


def vortex_centers(state):
    """Per x1-slice first moment of the planar Jacobian; NaN where the slice has no net degree."""
    grid = state.grid
    axes = grid.axes()
    J, total = jacobian_field(state.u, axes[1:])
    w = np.outer(_trap(axes[1]), _trap(axes[2]))
    cx = np.sum(J * w * axes[1][:, None], axis=(-2, -1))
    cy = np.sum(J * w * axes[2][None, :], axis=(-2, -1))
    ok = np.abs(total) > 1e-3 * math.pi
    centers = np.where(ok[:, None], np.stack([cx, cy], axis=-1) / np.where(ok, total, 1.0)[:, None],
                       np.nan)
    return centers, total


def track_defect(traj_or_states):
    """Defect locus per snapshot: zero set points (k = 1) or per-slice vortex centers (k = 2)."""
    states = getattr(traj_or_states, "snapshots", traj_or_states)
    out = []
    for s in states:
        if s.k == 1:
            out.append(zero_crossings(s.u[0], s.grid))
        else:
            out.append(vortex_centers(s)[0])
    return out


def weighted_distance_integral(state, distance, model=None):
    """Integral over the chart slice of d^2 e (d is NaN outside) and of e outside it."""
    dens = energy_density(state, model) * state.grid.quadrature_weights()
    inside = ~np.isnan(distance)
    near = float(np.sum(np.where(inside, distance, 0.0) ** 2 * dens))
    far = float(np.sum(np.where(inside, 0.0, dens)))
    return near, far

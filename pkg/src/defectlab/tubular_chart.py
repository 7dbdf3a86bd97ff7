"""Tubular coordinates around a timelike string and the metric data they induce.

Chart coordinates are y = (y0, y1, y_nu...) with y0 the time-like parameter,
y1 in [0, 1) the periodic string parameter and y_nu the k normal offsets:

    psi(y) = H(y0, y1) + sum_i nu_i(y0, y1) * y_nu[i]

Arrays carry the coordinate/component axis last.
"""
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .grid import apply_separable, interpolation_matrix
from .string_geometry import minkowski

FD_STEP = 2e-3
SEED_TIME_SPAN = 1.15


class ChartError(RuntimeError):
    pass


@dataclass
class MetricData:
    """Pulled-back metric at chart points (leading axes are sample axes)."""

    y: np.ndarray
    psi: np.ndarray
    dpsi: np.ndarray          # [..., component, coordinate]
    G: np.ndarray
    ginv: np.ndarray
    det: np.ndarray
    sqrt_neg_g: np.ndarray
    a: np.ndarray
    drift: np.ndarray         # b^beta


def positive_matrix(ginv):
    """a^{00} = -g^{00}, a^{ij} = g^{ij}, a^{0i} = a^{i0} = 0."""
    a = ginv.copy()
    a[..., 0, :] = 0.0
    a[..., :, 0] = 0.0
    a[..., 0, 0] = -ginv[..., 0, 0]
    return a


def block_inverse(G, n_tau):
    """Inverse of G from its tangential/normal partition via Schur complements."""
    A = G[..., :n_tau, :n_tau]
    B = G[..., :n_tau, n_tau:]
    C = G[..., n_tau:, :n_tau]
    D = G[..., n_tau:, n_tau:]
    Dinv = np.linalg.inv(D)
    S = A - B @ Dinv @ C
    Sinv = np.linalg.inv(S)
    top_right = -Sinv @ B @ Dinv
    bottom_left = -Dinv @ C @ Sinv
    bottom_right = Dinv + Dinv @ C @ Sinv @ B @ Dinv
    top = np.concatenate([Sinv, top_right], axis=-1)
    bottom = np.concatenate([bottom_left, bottom_right], axis=-1)
    return np.concatenate([top, bottom], axis=-2)


class TubularChart:
    def __init__(self, surface, frame, rho0, T1, spatial_period=None):
        self.surface = surface
        self.frame = frame
        self.k = frame.k
        self.dim = 2 + self.k            # spacetime dimension 1 + N
        self.rho0 = float(rho0)
        self.T1 = float(T1)
        self.eta = minkowski(self.dim)
        # period of the spatial domain per axis (0 = not periodic), used by inversion
        sp = np.zeros(self.dim - 1) if spatial_period is None else np.asarray(spatial_period, float)
        self.spatial_period = sp
        self._tree = None

    # -- evaluation -------------------------------------------------------

    def psi(self, y):
        return self.jacobian(y)[0]

    def jacobian(self, y):
        y = np.asarray(y, dtype=float)
        t, s, off = y[..., 0], y[..., 1], y[..., 2:]
        jet = self.surface.jet(t, s)
        nu, nut, nuy = self.frame.evaluate(t, s, jet)
        shift = np.einsum("...i,...ic->...c", off, nu)
        psi = jet.H + shift
        d = np.empty(y.shape[:-1] + (self.dim, self.dim))
        d[..., :, 0] = jet.Ht + np.einsum("...i,...ic->...c", off, nut)
        d[..., :, 1] = jet.Hy + np.einsum("...i,...ic->...c", off, nuy)
        for i in range(self.k):
            d[..., :, 2 + i] = nu[..., i, :]
        return psi, d

    def _sqrt_neg_g(self, y):
        _, d = self.jacobian(y)
        G = np.einsum("...ca,cd,...db->...ab", d, self.eta, d)
        det = np.linalg.det(G)
        return np.sqrt(np.maximum(-det, 0.0))

    def metric(self, y, step=FD_STEP, with_drift=True):
        """Metric data at chart points; ``with_drift=False`` skips the b^beta differences."""
        y = np.asarray(y, dtype=float)
        psi, d = self.jacobian(y)
        G = np.einsum("...ca,cd,...db->...ab", d, self.eta, d)
        det = np.linalg.det(G)
        if np.any(det >= 0):
            raise ChartError("pulled-back metric lost its Lorentzian signature")
        ginv = np.linalg.inv(G)
        root = np.sqrt(-det)
        if not with_drift:
            return MetricData(y, psi, d, G, ginv, det, root, positive_matrix(ginv), None)
        grad = np.empty(y.shape[:-1] + (self.dim,))
        for a in range(self.dim):
            e = np.zeros(self.dim)
            e[a] = step
            grad[..., a] = (-self._sqrt_neg_g(y + 2 * e) + 8 * self._sqrt_neg_g(y + e)
                            - 8 * self._sqrt_neg_g(y - e) + self._sqrt_neg_g(y - 2 * e)) / (12 * step)
        drift = np.einsum("...a,...ab->...b", grad / root[..., None], ginv)
        return MetricData(y, psi, d, G, ginv, det, root, positive_matrix(ginv), drift)

    def log_root_gradient(self, y, step=FD_STEP):
        """d_alpha sqrt(-g) / sqrt(-g) by fourth-order differences."""
        y = np.asarray(y, dtype=float)
        root = self._sqrt_neg_g(y)
        grad = np.empty(y.shape[:-1] + (self.dim,))
        for a in range(self.dim):
            e = np.zeros(self.dim)
            e[a] = step
            grad[..., a] = (-self._sqrt_neg_g(y + 2 * e) + 8 * self._sqrt_neg_g(y + e)
                            - 8 * self._sqrt_neg_g(y - e) + self._sqrt_neg_g(y - 2 * e)) / (12 * step)
        return grad / root[..., None]

    # -- sampling ---------------------------------------------------------

    def sample_grid(self, n0, n1, nnu, radius=None, t_range=None):
        """Regular chart samples: y0 in t_range, y1 periodic, |y_nu| <= radius per axis."""
        radius = self.rho0 if radius is None else radius
        t0, t1 = (-self.T1, self.T1) if t_range is None else t_range
        axes = [np.linspace(t0, t1, n0), np.arange(n1) / n1]
        axes += [np.linspace(-radius, radius, nnu)] * self.k
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack(mesh, axis=-1), axes

    def _seed_tree(self, n1=None, nnu=None, n0=None, radius=None):
        n1 = n1 or 256
        nnu = nnu or 24
        n0 = n0 or 24
        radius = 1.15 * self.rho0 if radius is None else radius
        # seeds run a little past T1 so inversions near the time cut still start close
        y, _ = self.sample_grid(n0, n1, nnu, radius=radius,
                                t_range=(-SEED_TIME_SPAN * self.T1, SEED_TIME_SPAN * self.T1))
        grid_pts = self.psi(y)
        # half diagonal of the largest sample cell: every covered point lies this close to a seed
        steps = [np.max(np.linalg.norm(np.diff(grid_pts, axis=ax), axis=-1))
                 for ax in range(y.ndim - 1)]
        self._spacing = 0.5 * math.sqrt(sum(st * st for st in steps))
        if self.k == 2:
            keep = np.linalg.norm(y[..., 2:], axis=-1) <= radius
            y, pts = y[keep], grid_pts[keep]
        else:
            y, pts = y.reshape(-1, self.dim), grid_pts.reshape(-1, self.dim)
        ys = [y]
        ps = [pts]
        for axis, L in enumerate(self.spatial_period):
            if L > 0:
                for sgn in (-1, 1):
                    shifted = pts.copy()
                    shifted[:, 1 + axis] += sgn * L
                    ps.append(shifted)
                    ys.append(y)
        return cKDTree(np.vstack(ps)), np.vstack(ys)

    # -- inversion --------------------------------------------------------

    def _wrap(self, r):
        for axis, L in enumerate(self.spatial_period):
            if L > 0:
                r[..., 1 + axis] -= L * np.round(r[..., 1 + axis] / L)
        return r

    def invert(self, points, radius=None, tol=1e-11, max_iter=40, strict=True, time_limit=None):
        """Chart coordinates of spacetime points; returns (y, inside mask).

        Points whose Newton iteration converges outside |y_nu| < radius or
        |y0| < T1, or that are far from every chart sample, are Outside.
        """
        points = np.asarray(points, dtype=float)
        shape = points.shape[:-1]
        pts = points.reshape(-1, self.dim)
        radius = self.rho0 if radius is None else radius
        seed_radius = max(1.15 * self.rho0, 1.1 * radius)
        if self._tree is None or self._tree_radius < seed_radius:
            self._tree = self._seed_tree(radius=seed_radius)
            self._tree_radius = seed_radius
        tree, seeds = self._tree
        dist, idx = tree.query(pts)
        spacing = self._seed_spacing()
        near = dist < 2.0 * spacing
        y = np.full(pts.shape, np.nan)
        ok = np.zeros(pts.shape[0], dtype=bool)
        sel = np.nonzero(near)[0]
        if sel.size:
            ys, conv = self._newton(pts[sel], seeds[idx[sel]].copy(), tol, max_iter,
                                    bound=max(1.5 * radius, 1.2 * self.rho0))
            y[sel] = ys
            ok[sel] = conv
            if strict:
                sy = seeds[idx[sel]]
                off = np.linalg.norm(sy[:, 2:], axis=-1)
                interior = (np.abs(sy[:, 0]) < 0.9 * self.T1) & (off < 0.9 * self.rho0)
                bad = sel[~conv & (dist[sel] < spacing) & interior]
                if bad.size:
                    raise ChartError(f"chart inversion diverged at {bad.size} points near the "
                                     f"surface, e.g. {pts[bad[0]].tolist()}")
        y[:, 1] = np.mod(y[:, 1], 1.0)
        off = np.abs(y[:, 2]) if self.k == 1 else np.linalg.norm(y[:, 2:], axis=-1)
        time_limit = self.T1 if time_limit is None else time_limit
        inside = ok & (off < radius) & (np.abs(y[:, 0]) <= time_limit)
        return y.reshape(shape + (self.dim,)), inside.reshape(shape)

    def _seed_spacing(self):
        return self._spacing

    def _newton(self, pts, y, tol, max_iter, bound=None):
        """Damped Newton; iterates leaving |y0| < 1.5 T1, |y_nu| < bound, or stalling are dropped."""
        bound = 3.0 * self.rho0 if bound is None else bound
        res = self._wrap(self.psi(y) - pts)
        norm = np.linalg.norm(res, axis=-1)
        gone = np.zeros(norm.shape, dtype=bool)
        stalled = np.zeros(norm.shape, dtype=int)
        active = norm > tol
        for _ in range(max_iter):
            if not np.any(active):
                break
            ia = np.nonzero(active)[0]
            psi, d = self.jacobian(y[ia])
            r = self._wrap(psi - pts[ia])
            try:
                step = np.linalg.solve(d, r[..., None])[..., 0]
            except np.linalg.LinAlgError:
                step = np.linalg.lstsq(d.reshape(-1, self.dim, self.dim)[0], r[0], rcond=None)[0][None]
            lam = np.ones(ia.size)
            cur = np.linalg.norm(r, axis=-1)
            trial = y[ia] - step
            for _ in range(6):
                rn = np.linalg.norm(self._wrap(self.psi(trial) - pts[ia]), axis=-1)
                worse = rn > cur
                if not np.any(worse):
                    break
                lam = np.where(worse, lam * 0.5, lam)
                trial = y[ia] - lam[:, None] * step
            y[ia] = trial
            new = np.linalg.norm(self._wrap(self.psi(trial) - pts[ia]), axis=-1)
            # quadratic convergence shrinks the residual fast; near folds it crawls
            stalled[ia] = np.where(new > 0.5 * cur, stalled[ia] + 1, 0)
            norm[ia] = new
            lost = (np.abs(trial[:, 0]) > 1.5 * self.T1) | \
                (np.linalg.norm(trial[:, 2:], axis=-1) > bound) | (stalled[ia] >= 4)
            norm[ia[lost]] = np.inf
            gone[ia[lost]] = True
            active = (norm > tol) & ~gone
        return y, norm <= max(tol, 1e-9)

    def signed_distance(self, points, radius=None):
        if self.k != 1:
            raise ValueError("signed distance needs a hypersurface (k = 1)")
        y, inside = self.invert(points, radius=radius)
        if not np.all(inside):
            raise ChartError("point outside the chart image")
        return y[..., 2]

    def distance_on_grid(self, t, axes, coarse=4, radius=None, time_derivative=False):
        """Signed distance on a spatial grid at time t (k = 1); NaN outside the chart.

        Nodes whose whole cubic stencil on a grid ``coarse`` times coarser lies
        inside the chart are interpolated; the remaining candidates near the
        chart boundary are inverted exactly. With ``time_derivative`` the
        rate d_t of the signed distance at fixed x is returned as well.
        """
        if self.k != 1:
            raise ValueError("signed distance needs a hypersurface (k = 1)")
        radius = self.rho0 if radius is None else radius
        hc = [(ax[1] - ax[0]) * coarse for ax in axes]
        nc = [len(ax[::coarse]) + 3 for ax in axes]
        cax = [ax[0] + h * np.arange(-1, n - 1) for ax, h, n in zip(axes, hc, nc)]
        mesh = np.meshgrid(*cax, indexing="ij")
        pts = np.stack([np.full_like(mesh[0], t)] + list(mesh), axis=-1)
        # invert the coarse grid beyond the radius so that every node with |d| < radius
        # has a full stencil (|grad d| <= 2 on the charts in use, stencils span 3 cells)
        outer = radius + max(0.2 * radius, min(6.0 * max(hc), 0.5 * radius))
        # the same margin in y0, so that the cut |y0| = T1 is resolved on the fine grid
        y, inside = self.invert(pts, radius=outer, strict=False,
                                time_limit=min(self.T1 + outer - radius, SEED_TIME_SPAN * self.T1))
        dc = np.where(inside, y[..., 2], 0.0)
        y0c = np.where(inside, y[..., 0], 0.0)
        if time_derivative:
            rate = np.zeros(inside.shape)
            rate[inside] = self._distance_rate(y[inside])

        mats = [interpolation_matrix(c[0], h, n, ax)[0] for c, h, n, ax in zip(cax, hc, nc, axes)]
        pattern = [(m != 0).astype(float) for m in mats]
        # a node has a full stencil when no outside coarse node enters its 4^n stencil
        full = apply_separable(pattern, (~inside).astype(float)) < 0.5
        # partial stencils are inverted exactly only if they could reach inside the radius
        reach = radius if outer - radius >= 6.0 * max(hc) else radius + 6.0 * max(hc)
        near = inside & (np.abs(dc) < reach)
        some = apply_separable(pattern, near.astype(float)) > 0.5
        d = np.where(full, apply_separable(mats, dc), np.nan)
        d[np.abs(apply_separable(mats, y0c)) > self.T1] = np.nan
        dt = np.zeros(d.shape)
        if time_derivative:
            dt = np.where(full, apply_separable(mats, rate), 0.0)
        fmesh = np.meshgrid(*axes, indexing="ij")
        edge = some & ~full
        if np.any(edge):
            epts = np.stack([np.full(int(edge.sum()), t)] + [m[edge] for m in fmesh], axis=-1)
            ye, ins = self.invert(epts, radius=radius, strict=False)
            d[edge] = np.where(ins, ye[:, 2], np.nan)
            if time_derivative:
                de = np.zeros(ins.shape)
                de[ins] = self._distance_rate(ye[ins])
                dt[edge] = de
        d = np.where(np.abs(d) < radius, d, np.nan)
        if time_derivative:
            return d, np.where(np.isnan(d), 0.0, dt)
        return d

    def _distance_rate(self, y):
        """d y_nu / dt at fixed spatial position, from the inverse chart jacobian."""
        if len(y) == 0:
            return np.zeros(0)
        _, J = self.jacobian(y)
        return np.linalg.inv(J)[:, 2, 0]

    # -- initial hypersurface -----------------------------------------------

    def initial_graph(self, n1=256, nnu=33, tol=1e-12):
        """Solve psi^0(b(y'), y') = 0 on a grid of y' = (y1, y_nu)."""
        axes = [np.arange(n1) / n1] + [np.linspace(-self.rho0, self.rho0, nnu)] * self.k
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        lo = np.full(mesh.shape[:-1], -self.T1)
        hi = np.full(mesh.shape[:-1], self.T1)

        def time_of(y0):
            y = np.concatenate([y0[..., None], mesh], axis=-1)
            return self.psi(y)[..., 0]

        flo, fhi = time_of(lo), time_of(hi)
        if np.any(flo > 0) or np.any(fhi < 0):
            raise ChartError("initial slice t = 0 is not crossed inside (-T1, T1)")
        # safeguarded Newton: psi^0 is increasing in y0 (the chart is time oriented)
        b = 0.5 * (lo + hi)
        for _ in range(60):
            y = np.concatenate([b[..., None], mesh], axis=-1)
            psi, d = self.jacobian(y)
            f = psi[..., 0]
            lo = np.where(f < 0, b, lo)
            hi = np.where(f >= 0, b, hi)
            step = f / d[..., 0, 0]
            nb = b - step
            nb = np.where((nb > lo) & (nb < hi), nb, 0.5 * (lo + hi))
            if np.max(np.abs(nb - b)) < tol:
                b = nb
                break
            b = nb
        resid = float(np.max(np.abs(time_of(b))))
        grads = np.gradient(b, *axes, edge_order=2)
        grads = list(grads) if b.ndim > 1 else [grads]
        lip = float(np.max(np.sqrt(sum(g * g for g in grads))))
        return InitialGraph(axes, b, resid, lip)

    # -- injectivity ----------------------------------------------------------

    def check(self, n0=12, n1=128, nnu=12, min_time_speed=0.05):
        """Sampled injectivity, signature and time-orientation checks; returns failures."""
        y, _ = self.sample_grid(n0, n1, nnu)
        pts, d = self.jacobian(y)
        G = np.einsum("...ca,cd,...db->...ab", d, self.eta, d)
        fails = []
        if np.any(np.linalg.det(G) >= 0):
            fails.append("signature")
        if np.min(d[..., 0, 0]) < min_time_speed:
            fails.append("time orientation")
        jac = np.linalg.det(d)
        if np.any(np.sign(jac) != np.sign(jac.flat[0])):
            fails.append("orientation flip")
        flat = pts.reshape(-1, self.dim)
        steps = []
        for ax in range(y.ndim - 1):
            diff = np.diff(pts, axis=ax)
            steps.append(np.linalg.norm(diff, axis=-1).min())
        r = 0.5 * min(steps)
        pairs = cKDTree(flat).query_pairs(r, output_type="ndarray")
        if pairs.size:
            idx = np.array(np.unravel_index(pairs.ravel(), y.shape[:-1])).T.reshape(-1, 2, y.ndim - 1)
            gap = np.abs(idx[:, 0] - idx[:, 1])
            gap[:, 1] = np.minimum(gap[:, 1], n1 - gap[:, 1])
            if np.any(gap.max(axis=1) > 1):
                fails.append("injectivity")
        return fails

    def export_samples_csv(self, path, n0=5, n1=64, nnu=5):
        y, _ = self.sample_grid(n0, n1, nnu)
        y = y.reshape(-1, self.dim)
        m = self.metric(y)
        cols = [y, m.psi, m.sqrt_neg_g[:, None]]
        names = [f"y{i}" for i in range(self.dim)] + [f"psi{i}" for i in range(self.dim)] + ["sqrt_neg_g"]
        np.savetxt(path, np.hstack(cols), delimiter=",", fmt="%.17g", header=",".join(names),
                   comments="")


@dataclass
class InitialGraph:
    axes: list
    b: np.ndarray
    residual: float
    lipschitz: float


def build_chart(surface, frame, rho0, T1, spatial_period=None, min_radius=0.0, max_halvings=8):
    """Tubular chart with rho0 halved until the sampled checks pass."""
    rho = float(rho0)
    for _ in range(max_halvings + 1):
        if rho < min_radius:
            break
        chart = TubularChart(surface, frame, rho, T1, spatial_period)
        fails = chart.check()
        if not fails:
            chart.requested_rho0 = float(rho0)
            return chart
        rho *= 0.5
    raise ChartError(f"no admissible chart radius down to {rho:.3g} (last failures: {fails})")


# ---------------------------------------------------------------------------
# verification of coefficient bounds


@dataclass
class BoundRecord:
    name: str
    constant: float
    worst_point: list
    passed: bool = True
    extra: dict = field(default_factory=dict)


@dataclass
class VerificationReport:
    records: list
    seed: int
    samples: int

    def get(self, name):
        for r in self.records:
            if r.name == name:
                return r
        raise KeyError(name)

    @property
    def passed(self):
        return all(r.passed for r in self.records)

    def to_json(self):
        return json.dumps({"seed": self.seed, "samples": self.samples, "records": [
            {"name": r.name, "constant": r.constant, "worst_point": r.worst_point,
             "passed": r.passed, **r.extra} for r in self.records]}, indent=2, sort_keys=True)


def _sym_outer(u, v):
    return 0.5 * (u[..., :, None] * v[..., None, :] + v[..., :, None] * u[..., None, :])


def _max_generalized(M, W):
    """Largest eigenvalue of W^{-1/2} M W^{-1/2} for diagonal positive W (given as vector)."""
    s = 1.0 / np.sqrt(W)
    return np.linalg.eigvalsh(M * s[..., :, None] * s[..., None, :])[..., -1]


def _min_C_psd(base, slope, hi=1e6, iters=60):
    """Smallest C >= 0 with base + C * slope PSD (slope PSD), per sample, by bisection."""
    lo_c = np.zeros(base.shape[:-2])
    hi_c = np.full(base.shape[:-2], hi)
    ok0 = np.linalg.eigvalsh(base)[..., 0] >= -1e-13
    for _ in range(iters):
        mid = 0.5 * (lo_c + hi_c)
        good = np.linalg.eigvalsh(base + mid[..., None, None] * slope)[..., 0] >= -1e-13
        hi_c = np.where(good, mid, hi_c)
        lo_c = np.where(good, lo_c, mid)
    return np.where(ok0, 0.0, hi_c)


def cone_slope(chart, metric):
    """Per-sample c* with |a^{N alpha} xi_alpha xi_0| <= c*/2 a xi xi for each normal row."""
    a = metric.a
    L = np.linalg.cholesky(a)
    Linv = np.linalg.inv(L)
    dim = chart.dim
    e0 = np.zeros(dim)
    e0[0] = 1.0
    worst = np.zeros(a.shape[:-2])
    for row in range(2, dim):
        M = _sym_outer(a[..., row, :], np.broadcast_to(e0, a[..., row, :].shape))
        S = Linv @ M @ np.swapaxes(Linv, -1, -2)
        ev = np.linalg.eigvalsh(S)
        worst = np.maximum(worst, 2.0 * np.max(np.abs(ev), axis=-1))
    return worst


def verify_metric_bounds(chart, samples=4000, seed=0, time_range=None, step=FD_STEP,
                         thresholds=None):
    """Sampled constants for the coefficient inequalities of the transformed equation."""
    rng = np.random.default_rng(seed)
    k, dim = chart.k, chart.dim
    t0, t1 = (-chart.T1, chart.T1) if time_range is None else time_range
    y = np.empty((samples, dim))
    y[:, 0] = rng.uniform(t0, t1, samples)
    y[:, 1] = rng.uniform(0.0, 1.0, samples)
    if k == 1:
        y[:, 2] = rng.uniform(-chart.rho0, chart.rho0, samples)
    else:
        ang = rng.uniform(0, 2 * math.pi, samples)
        rad = chart.rho0 * np.sqrt(rng.uniform(0, 1, samples))
        y[:, 2], y[:, 3] = rad * np.cos(ang), rad * np.sin(ang)
    # keep away from y_nu = 0 where the weighted ratios are 0/0
    r = np.linalg.norm(y[:, 2:], axis=-1)
    tiny = r < 1e-3 * chart.rho0
    y[tiny, 2] = 1e-3 * chart.rho0
    r = np.linalg.norm(y[:, 2:], axis=-1)

    m = chart.metric(y, step)
    e = np.zeros(dim)
    e[0] = step
    g_plus2 = np.linalg.inv(chart.metric(y + 2 * e, step).G)
    g_plus = np.linalg.inv(chart.metric(y + e, step).G)
    g_minus = np.linalg.inv(chart.metric(y - e, step).G)
    g_minus2 = np.linalg.inv(chart.metric(y - 2 * e, step).G)
    dg0 = (-g_plus2 + 8 * g_plus - 8 * g_minus + g_minus2) / (12 * step)
    grads = [dg0]
    for ax in range(1, dim):
        e = np.zeros(dim)
        e[ax] = step
        gp = np.linalg.inv(chart.metric(y + e, step).G)
        gm = np.linalg.inv(chart.metric(y - e, step).G)
        grads.append((gp - gm) / (2 * step))

    records = []

    def add(name, values, larger_is_worse=True, extra=None):
        values = np.asarray(values, dtype=float)
        i = int(np.argmax(values) if larger_is_worse else np.argmin(values))
        records.append(BoundRecord(name, float(values[i]), y[i].tolist(),
                                   bool(np.isfinite(values[i])), extra or {}))

    weight = np.ones((samples, dim))
    weight[:, 2:] = (r * r)[:, None]
    w1 = np.maximum(np.abs(m.ginv).max(axis=(-1, -2)),
                    np.max([np.abs(g).max(axis=(-1, -2)) for g in grads], axis=0))
    add("coeffs1_w1inf", w1)
    add("coeffs1", _max_generalized(dg0, weight))
    e0 = np.zeros((samples, dim))
    e0[:, 0] = 1.0
    add("coeffs2", np.maximum(_max_generalized(_sym_outer(m.drift, e0), weight), 0.0))
    c3 = np.zeros(samples)
    for alpha in range(2):
        row = m.ginv[:, alpha, :]
        c3 = np.maximum(c3, np.maximum(np.linalg.norm(row[:, :2], axis=-1),
                                       np.linalg.norm(row[:, 2:], axis=-1) / r))
    add("coeffs3", c3)

    a = m.a
    Pt = np.zeros((dim, dim))
    Pt[0, 0] = Pt[1, 1] = 1.0
    Pn = np.eye(dim) - Pt
    lam_tau = np.linalg.eigvalsh(a[:, :2, :2])
    c_low = 0.5 * float(lam_tau[:, 0].min())
    C_up_tau = float(lam_tau[:, 1].max())
    rr = (r * r)[:, None, None]
    low = _min_C_psd(a - c_low * Pt - Pn, rr * Pn)
    up = _min_C_psd(C_up_tau * Pt + Pn - a, rr * Pn)
    add("pos1", np.maximum(low, up), extra={"c": c_low, "C_tau": C_up_tau})
    psi00 = m.dpsi[:, 0, 0]
    add("ps0lbd", psi00, larger_is_worse=False)
    bnu = np.linalg.norm(m.drift[:, 2:], axis=-1) / r
    add("bgood", bnu)
    cstar = cone_slope(chart, m)
    add("cstar", cstar)

    lam = float(lam_tau[:, 0].min()) if k == 1 else c_low
    kappa = _min_C_psd((1.0 + rr) * a - lam * Pt - (1.0 + rr) * Pn, rr * a)
    add("omega3_kappa2", np.maximum(kappa, 1.0), extra={"lambda": lam})
    if k == 1:
        dev = np.abs(m.ginv[:, :, dim - 1] - np.eye(dim)[dim - 1]).max(axis=-1)
        add("k1coeffs", dev)
        add("pos1a", lam_tau[:, 1], extra={"lambda": float(lam_tau[:, 0].min()),
                                          "Lambda": float(lam_tau[:, 1].max())})

    records.append(minimality_record(chart, step=step, time_range=(t0, t1)))
    if thresholds:
        for rec in records:
            lim = thresholds.get(rec.name)
            if lim is not None:
                rec.passed = rec.passed and (rec.constant >= lim if rec.name == "ps0lbd"
                                             else rec.constant <= lim)
    return VerificationReport(records, seed, samples)


def minimality_residual(chart, n0=9, n1=64, step=FD_STEP, time_range=None):
    """max over samples on the surface of |d_nu sqrt(-g)|; zero for minimal surfaces."""
    t0, t1 = (-chart.T1, chart.T1) if time_range is None else time_range
    tt, ss = np.meshgrid(np.linspace(t0, t1, n0), np.arange(n1) / n1, indexing="ij")
    y = np.zeros(tt.shape + (chart.dim,))
    y[..., 0], y[..., 1] = tt, ss
    worst = np.zeros(tt.shape)
    for i in range(chart.k):
        e = np.zeros(chart.dim)
        e[2 + i] = step
        der = (-chart._sqrt_neg_g(y + 2 * e) + 8 * chart._sqrt_neg_g(y + e)
               - 8 * chart._sqrt_neg_g(y - e) + chart._sqrt_neg_g(y - 2 * e)) / (12 * step)
        worst = np.maximum(worst, np.abs(der))
    return worst, y


def minimality_record(chart, step=FD_STEP, time_range=None):
    worst, y = minimality_residual(chart, step=step, time_range=time_range)
    i = np.unravel_index(np.argmax(worst), worst.shape)
    return BoundRecord("minimality", float(worst[i]), y[i].tolist(), True)

"""Timelike minimal strings in Minkowski space.

A surface is H(t, y) = (t, h(t, y)) with y in [0, 1) periodic (up to a
translation for open lines). The spacetime component axis is always last, time
first, and the Minkowski metric is diag(-1, 1, ..., 1).

Strings are evolved exactly through the d'Alembert form
h(t, sigma) = (a(sigma + t) + b(sigma - t)) / 2 with unit-speed generators,
which is already in the orthogonal gauge h_t . h_sigma = 0.
"""
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid
from scipy.interpolate import CubicSpline, RectBivariateSpline


class CuspError(RuntimeError):
    """The string develops a cusp (|h_y| -> 0) at the requested time."""

    def __init__(self, message, time=None, location=None):
        super().__init__(message)
        self.time = time
        self.location = location


def minkowski(dim):
    eta = np.eye(dim)
    eta[0, 0] = -1.0
    return eta


def mdot(a, b):
    """Minkowski inner product along the last axis."""
    return -a[..., 0] * b[..., 0] + np.sum(a[..., 1:] * b[..., 1:], axis=-1)


# ---------------------------------------------------------------------------
# generators


class Generator:
    """Curve xi -> R^N of the form drift * xi + periodic(xi) with the given period."""

    period: float
    dim: int

    def jet(self, xi):
        """Return value, first and second derivative, each shaped (..., N)."""
        raise NotImplementedError

    def __call__(self, xi):
        return self.jet(xi)[0]

    def unit_speed_residual(self, samples=4096):
        xi = np.linspace(0.0, self.period, samples, endpoint=False)
        return float(np.max(np.abs(np.linalg.norm(self.jet(xi)[1], axis=-1) - 1.0)))


class LineGenerator(Generator):
    def __init__(self, direction, origin=None, period=1.0):
        self.direction = np.asarray(direction, dtype=float)
        self.dim = self.direction.size
        self.origin = np.zeros(self.dim) if origin is None else np.asarray(origin, dtype=float)
        self.period = float(period)

    def jet(self, xi):
        xi = np.asarray(xi, dtype=float)[..., None]
        d = np.broadcast_to(self.direction, xi.shape[:-1] + (self.dim,))
        return self.origin + xi * self.direction, d.copy(), np.zeros_like(d)


class CircleGenerator(Generator):
    """R (cos(xi/R + phase), sin(xi/R + phase)) embedded in the first two axes."""

    def __init__(self, radius, center=None, phase=0.0, dim=2):
        self.radius = float(radius)
        self.dim = dim
        self.center = np.zeros(dim) if center is None else np.asarray(center, dtype=float)
        self.phase = float(phase)
        self.period = 2.0 * math.pi * self.radius

    def jet(self, xi):
        xi = np.asarray(xi, dtype=float)
        th = xi / self.radius + self.phase
        c, s = np.cos(th), np.sin(th)
        shape = xi.shape + (self.dim,)
        val = np.zeros(shape) + self.center
        d1 = np.zeros(shape)
        d2 = np.zeros(shape)
        val[..., 0] += self.radius * c
        val[..., 1] += self.radius * s
        d1[..., 0], d1[..., 1] = -s, c
        d2[..., 0], d2[..., 1] = -c / self.radius, -s / self.radius
        return val, d1, d2


class SplineGenerator(Generator):
    """Generator from samples over one period: drift * xi + periodic cubic spline."""

    def __init__(self, xi, values, drift, period):
        xi = np.asarray(xi, dtype=float)
        values = np.asarray(values, dtype=float)
        self.period = float(period)
        self.drift = np.asarray(drift, dtype=float)
        self.dim = values.shape[-1]
        periodic = values - xi[:, None] * self.drift
        xs = np.append(xi, xi[0] + self.period)
        ys = np.vstack([periodic, periodic[:1]])
        self._spline = CubicSpline(xs, ys, axis=0, bc_type="periodic")
        self._x0 = xi[0]

    def jet(self, xi):
        xi = np.asarray(xi, dtype=float)
        local = self._x0 + np.mod(xi - self._x0, self.period)
        lin = xi[..., None] * self.drift
        return (self._spline(local) + lin, self._spline(local, 1) + self.drift,
                self._spline(local, 2))


# ---------------------------------------------------------------------------
# surfaces


@dataclass
class SurfaceJet:
    """Embedding H = (t, h) and its derivatives in (t, y), each shaped (..., 1+N)."""

    H: np.ndarray
    Ht: np.ndarray
    Hy: np.ndarray
    Htt: np.ndarray
    Hty: np.ndarray
    Hyy: np.ndarray


def _lift(t, h, ht, hy, htt, hty, hyy):
    t = np.asarray(t, dtype=float)
    shape = h.shape[:-1]

    def pad(x, lead):
        out = np.empty(shape + (x.shape[-1] + 1,))
        out[..., 0] = lead
        out[..., 1:] = x
        return out

    return SurfaceJet(pad(h, np.broadcast_to(t, shape)), pad(ht, 1.0), pad(hy, 0.0),
                      pad(htt, 0.0), pad(hty, 0.0), pad(hyy, 0.0))


class StringSurface:
    """Base class: parameter y in [0, 1) maps to sigma = y * period."""

    dim: int  # spatial dimension N
    period: float

    def jet(self, t, y):
        raise NotImplementedError

    def spatial_points(self, t, y):
        return self.jet(t, y).H[..., 1:]


class DalembertString(StringSurface):
    def __init__(self, a, b):
        if abs(a.period - b.period) > 1e-12 * max(a.period, 1.0):
            raise ValueError("generators must share the same period")
        if a.dim != b.dim:
            raise ValueError("generators must live in the same space")
        self.a, self.b = a, b
        self.dim = a.dim
        self.period = a.period

    def jet(self, t, y):
        t, y = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(y, dtype=float))
        P = self.period
        sigma = y * P
        a0, a1, a2 = self.a.jet(sigma + t)
        b0, b1, b2 = self.b.jet(sigma - t)
        h = 0.5 * (a0 + b0)
        ht = 0.5 * (a1 - b1)
        hy = 0.5 * (a1 + b1) * P
        htt = 0.5 * (a2 + b2)
        hty = 0.5 * (a2 - b2) * P
        hyy = 0.5 * (a2 + b2) * P * P
        return _lift(t, h, ht, hy, htt, hty, hyy)


class CircleSurface(StringSurface):
    """Round circle of initial radius R whose radius is R cos(speed * t / R).

    speed = 1 is the exact collapsing minimal string; any other speed is a
    non-minimal control surface that still satisfies the orthogonal gauge.
    """

    def __init__(self, radius, speed=1.0, center=None):
        self.radius = float(radius)
        self.speed = float(speed)
        self.dim = 2
        self.center = np.zeros(2) if center is None else np.asarray(center, dtype=float)
        self.period = 2.0 * math.pi * self.radius

    def jet(self, t, y):
        t, y = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(y, dtype=float))
        R, w = self.radius, self.speed / self.radius
        th = 2.0 * math.pi * y
        er = np.stack([np.cos(th), np.sin(th)], axis=-1)
        et = np.stack([-np.sin(th), np.cos(th)], axis=-1)
        rad = R * np.cos(w * t)[..., None]
        drad = -R * w * np.sin(w * t)[..., None]
        ddrad = -R * w * w * np.cos(w * t)[..., None]
        k = 2.0 * math.pi
        return _lift(t, self.center + rad * er, drad * er, rad * k * et, ddrad * er,
                     drad * k * et, -rad * k * k * er)


def static_line(length=1.0, dim=2):
    """Static straight string along x^1 with one parameter period spanning ``length``."""
    e1 = np.zeros(dim)
    e1[0] = 1.0
    gen = LineGenerator(e1, period=length)
    return DalembertString(gen, gen)


def circle_string(radius):
    """Collapsing circle at rest at t = 0, as a d'Alembert string."""
    gen = CircleGenerator(radius)
    return DalembertString(gen, gen)


def build_generators(position0, velocity0, drift, samples=16384, d_position0=None,
                     gauge_tol=1e-8):
    """Unit-speed generators a, b from initial position and velocity.

    ``position0(s)`` and ``velocity0(s)`` take s in [0, 1) and return (..., N)
    arrays with position0(s + 1) = position0(s) + drift. The velocity must be
    normal to the curve. The parameter is renormalized to sigma with
    d sigma / ds = |x'| / sqrt(1 - |v|^2), so that a' = x_sigma + v and
    b' = x_sigma - v have unit length.
    """
    drift = np.asarray(drift, dtype=float)
    s = np.arange(samples) / samples
    x = np.asarray(position0(s), dtype=float)
    v = np.asarray(velocity0(s), dtype=float)
    if d_position0 is not None:
        dx = np.asarray(d_position0(s), dtype=float)
    else:
        dx = _periodic_derivative(x - s[:, None] * drift) + drift
    speed2 = np.sum(v * v, axis=-1)
    if np.any(speed2 >= 1.0):
        raise ValueError("initial velocity reaches the speed of light: null generator")
    tangent = np.linalg.norm(dx, axis=-1)
    if np.any(tangent <= 0.0):
        raise ValueError("initial curve is degenerate (|x'| = 0)")
    gauge = np.abs(np.sum(v * dx, axis=-1)) / tangent
    if gauge.max() > gauge_tol:
        raise ValueError(f"initial data violates the orthogonal gauge (max {gauge.max():.2e})")

    dsigma = tangent / np.sqrt(1.0 - speed2)
    sigma, period = _periodic_antiderivative(dsigma)
    W, w_total = _periodic_antiderivative(v * dsigma[:, None])

    # resample on a uniform sigma grid
    sig_u = np.arange(samples) * (period / samples)
    s_u = np.interp(sig_u, sigma, s)
    sig_spline = CubicSpline(np.append(s, 1.0), np.append(sigma, period))
    for _ in range(3):
        s_u = s_u - (sig_spline(s_u) - sig_u) / sig_spline(s_u, 1)
    w_spline = SplineGenerator(s, W, w_total, 1.0)
    x_u = np.asarray(position0(s_u), dtype=float)
    W_u = w_spline(s_u)
    drift_a = (drift + w_total) / period
    drift_b = (drift - w_total) / period
    a = SplineGenerator(sig_u, x_u + W_u, drift_a, period)
    b = SplineGenerator(sig_u, x_u - W_u, drift_b, period)
    return a, b


def _periodic_derivative(values):
    n = values.shape[0]
    k = np.fft.rfftfreq(n, d=1.0 / n) * 2.0 * math.pi
    spec = np.fft.rfft(values, axis=0)
    if n % 2 == 0:
        spec[-1] = 0.0
    return np.fft.irfft(1j * k[:, None] * spec, n=n, axis=0)


def _periodic_antiderivative(values):
    """Antiderivative over s in [0, 1) with value 0 at s = 0; returns (samples, total)."""
    squeeze = values.ndim == 1
    vals = values[:, None] if squeeze else values
    n = vals.shape[0]
    mean = vals.mean(axis=0)
    spec = np.fft.rfft(vals - mean, axis=0)
    k = np.fft.rfftfreq(n, d=1.0 / n) * 2.0 * math.pi
    k[0] = 1.0
    ispec = spec / (1j * k[:, None])
    ispec[0] = 0.0
    if n % 2 == 0:
        ispec[-1] = 0.0
    per = np.fft.irfft(ispec, n=n, axis=0)
    s = np.arange(n) / n
    out = per - per[0] + s[:, None] * mean
    if squeeze:
        return out[:, 0], float(mean[0])
    return out, mean


def rigid_wiggle_string(graph, d_graph, length=1.0, samples=16384):
    """Exact string whose slices are the graph x^nu = g(x^1 - t) over x^1 in [0, length).

    ``graph`` maps x^1 to the transverse displacement (scalar or vector).
    """
    def pos(s):
        x1 = s * length
        g = np.asarray(graph(x1), dtype=float)
        g = g[:, None] if g.ndim == 1 else g
        return np.column_stack([x1, g])

    def dpos(s):
        x1 = s * length
        dg = np.asarray(d_graph(x1), dtype=float)
        dg = dg[:, None] if dg.ndim == 1 else dg
        return np.column_stack([np.ones_like(x1), dg]) * length

    def vel(s):
        dg = np.asarray(d_graph(s * length), dtype=float)
        dg = dg[:, None] if dg.ndim == 1 else dg
        q = np.sum(dg * dg, axis=1)[:, None]
        return np.column_stack([q[:, 0], -dg]) / (1.0 + q)

    dim = pos(np.zeros(1)).shape[1]
    drift = np.zeros(dim)
    drift[0] = length
    a, b = build_generators(pos, vel, drift, samples=samples, d_position0=dpos)
    return DalembertString(a, b)


# ---------------------------------------------------------------------------
# sampled slices, gauge and cusps


@dataclass
class StringSlice:
    t: float
    y: np.ndarray
    points: np.ndarray
    velocity: np.ndarray
    tangent: np.ndarray
    gauge_residual: float
    normal_speed: np.ndarray


def evolve_string(surface, t, samples=1024, cusp_threshold=1e-3):
    """Exact slice of the surface at time t; raises CuspError at a cusp."""
    y = np.arange(samples) / samples
    jet = surface.jet(np.full(samples, float(t)), y)
    ht, hy = jet.Ht[:, 1:], jet.Hy[:, 1:]
    norm_hy = np.linalg.norm(hy, axis=1) / surface.period
    if norm_hy.min() < cusp_threshold:
        i = int(np.argmin(norm_hy))
        raise CuspError(f"string has a cusp near y={y[i]:.4f} at t={t:.6g}", time=float(t),
                        location=float(y[i]))
    gauge = float(np.max(np.abs(np.sum(ht * hy, axis=1)) / np.linalg.norm(hy, axis=1)))
    return StringSlice(float(t), y, jet.H[:, 1:], ht, hy, gauge, np.linalg.norm(ht, axis=1))


def first_cusp_time(surface, t_max, samples=1024, threshold=1e-3, tol=1e-6):
    """Earliest t in [0, t_max] with min |h_sigma| below threshold (None if none)."""
    y = np.arange(samples) / samples

    def gap(t):
        jet = surface.jet(np.full(samples, t), y)
        return np.linalg.norm(jet.Hy[:, 1:], axis=1).min() / surface.period - threshold

    ts = np.linspace(0.0, t_max, 257)
    vals = [gap(t) for t in ts]
    for i in range(1, len(ts)):
        if vals[i] < 0:
            lo, hi = ts[i - 1], ts[i]
            while hi - lo > tol:
                mid = 0.5 * (lo + hi)
                lo, hi = (lo, mid) if gap(mid) < 0 else (mid, hi)
            return 0.5 * (lo + hi)
    return None


def normal_velocity(surface, t, y):
    """V = |h_t| in the orthogonal gauge; rejects non-timelike samples."""
    V = np.linalg.norm(surface.jet(t, y).Ht[..., 1:], axis=-1)
    if np.any(V >= 1.0):
        raise ValueError("surface is not timelike (V >= 1)")
    return V


class OrthogonalizedSurface(StringSurface):
    """Raw parametrization composed with y -> phi(t, y) solving the gauge ODE.

    phi_t = -(h_t . h_y) / |h_y|^2 with phi(0, y) = y, integrated by RK4 on a
    grid ``refine`` times finer than the requested sampling in t.
    """

    def __init__(self, raw, t_range, nt, ny, refine=4):
        self.raw = raw
        t0, t1 = t_range
        if not t0 <= 0.0 <= t1:
            raise ValueError("time range must contain 0")
        self.t_fine = _centered_grid(t0, t1, (nt - 1) * refine + 1)
        self.y = np.arange(ny) / ny
        self.phi = self._integrate()
        self.refine = refine
        self.t = self.t_fine[::refine]
        points = raw(self.t_fine[:, None], self.phi)[0]
        self.dim = points.shape[-1]
        self.points_fine = points
        self.gauge_residual = self._residual()

    def _rate(self, t, phi):
        _, ht, hy = self.raw(t, phi)
        hy2 = np.sum(hy * hy, axis=-1)
        if np.any(hy2 < 1e-24):
            i = int(np.argmin(hy2))
            raise CuspError("degenerate parametrization: |h_y| = 0", time=float(t),
                            location=float(np.ravel(phi)[i]))
        return -np.sum(ht * hy, axis=-1) / hy2

    def _integrate(self):
        ts = self.t_fine
        i0 = int(np.argmin(np.abs(ts)))
        phi = np.empty((ts.size, self.y.size))
        phi[i0] = self.y
        for direction in (1, -1):
            i = i0
            while 0 <= i + direction < ts.size:
                t, dt = ts[i], ts[i + direction] - ts[i]
                p = phi[i]
                k1 = self._rate(t, p)
                k2 = self._rate(t + dt / 2, p + dt / 2 * k1)
                k3 = self._rate(t + dt / 2, p + dt / 2 * k2)
                k4 = self._rate(t + dt, p + dt * k3)
                phi[i + direction] = p + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
                i += direction
        return phi

    def _residual(self):
        # fourth-order differences of the composed map in t; chain rule in y
        h = self.points_fine
        dt = self.t_fine[1] - self.t_fine[0]
        ht = (-h[4:] + 8 * h[3:-1] - 8 * h[1:-3] + h[:-4]) / (12 * dt)
        phi = self.phi[2:-2]
        _, _, hy_raw = self.raw(self.t_fine[2:-2, None], phi)
        ny = self.y.size
        dphi = (-np.roll(phi, -2, 1) + 8 * np.roll(phi, -1, 1) - 8 * np.roll(phi, 1, 1)
                + np.roll(phi, 2, 1)) / 12.0 * ny
        # phi - y is periodic; undo the wrap jump of phi itself
        dphi = dphi - (-np.roll(self.y, -2) + 8 * np.roll(self.y, -1) - 8 * np.roll(self.y, 1)
                       + np.roll(self.y, 2)) / 12.0 * ny + 1.0
        hy = hy_raw * dphi[..., None]
        return float(np.max(np.abs(np.sum(ht * hy, axis=-1)) / np.linalg.norm(hy, axis=-1)))

    def slice_points(self, i):
        return self.points_fine[i * self.refine]


def _centered_grid(t0, t1, n):
    return np.linspace(t0, t1, n)


def orthogonalize_gauge(raw, t_range=(-0.5, 0.5), nt=129, ny=256, refine=4):
    """Reparametrize ``raw(t, y) -> (h, h_t, h_y)`` into the orthogonal gauge."""
    return OrthogonalizedSurface(raw, t_range, nt, ny, refine)


def translating_graph(graph, d_graph):
    """Raw parametrization h(t, y) = (y, g(y - t)) of a rigidly translating graph."""
    def raw(t, y):
        t, y = np.broadcast_arrays(np.asarray(t, float), np.asarray(y, float))
        g = graph(y - t)
        dg = d_graph(y - t)
        h = np.stack([y, g], axis=-1)
        ht = np.stack([np.zeros_like(y), -dg], axis=-1)
        hy = np.stack([np.ones_like(y), dg], axis=-1)
        return h, ht, hy
    return raw


# ---------------------------------------------------------------------------
# normal frames


def _k1_normal(jet, orientation):
    """Unit normal eta (H_t x H_y) and its derivatives for N = 2."""
    def cross(u, v):
        return np.cross(u, v)

    m = cross(jet.Ht, jet.Hy)
    m[..., 0] *= -1.0
    mt = cross(jet.Htt, jet.Hy) + cross(jet.Ht, jet.Hty)
    mt[..., 0] *= -1.0
    my = cross(jet.Hty, jet.Hy) + cross(jet.Ht, jet.Hyy)
    my[..., 0] *= -1.0
    n2 = mdot(m, m)
    if np.any(n2 <= 0):
        raise ValueError("surface is not timelike: normal is not spacelike")
    n = np.sqrt(n2)[..., None]
    nu = orientation * m / n
    nut = orientation * (mt / n - m * mdot(m, mt)[..., None] / n ** 3)
    nuy = orientation * (my / n - m * mdot(m, my)[..., None] / n ** 3)
    return nu[..., None, :], nut[..., None, :], nuy[..., None, :]


class FrameField:
    """Minkowski-orthonormal normal frame; ``evaluate`` returns (nu, nu_t, nu_y).

    Arrays are shaped (..., k, 1+N).
    """

    def __init__(self, surface, k, orientation=1.0, continuation=None):
        self.surface = surface
        self.k = k
        self.orientation = float(orientation)
        self._cont = continuation
        self.holonomy = 0.0 if continuation is None else continuation.holonomy

    def evaluate(self, t, y, jet=None):
        if self.k == 1:
            if jet is None:
                jet = self.surface.jet(t, y)
            return _k1_normal(jet, self.orientation)
        return self._cont.evaluate(t, y)

    def residuals(self, t, y):
        """Max orthonormality and tangency defects at the given samples."""
        jet = self.surface.jet(t, y)
        nu = self.evaluate(t, y, jet)[0]
        ortho = 0.0
        tang = 0.0
        for i in range(self.k):
            for j in range(self.k):
                ortho = max(ortho, float(np.max(np.abs(mdot(nu[..., i, :], nu[..., j, :])
                                                        - (i == j)))))
            tang = max(tang, float(np.max(np.abs(mdot(jet.Ht, nu[..., i, :])))),
                       float(np.max(np.abs(mdot(jet.Hy, nu[..., i, :])))) / self.surface.period)
        return ortho, tang


class _ContinuedFrame:
    """k = 2 frame built by projected continuation on a (t, y) grid, then splined."""

    def __init__(self, surface, t_grid, ny, holonomy_tol, close_holonomy):
        self.surface = surface
        self.t_grid = np.asarray(t_grid, dtype=float)
        self.y = np.arange(ny) / ny
        nt = self.t_grid.size
        dim = surface.dim + 1
        frames = np.empty((nt, ny, 2, dim))
        i0 = int(np.argmin(np.abs(self.t_grid)))
        start = None
        worst = 0.0
        order = list(range(i0, nt)) + list(range(i0 - 1, -1, -1))
        for i in order:
            jet = surface.jet(np.full(ny, self.t_grid[i]), self.y)
            tang = np.stack([jet.Ht, jet.Hy], axis=-2)
            if start is None:
                seed = self._initial(tang[0])
            else:
                ref = frames[i - 1, 0] if i > i0 else frames[i + 1, 0]
                seed = _project_frame(ref, tang[0])
            if i == i0:
                start = seed
            row = np.empty((ny, 2, dim))
            row[0] = seed
            for j in range(1, ny):
                row[j] = _project_frame(row[j - 1], tang[j])
            closing = _project_frame(row[-1], tang[0])
            cos_t = mdot(closing[0], row[0][0])
            sin_t = mdot(closing[0], row[0][1])
            angle = math.atan2(sin_t, cos_t)
            worst = max(worst, abs(angle))
            if abs(angle) > holonomy_tol:
                if not close_holonomy:
                    raise RuntimeError(f"normal frame does not close: holonomy {angle:.3e} rad "
                                       f"at t={self.t_grid[i]:.4g}")
                # spread the rotation evenly along the loop
                for j in range(ny):
                    row[j] = _rotate(row[j], -angle * self.y[j])
            frames[i] = row
        self.holonomy = worst
        self.frames = frames
        ext_y = np.concatenate([self.y[-3:] - 1.0, self.y, self.y[:3] + 1.0])
        ext = np.concatenate([frames[:, -3:], frames, frames[:, :3]], axis=1)
        kt = min(3, nt - 1)
        self._splines = [[RectBivariateSpline(self.t_grid, ext_y, ext[:, :, a, c], kx=kt, ky=3)
                          for c in range(dim)] for a in range(2)]

    @staticmethod
    def _initial(tangents):
        dim = tangents.shape[-1]
        e_last = np.zeros(dim)
        e_last[-1] = 1.0
        basis = _gram_schmidt_normal(np.stack([e_last, np.eye(dim)[-2]]), tangents)
        det = np.linalg.det(np.vstack([tangents, basis]))
        if det < 0:
            basis[1] *= -1.0
        return basis

    def evaluate(self, t, y):
        t, y = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(y, dtype=float))
        yy = np.mod(y, 1.0)
        dim = self.frames.shape[-1]
        nu = np.empty(t.shape + (2, dim))
        nut = np.empty_like(nu)
        nuy = np.empty_like(nu)
        for a in range(2):
            for c in range(dim):
                sp = self._splines[a][c]
                nu[..., a, c] = sp(t, yy, grid=False)
                nut[..., a, c] = sp(t, yy, dx=1, grid=False)
                nuy[..., a, c] = sp(t, yy, dy=1, grid=False)
        return nu, nut, nuy


def _gram_schmidt_normal(vectors, tangents):
    """Project vectors onto the Minkowski normal space of the tangents and orthonormalize."""
    g = np.array([[mdot(a, b) for b in tangents] for a in tangents])
    ginv = np.linalg.inv(g)
    out = []
    for v in vectors:
        coeff = ginv @ np.array([mdot(tv, v) for tv in tangents])
        w = v - coeff @ tangents
        for u in out:
            w = w - mdot(u, w) * u
        n2 = mdot(w, w)
        if n2 <= 1e-24:
            raise RuntimeError("normal frame continuation degenerated")
        out.append(w / math.sqrt(n2))
    return np.array(out)


def _project_frame(prev, tangents):
    return _gram_schmidt_normal(prev, tangents)


def _rotate(frame, angle):
    c, s = math.cos(angle), math.sin(angle)
    return np.array([c * frame[0] + s * frame[1], -s * frame[0] + c * frame[1]])


def normal_frame(surface, k, orientation=1.0, t_grid=None, ny=512, holonomy_tol=1e-6,
                 close_holonomy=False):
    """Normal frame field of a string in R^{1+n+k} with n = 1.

    k = 1 uses the closed-form normal eta(H_t x H_y) (``orientation`` = -1 flips
    it). k = 2 continues a frame seeded at y = 0 by projection along y and t.
    """
    if k == 1:
        if surface.dim != 2:
            raise ValueError("k = 1 requires N = 2")
        return FrameField(surface, 1, orientation)
    if k == 2:
        if surface.dim != 3:
            raise ValueError("k = 2 requires N = 3")
        if t_grid is None:
            t_grid = np.linspace(-1.0, 1.0, 33)
        cont = _ContinuedFrame(surface, t_grid, ny, holonomy_tol, close_holonomy)
        return FrameField(surface, 2, orientation, cont)
    raise ValueError("only codimension k = 1 or 2 is supported")


# ---------------------------------------------------------------------------
# surface energy-momentum tensor


@dataclass
class SurfaceEMT:
    """Samples of the surface tensor on a (t, y) grid.

    ``projection[..., a, b]`` is P^a_b (row index up, column index down) and
    ``area`` is the Minkowski area density sqrt(-gamma) per dt dy.
    """

    t: np.ndarray
    y: np.ndarray
    points: np.ndarray
    projection: np.ndarray
    area: np.ndarray
    normal_speed: np.ndarray

    def pair(self, test):
        """Integral over the surface of sum_ab test^b_a(H) P^a_b sqrt(-gamma).

        ``test(points)`` returns an array (..., D, D) indexed [b, a]; the t
        direction uses the trapezoid rule, y the periodic rectangle rule.
        """
        m = test(self.points)
        dens = np.einsum("...ba,...ab->...", m, self.projection) * self.area
        return _surface_quadrature(dens, self.t, self.y)

    def pair_components(self, scalar_test):
        """Matrix of integrals of scalar_test(H) P^a_b sqrt(-gamma) for every (a, b)."""
        w = scalar_test(self.points) * self.area
        dens = self.projection * w[..., None, None]
        return _surface_quadrature(dens, self.t, self.y)


def _surface_quadrature(dens, t, y):
    dy = 1.0 / y.size
    per_t = np.sum(dens, axis=1) * dy
    if t.size == 1:
        return per_t[0]
    return trapezoid(per_t, t, axis=0)


def surface_tensor(surface, t, ny=512):
    t = np.atleast_1d(np.asarray(t, dtype=float))
    y = np.arange(ny) / ny
    T, Y = np.meshgrid(t, y, indexing="ij")
    jet = surface.jet(T, Y)
    tang = np.stack([jet.Ht, jet.Hy], axis=-2)  # (..., 2, D)
    gamma = np.einsum("...ai,ij,...bj->...ab", tang, minkowski(tang.shape[-1]), tang)
    det = np.linalg.det(gamma)
    if np.any(det >= 0):
        raise ValueError("surface is not timelike at some sample")
    ginv = np.linalg.inv(gamma)
    eta = minkowski(tang.shape[-1])
    lowered = tang @ eta
    proj = np.einsum("...ai,...ab,...bj->...ij", tang, ginv, lowered)
    V = np.linalg.norm(jet.Ht[..., 1:], axis=-1)
    return SurfaceEMT(t, y, jet.H, proj, np.sqrt(-det), V)


def area_functional(points_fn, t, ny=512):
    """Minkowski area of a deformed surface, differentiating ``points_fn(t, y)`` numerically."""
    t = np.asarray(t, dtype=float)
    y = np.arange(ny) / ny
    T, Y = np.meshgrid(t, y, indexing="ij")
    dt = 1e-5
    dy = 1e-5
    Ht = (points_fn(T + dt, Y) - points_fn(T - dt, Y)) / (2 * dt)
    Hy = (points_fn(T, Y + dy) - points_fn(T, Y - dy)) / (2 * dy)
    g00, g01, g11 = mdot(Ht, Ht), mdot(Ht, Hy), mdot(Hy, Hy)
    dens = np.sqrt(np.maximum(g01 * g01 - g00 * g11, 0.0))
    return _surface_quadrature(dens, t, y)


def export_slice_csv(path, surface, t, samples=512):
    """CSV of (t, y, h components, V, sqrt(-gamma)) at one time."""
    emt = surface_tensor(surface, [t], ny=samples)
    pts = emt.points[0]
    cols = [np.full(samples, t), emt.y] + [pts[:, c] for c in range(1, pts.shape[-1])]
    cols += [emt.normal_speed[0], emt.area[0]]
    names = ["t", "y"] + [f"h{c}" for c in range(1, pts.shape[-1])] + ["V", "area"]
    np.savetxt(path, np.column_stack(cols), delimiter=",", fmt="%.17g", header=",".join(names),
               comments="")


def generators_to_json(a, b, samples=1024):
    """Serializable samples of both generators over one period."""
    xi = np.linspace(0.0, a.period, samples, endpoint=False)
    return {"period": a.period, "xi": xi.tolist(), "a": a(xi).tolist(), "b": b(xi).tolist()}

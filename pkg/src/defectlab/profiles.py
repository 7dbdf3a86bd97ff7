"""Double-well potentials, the kink and vortex profiles, and the surface tension."""
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad, solve_bvp, solve_ivp
from scipy.interpolate import CubicHermiteSpline

GROWTH_GUARD = 10.0


@dataclass(frozen=True)
class PotentialModel:
    """Quartic double well F = scale * (|u|^2 - 1)^2 / 4 for a scalar or planar target."""

    kind: str = "scalar"
    scale: float = 1.0
    growth_guard: float = GROWTH_GUARD

    def __post_init__(self):
        if self.kind not in ("scalar", "vector"):
            raise ValueError(f"potential kind must be 'scalar' or 'vector', got {self.kind!r}")
        if not self.scale > 0:
            raise ValueError("potential scale must be positive")

    @property
    def components(self):
        return 1 if self.kind == "scalar" else 2

    def _modsq(self, value):
        value = np.asarray(value, dtype=float)
        if self.kind == "scalar":
            return value, value * value
        return value, np.sum(value * value, axis=0)

    def _guarded(self, value):
        value, r2 = self._modsq(value)
        if np.any(r2 > self.growth_guard ** 2):
            warnings.warn("potential evaluated beyond the growth guard; input clamped",
                          RuntimeWarning, stacklevel=3)
            r = np.sqrt(r2)
            factor = np.where(r > self.growth_guard, self.growth_guard / np.maximum(r, 1e-300), 1.0)
            value = value * factor
            r2 = np.minimum(r2, self.growth_guard ** 2)
        return value, r2

    def F(self, value):
        _, r2 = self._guarded(value)
        return 0.25 * self.scale * (r2 - 1.0) ** 2

    def f(self, value):
        value, r2 = self._guarded(value)
        return self.scale * (r2 - 1.0) * value

    def curvature_at_vacuum(self):
        # F''(1) along the radial direction; sets the exponential decay rate of the kink tail
        return 2.0 * self.scale


SCALAR = PotentialModel("scalar")
VECTOR = PotentialModel("vector")


def eval_potential(model, value):
    """Return (F(value), f(value)). Rejects non-finite input."""
    value = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(value)):
        raise ValueError("potential evaluated at a non-finite value")
    return model.F(value), model.f(value)


def potential_constants(model, samples=2001):
    """Best sampled constants in the coercivity bounds of the double well.

    Scalar: c_low with c_low (1-|s|)^2 <= F(s) on |s| <= 2.
    Vector: c_low, c_high with c_low (1-|u|)^2 <= F(u) <= c_high (1-|u|)^2 on |u| <= 2,
    and far_floor = min F over 2 <= |u| <= growth guard.
    """
    r = np.linspace(0.0, 2.0, samples)
    r = r[np.abs(r - 1.0) > 1e-9]
    # F depends on |u| only, so the scalar form evaluates it on radii
    radial = PotentialModel("scalar", model.scale, model.growth_guard)
    ratio = radial.F(r) / (1.0 - r) ** 2
    out = {"c_low": float(ratio.min())}
    if model.kind == "vector":
        out["c_high"] = float(ratio.max())
        far = np.linspace(2.0, model.growth_guard, samples)
        out["far_floor"] = float(radial.F(far).min())
    return out


@dataclass
class KinkProfile:
    """Sampled heteroclinic q with q(0) = 0, evaluated by cubic Hermite interpolation."""

    s: np.ndarray
    q: np.ndarray
    dq: np.ndarray
    model: PotentialModel
    ode_residual: float
    first_integral_residual: float
    tail_rate: float
    _spline: CubicHermiteSpline = field(init=False, repr=False)

    def __post_init__(self):
        self._spline = CubicHermiteSpline(self.s, self.q, self.dq, extrapolate=False)

    @property
    def half_width(self):
        return float(self.s[-1])

    def __call__(self, x):
        return self.evaluate(x)[0]

    def evaluate(self, x):
        """Return (q(x), q'(x)); beyond the table the exponential tail is used."""
        x = np.asarray(x, dtype=float)
        L = self.half_width
        inside = np.abs(x) <= L
        xi = np.clip(x, -L, L)
        q = self._spline(xi)
        dq = self._spline(xi, 1)
        if not np.all(inside):
            gap = 1.0 - self.q[-1]
            excess = np.abs(x) - L
            decay = gap * np.exp(-self.tail_rate * excess)
            sgn = np.sign(x)
            q = np.where(inside, q, sgn * (1.0 - decay))
            dq = np.where(inside, dq, self.tail_rate * decay)
        return q, dq


def solve_kink(model=SCALAR, half_width=20.0, tol=1e-8, step=1e-3):
    """Heteroclinic profile of -q'' + f(q) = 0 from the first integral q' = sqrt(2F(q)).

    The ODE q' = sqrt(2F(q)) is integrated from q(0) = 0 to s = half_width and
    reflected (F is even). The reported ODE residual uses centred differences of
    the sampled q', so it is O(step^2).
    """
    if model.kind != "scalar":
        raise ValueError("kink profiles need a scalar potential")
    if half_width < 10:
        raise ValueError("half_width must be at least 10 profile units")

    def rhs(_, y):
        return [math.sqrt(max(2.0 * float(model.F(min(y[0], 1.0))), 0.0))]

    n = int(round(half_width / step))
    s_pos = np.linspace(0.0, half_width, n + 1)
    sol = solve_ivp(rhs, (0.0, half_width), [0.0], method="DOP853", t_eval=s_pos,
                    rtol=1e-13, atol=1e-15)
    if not sol.success:
        raise RuntimeError(f"kink integration failed: {sol.message}")
    q_pos = np.minimum(sol.y[0], 1.0)
    s = np.concatenate([-s_pos[:0:-1], s_pos])
    q = np.concatenate([-q_pos[:0:-1], q_pos])
    dq = np.sqrt(2.0 * model.F(q))

    h = s[1] - s[0]
    d2q = (dq[2:] - dq[:-2]) / (2 * h)
    ode_res = float(np.max(np.abs(-d2q + model.f(q[1:-1]))))
    fi_res = float(np.max(np.abs(dq - np.sqrt(2.0 * model.F(q)))))
    if fi_res > tol:
        raise RuntimeError(f"first-integral residual {fi_res:.3e} exceeds {tol:.1e}")
    if ode_res > max(tol, 10 * h * h):
        raise RuntimeError(f"kink ODE residual {ode_res:.3e} too large")
    rate = math.sqrt(model.curvature_at_vacuum())
    return KinkProfile(s, q, dq, model, ode_res, fi_res, rate)


@dataclass(frozen=True)
class SurfaceTension:
    kappa: float
    error: float


def surface_tension(model=SCALAR):
    """kappa_1 = integral of sqrt(2F) over [-1, 1] by adaptive quadrature."""
    if model.kind != "scalar":
        raise ValueError("surface tension is defined for the scalar potential")
    val, err = quad(lambda s: math.sqrt(2.0 * float(model.F(s))), -1.0, 1.0,
                    epsabs=1e-13, epsrel=1e-12, limit=200)
    if err > 1e-10:
        raise RuntimeError(f"surface tension quadrature error {err:.2e}")
    return SurfaceTension(float(val), float(err))


def line_energy(profile, lo=None, hi=None):
    """Integral of q'^2/2 + F(q) over [lo, hi] (defaults to the sampled table)."""
    lo = profile.s[0] if lo is None else lo
    hi = profile.s[-1] if hi is None else hi

    def dens(x):
        q, dq = profile.evaluate(x)
        return 0.5 * dq * dq + profile.model.F(q)

    val, _ = quad(dens, lo, hi, epsabs=1e-13, epsrel=1e-13, limit=400, points=[0.0])
    return float(val)


@dataclass
class TruncatedProfile:
    """Kink forced to exactly +-1 beyond 2 rho0 / 3 with a C^1 cubic blend from rho0 / 3.

    Arguments of ``evaluate`` are in profile units sigma = distance / eps.
    """

    profile: KinkProfile
    rho0: float
    eps: float

    @property
    def inner(self):
        return self.rho0 / (3.0 * self.eps)

    @property
    def outer(self):
        return 2.0 * self.rho0 / (3.0 * self.eps)

    def evaluate(self, sigma):
        sigma = np.asarray(sigma, dtype=float)
        q, dq = self.profile.evaluate(sigma)
        width = self.outer - self.inner
        x = np.clip((np.abs(sigma) - self.inner) / width, 0.0, 1.0)
        w = x * x * (3.0 - 2.0 * x)
        dw = 6.0 * x * (1.0 - x) / width * np.sign(sigma)
        sgn = np.where(sigma >= 0, 1.0, -1.0)
        gap = sgn - q
        return q + gap * w, dq * (1.0 - w) + gap * dw

    def __call__(self, sigma):
        return self.evaluate(sigma)[0]

    def match_error(self):
        """sup |q_trunc - q|, attained where the blend reaches the sign."""
        q_out, _ = self.profile.evaluate(self.outer)
        return float(1.0 - q_out)

    def line_energy(self):
        def dens(x):
            q, dq = self.evaluate(x)
            return 0.5 * dq * dq + self.profile.model.F(q)

        pts = [-self.outer, -self.inner, 0.0, self.inner, self.outer]
        val, _ = quad(dens, -self.outer, self.outer, points=pts, epsabs=1e-13,
                      epsrel=1e-13, limit=400)
        return float(val)


def truncate_kink(profile, rho0, eps):
    if not 0 < eps <= 1:
        raise ValueError("eps must lie in (0, 1]")
    if rho0 <= 0:
        raise ValueError("rho0 must be positive")
    if rho0 / eps < 10:
        raise ValueError(f"rho0/eps = {rho0 / eps:.3g} < 10: truncation error is not small")
    return TruncatedProfile(profile, rho0, eps)


def vortex_profile(s):
    """Degree-one map s * min(1, 1/|s|); ``s`` has its two components on axis 0."""
    s = np.asarray(s, dtype=float)
    r = np.sqrt(np.sum(s * s, axis=0))
    return s * np.minimum(1.0, 1.0 / np.maximum(r, 1e-300))


def vortex_disk_energy(radius, model=VECTOR):
    """Energy of the unrescaled vortex profile on the disk of the given radius.

    The profile is radial with modulus min(r, 1), so the density is
    (rho'^2 + rho^2 / r^2) / 2 + F(rho) integrated against 2 pi r dr.
    """
    if radius < 1:
        raise ValueError("radius must be at least the core radius 1")

    def core(r):
        return (1.0 + float(model.F(r))) * 2.0 * math.pi * r

    inner, _ = quad(core, 0.0, 1.0, epsabs=1e-13, epsrel=1e-12)
    outer, _ = quad(lambda r: math.pi / r, 1.0, radius, epsabs=1e-13, epsrel=1e-12)
    return inner + outer


def normalized_vortex_energy(rho0, eps, model=VECTOR):
    """(pi |ln eps|)^-1 times the disk energy of q_trunc(x / eps) on B(rho0)."""
    return vortex_disk_energy(rho0 / eps, model) / (math.pi * abs(math.log(eps)))


@dataclass
class VortexCore:
    """Radial modulus rho(r) of the degree-one planar solution of -Delta q + f(q) = 0."""

    r: np.ndarray
    rho: np.ndarray
    drho: np.ndarray
    residual: float

    def evaluate(self, r):
        r = np.asarray(r, dtype=float)
        rmax = self.r[-1]
        inside = r <= rmax
        spl = CubicHermiteSpline(self.r, self.rho, self.drho)
        rho = spl(np.minimum(r, rmax))
        drho = spl(np.minimum(r, rmax), 1)
        far = 1.0 - 1.0 / (2.0 * np.maximum(r, 1.0) ** 2)
        rho = np.where(inside, rho, far)
        drho = np.where(inside, drho, 1.0 / np.maximum(r, 1.0) ** 3)
        return rho, drho

    def field(self, s):
        """Planar field rho(|s|) s/|s| and its Jacobian matrix d field_i / d s_j."""
        s = np.asarray(s, dtype=float)
        r = np.sqrt(np.sum(s * s, axis=0))
        rho, drho = self.evaluate(r)
        rs = np.maximum(r, 1e-300)
        small = r < 1e-12
        ratio = np.where(small, self.drho[0], rho / rs)
        u = s * ratio
        # d(ratio)/dr = (drho - rho/r)/r
        dratio = np.where(small, 0.0, (drho - ratio) / rs)
        jac = np.empty((2, 2) + r.shape)
        for i in range(2):
            for j in range(2):
                jac[i, j] = (ratio if i == j else 0.0) + s[i] * dratio * s[j] / rs
        return u, jac


def solve_vortex_core(model=VECTOR, radius=30.0, nodes=3000):
    """Solve rho'' + rho'/r - rho/r^2 = scale (rho^2 - 1) rho with rho(0)=0, rho -> 1."""
    r0 = 1e-4
    r = np.concatenate([np.linspace(r0, 4.0, nodes // 2), np.linspace(4.0, radius, nodes // 2)[1:]])

    def rhs(x, y):
        return np.vstack([y[1], -y[1] / x + y[0] / x ** 2 + model.scale * (y[0] ** 2 - 1.0) * y[0]])

    def bc(ya, yb):
        return np.array([ya[0] - r0 * ya[1], yb[0] - (1.0 - 1.0 / (2.0 * model.scale * radius ** 2))])

    guess = np.vstack([np.tanh(r / math.sqrt(2.0)), (1 - np.tanh(r / math.sqrt(2.0)) ** 2) / math.sqrt(2.0)])
    sol = solve_bvp(rhs, bc, r, guess, tol=1e-10, max_nodes=200000)
    if not sol.success:
        raise RuntimeError(f"vortex core solve failed: {sol.message}")
    rr = np.concatenate([[0.0], sol.x])
    rho = np.concatenate([[0.0], sol.y[0]])
    drho = np.concatenate([[sol.y[1][0]], sol.y[1]])
    return VortexCore(rr, rho, drho, float(np.max(np.abs(sol.rms_residuals))))


def write_profile_csv(path, s, q):
    """Two-column CSV (s, q) with 17 significant digits."""
    np.savetxt(path, np.column_stack([s, q]), delimiter=",", fmt="%.17g", header="s,q",
               comments="")

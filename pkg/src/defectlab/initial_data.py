"""Well-prepared initial fields around a string and their preparedness measurements."""
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .grid import Grid, Stencil
from .profiles import SCALAR, VECTOR, vortex_profile


class NotSupportedError(ValueError):
    pass


@dataclass
class FieldState:
    """Field u and velocity u_t at time t; arrays are component-first (k, *grid.shape)."""

    grid: Grid
    eps: float
    u: np.ndarray
    ut: np.ndarray
    t: float = 0.0
    check_resolution: bool = True

    def __post_init__(self):
        self.u = np.ascontiguousarray(self.u, dtype=np.float64)
        self.ut = np.ascontiguousarray(self.ut, dtype=np.float64)
        if self.u.shape != self.ut.shape or self.u.shape[1:] != tuple(self.grid.shape):
            raise ValueError("field and velocity must match the grid")
        if self.u.shape[0] not in (1, 2):
            raise ValueError("only scalar and planar fields are supported")
        if self.check_resolution and max(self.grid.spacing) > self.eps / 4 + 1e-15:
            raise ValueError(f"grid spacing {max(self.grid.spacing):.4g} does not resolve "
                             f"eps = {self.eps} (need h <= eps/4)")
        if not (np.all(np.isfinite(self.u)) and np.all(np.isfinite(self.ut))):
            raise ValueError("field contains non-finite values")

    @property
    def k(self):
        return self.u.shape[0]

    def copy(self):
        return FieldState(self.grid, self.eps, self.u.copy(), self.ut.copy(), self.t,
                          self.check_resolution)

    def header(self):
        return {"grid": self.grid.to_dict(), "eps": self.eps, "k": self.k, "t": self.t,
                "dtype": "<f8", "layout": "u then ut, component-first, C order"}

    def save(self, path):
        """Binary little-endian float64 payload plus a JSON sidecar header."""
        payload = np.concatenate([self.u.ravel(), self.ut.ravel()]).astype("<f8")
        payload.tofile(path)
        with open(str(path) + ".json", "w") as fh:
            json.dump(self.header(), fh, indent=2, sort_keys=True)

    @classmethod
    def load(cls, path):
        with open(str(path) + ".json") as fh:
            head = json.load(fh)
        grid = Grid.from_dict(head["grid"])
        data = np.fromfile(path, dtype="<f8")
        shape = (head["k"],) + tuple(grid.shape)
        n = int(np.prod(shape))
        return cls(grid, head["eps"], data[:n].reshape(shape), data[n:].reshape(shape),
                   head["t"], check_resolution=False)

    def export_slice_csv(self, path, axis=0, index=None):
        """CSV of a 1-D line (2-D grids) through the middle of the given axis."""
        axes = self.grid.axes()
        other = 1 - axis if self.grid.ndim == 2 else None
        if other is None:
            raise ValueError("slice export is implemented for 2-D grids")
        idx = self.grid.shape[axis] // 2 if index is None else index
        sl = [slice(None)] * 2
        sl[axis] = idx
        cols = [axes[other]]
        names = ["x"]
        for c in range(self.k):
            cols += [self.u[c][tuple(sl)], self.ut[c][tuple(sl)]]
            names += [f"u{c}", f"ut{c}"]
        np.savetxt(path, np.column_stack(cols), delimiter=",", fmt="%.17g",
                   header=",".join(names), comments="")


def prepare_scalar_data(chart, truncated, eps, grid, coarse=1):
    """u = q_trunc(d / eps), u_t = q_trunc'(d / eps) d_t / eps inside the chart slice.

    Outside the chart slice u is the vacuum sign of the nearest chart sample
    and u_t = 0. With ``coarse`` > 1 the distance is inverted on a coarser
    grid and interpolated (see TubularChart.distance_on_grid).
    """
    if chart.k != 1:
        raise ValueError("scalar data needs a k = 1 chart")
    if abs(truncated.eps - eps) > 1e-15:
        raise ValueError("truncated profile was built for a different eps")
    mesh = grid.mesh()
    if coarse > 1:
        d, dt = chart.distance_on_grid(0.0, grid.axes(), coarse=coarse, time_derivative=True)
        inside = ~np.isnan(d)
    else:
        pts = np.stack([np.zeros_like(mesh[0])] + list(mesh), axis=-1)
        y, inside = chart.invert(pts, radius=chart.rho0, strict=False)
        d = np.where(inside, y[..., 2], np.nan)
        dt = np.zeros(grid.shape)
        dt[inside] = chart._distance_rate(y[inside])
    if not np.any(inside) or np.nanmax(np.abs(d)) < (2.0 / 3.0) * chart.rho0:
        raise ValueError("chart slice too thin: the truncated profile never reaches +-1")
    q, dq = truncated.evaluate(np.where(inside, d, 0.0) / eps)
    u = np.where(inside, q, _outside_sign(chart, mesh, inside))
    ut = np.where(inside, dq * dt / eps, 0.0)
    edge = inside & (np.abs(d) > 0.9 * chart.rho0)
    if np.any(edge) and np.max(np.abs(u[edge] - np.sign(d[edge]))) > 1e-12:
        raise ValueError("prepared field is discontinuous at the chart boundary")
    return FieldState(grid, eps, u[None], ut[None], 0.0)


def _outside_sign(chart, mesh, inside):
    # side of the nearest chart sample on the t = 0 slice
    far = ~inside
    sign = np.ones(inside.shape)
    if np.any(far):
        tree, seeds = chart._tree
        pts = np.stack([np.zeros(int(far.sum()))] + [m[far] for m in mesh], axis=-1)
        _, idx = tree.query(pts)
        sign[far] = np.where(seeds[idx, 2] >= 0, 1.0, -1.0)
    return sign


def rigid_kink_field(profile, graph, d_graph, eps, grid, t=0.0):
    """Exact travelling kink u = q((x2 - g(x1 - t)) / eps) and its velocity."""
    x1, x2 = grid.mesh()
    xi = x1 - t
    w = (x2 - graph(xi)) / eps
    q, dq = profile.evaluate(w)
    return q[None], (dq * d_graph(xi) / eps)[None]


def prepare_vector_data(graph, d_graph, eps, grid, core=None, closed_loop=False, t=0.0):
    """Vortex line u = Q((x_nu - g(x1 - t)) / eps) on a grid periodic along x1.

    ``core`` is None for the truncated profile s min(1, 1/|s|) or a
    VortexCore for the exact planar solution; ``graph`` returns the two
    transverse components shaped (2, ...).
    """
    if closed_loop:
        raise NotSupportedError("closed vortex loops need a global phase extension")
    if grid.ndim != 3 or not grid.periodic[0]:
        raise ValueError("vortex lines need a 3-D grid periodic along x1")
    axes = grid.axes()
    x2, x3 = np.meshgrid(axes[1], axes[2], indexing="ij")
    u = np.empty((2,) + tuple(grid.shape))
    ut = np.empty_like(u)
    # one x1 slice at a time keeps the temporaries planar
    for i, x1 in enumerate(axes[0]):
        xi = np.array(x1 - t)
        g = np.asarray(graph(xi), dtype=float).reshape(2)
        dg = np.asarray(d_graph(xi), dtype=float).reshape(2)
        s = np.stack([(x2 - g[0]) / eps, (x3 - g[1]) / eps])
        if core is None:
            ui = vortex_profile(s)
            jac = _truncated_vortex_jacobian(s)
        else:
            ui, jac = core.field(s)
        u[:, i] = ui
        # d/dt of Q(s) with s = (x_nu - g(x1 - t)) / eps is Q'(s) g'(x1 - t) / eps
        ut[:, i] = np.einsum("ij...,j->i...", jac, dg) / eps
    return FieldState(grid, eps, u, ut, t)


def _truncated_vortex_jacobian(s):
    r = np.sqrt(np.sum(s * s, axis=0))
    jac = np.zeros((2, 2) + r.shape)
    inner = r <= 1.0
    rs = np.maximum(r, 1e-300)
    for i in range(2):
        for j in range(2):
            outer = ((i == j) - s[i] * s[j] / (rs * rs)) / rs
            jac[i, j] = np.where(inner, float(i == j), outer)
    return jac


# ---------------------------------------------------------------------------
# preparedness


@dataclass
class PreparednessReport:
    outside_energy: float      # assumption on energy away from the chart
    normalized_energy: float   # weighted energy on the initial hypersurface minus one
    tangential_motion: float   # time-derivative term in the co-moving frame
    defect_offset: float       # defect-confinement functional at t = 0
    zeta0_raw: float
    floor: float
    terms: dict = field(default_factory=dict)

    @property
    def zeta0(self):
        return max(self.zeta0_raw, self.floor)

    def to_dict(self):
        return {"outside_energy": self.outside_energy, "normalized_energy": self.normalized_energy,
                "tangential_motion": self.tangential_motion, "defect_offset": self.defect_offset,
                "zeta0_raw": self.zeta0_raw, "floor": self.floor, "zeta0": self.zeta0}


def normalization(k, eps, kappa1=2.0 * math.sqrt(2.0) / 3.0):
    """delta_eps: eps / kappa_1 for kinks, 1 / (pi |ln eps|) for vortices."""
    if k == 1:
        return eps / kappa1
    return 1.0 / (math.pi * abs(math.log(eps)))


def zeta_floor(k, eps):
    return eps * eps if k == 1 else 1.0 / abs(math.log(eps))


def measure_preparedness(state, chart, kappa2=1.0, n1=256, nnu=129, kappa1=None,
                         rho_defect=None, dictionary=None, coarse=4):
    """The four preparedness terms; ζ0 is their max, floored by eps^2 or 1/|ln eps|."""
    from . import diagnostics

    k = state.k
    eps = state.eps
    delta = normalization(k, eps) if kappa1 is None else normalization(k, eps, kappa1)
    model = SCALAR if k == 1 else VECTOR
    if state.grid.ndim != 1 + chart.k:
        raise ValueError("state grid dimension does not match the chart")

    # energy outside the chart slice
    dens = diagnostics.energy_density(state, model)
    if k == 1:
        inside = ~np.isnan(chart.distance_on_grid(0.0, state.grid.axes(), coarse=coarse))
    else:
        mesh = state.grid.mesh()
        pts = np.stack([np.zeros_like(mesh[0])] + list(mesh), axis=-1)
        _, inside = chart.invert(pts, strict=False)
    w = state.grid.quadrature_weights()
    outside = float(delta * np.sum(np.where(inside, 0.0, dens) * w))

    # pull back onto the initial hypersurface y0 = b(y')
    graph = chart.initial_graph(n1=n1, nnu=nnu)
    ymesh = np.stack(np.meshgrid(*graph.axes, indexing="ij"), axis=-1)
    y = np.concatenate([graph.b[..., None], ymesh], axis=-1)
    pb = diagnostics.pull_back_state(state, chart, y)
    e_G, e_nu = diagnostics.transformed_energy(pb, model)
    off = ymesh[..., 1:]
    r2 = np.sum(off * off, axis=-1)
    cell = [ax[1] - ax[0] for ax in graph.axes]
    area = float(np.prod(cell))
    # periodic y1 (rectangle rule) x trapezoid in the normal directions
    wts = np.ones(r2.shape) * area
    for ax in range(1, len(graph.axes)):
        idx = [slice(None)] * r2.ndim
        idx[ax] = 0
        wts[tuple(idx)] *= 0.5
        idx[ax] = -1
        wts[tuple(idx)] *= 0.5
    if k == 2:
        wts = np.where(np.sqrt(r2) <= chart.rho0, wts, 0.0)
    energy = float(delta * np.sum((1.0 + kappa2 * r2) * e_G * wts)) - 1.0
    vt = pb.dv[..., 0]                       # (comp, ...)
    grad_nu = np.sqrt(np.sum(pb.dv[..., 2:] ** 2, axis=(0, -1)))
    vt_norm = np.sqrt(np.sum(vt * vt, axis=0))
    motion = float(delta * np.sum((vt_norm ** 2 + vt_norm * grad_nu) * wts))

    rho = chart.rho0 if rho_defect is None else rho_defect
    if k == 1:
        offset = diagnostics.defect_confinement_scalar(pb.v[0], graph.axes, rho)
    else:
        offset = diagnostics.defect_confinement_vector(pb.v, graph.axes, rho, dictionary)
    raw = max(outside, energy, motion, offset)
    return PreparednessReport(outside, energy, motion, offset, raw, zeta_floor(k, eps),
                              {"delta": delta, "hypersurface_residual": graph.residual})

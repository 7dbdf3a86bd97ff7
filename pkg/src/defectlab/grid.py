"""Uniform Cartesian grids and local cubic interpolation on them."""
from dataclasses import dataclass

import numpy as np
from scipy import sparse


@dataclass(frozen=True)
class Grid:
    """Nodes origin + i * h along each axis; periodic axes wrap with length n * h."""

    shape: tuple
    spacing: tuple
    origin: tuple
    periodic: tuple

    def __post_init__(self):
        n = len(self.shape)
        if not (len(self.spacing) == len(self.origin) == len(self.periodic) == n):
            raise ValueError("grid shape, spacing, origin and periodic flags must agree")

    @classmethod
    def box(cls, lower, upper, shape, periodic):
        """Grid on [lower, upper): periodic axes exclude ``upper``, others include it."""
        spacing = []
        for lo, hi, n, per in zip(lower, upper, shape, periodic):
            spacing.append((hi - lo) / (n if per else n - 1))
        return cls(tuple(int(n) for n in shape), tuple(spacing), tuple(float(v) for v in lower),
                   tuple(bool(p) for p in periodic))

    @property
    def ndim(self):
        return len(self.shape)

    @property
    def cell_volume(self):
        return float(np.prod(self.spacing))

    @property
    def lengths(self):
        return tuple(n * h for n, h in zip(self.shape, self.spacing))

    def axes(self):
        return [o + h * np.arange(n) for o, h, n in zip(self.origin, self.spacing, self.shape)]

    def mesh(self):
        return np.meshgrid(*self.axes(), indexing="ij")

    def quadrature_weights(self):
        """Trapezoid weights (periodic axes uniform, fixed axes halved at the ends)."""
        w = np.ones(self.shape)
        for ax, per in enumerate(self.periodic):
            if not per:
                idx = [slice(None)] * self.ndim
                idx[ax] = 0
                w[tuple(idx)] *= 0.5
                idx[ax] = -1
                w[tuple(idx)] *= 0.5
        return w * self.cell_volume

    def to_dict(self):
        return {"shape": list(self.shape), "spacing": list(self.spacing),
                "origin": list(self.origin), "periodic": list(self.periodic)}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d["shape"]), tuple(d["spacing"]), tuple(d["origin"]),
                   tuple(d["periodic"]))


def _weights(frac):
    """Cubic Lagrange weights (and derivative weights) for nodes -1, 0, 1, 2."""
    x = frac
    w = np.stack([-x * (x - 1) * (x - 2) / 6, (x + 1) * (x - 1) * (x - 2) / 2,
                  -(x + 1) * x * (x - 2) / 2, (x + 1) * x * (x - 1) / 6])
    dw = np.stack([-(3 * x * x - 6 * x + 2) / 6, (3 * x * x - 4 * x - 1) / 2,
                   -(3 * x * x - 2 * x - 2) / 2, (3 * x * x - 1) / 6])
    return w, dw


class Stencil:
    """Precomputed 4^d Lagrange stencils of a point set on a grid.

    Index and weight computation is shared between several fields sampled at
    the same points (values and their first derivatives).
    """

    def __init__(self, grid, points):
        points = np.asarray(points, dtype=float)
        self.grid = grid
        self.npts = points.shape[0]
        self.index = []
        self.w = []
        self.dw = []
        self.valid = np.ones(self.npts, dtype=bool)
        for ax in range(grid.ndim):
            s = (points[:, ax] - grid.origin[ax]) / grid.spacing[ax]
            base = np.floor(s).astype(np.int64)
            frac = s - base
            idx = base[None, :] + np.arange(-1, 3)[:, None]
            n = grid.shape[ax]
            if grid.periodic[ax]:
                idx = np.mod(idx, n)
            else:
                self.valid &= (base >= 1) & (base <= n - 3)
                idx = np.clip(idx, 0, n - 1)
            w, dw = _weights(frac)
            self.index.append(idx)
            self.w.append(w)
            self.dw.append(dw / grid.spacing[ax])

    def sample(self, field, derivatives=False):
        """Interpolate ``field`` (shape = grid.shape, or (c,) + grid.shape).

        Returns values (c, npts) and, if requested, gradients (c, ndim, npts).
        """
        field = np.asarray(field)
        squeeze = field.ndim == self.grid.ndim
        f = field[None] if squeeze else field
        nd = self.grid.ndim
        vals = np.zeros((f.shape[0], self.npts))
        grads = np.zeros((f.shape[0], nd, self.npts)) if derivatives else None
        for offs in np.ndindex(*([4] * nd)):
            gathered = f[(slice(None),) + tuple(self.index[a][o] for a, o in enumerate(offs))]
            wt = np.ones(self.npts)
            for a, o in enumerate(offs):
                wt = wt * self.w[a][o]
            vals += gathered * wt
            if derivatives:
                for d in range(nd):
                    wd = np.ones(self.npts)
                    for a, o in enumerate(offs):
                        wd = wd * (self.dw[a][o] if a == d else self.w[a][o])
                    grads[:, d] += gathered * wd
        if squeeze:
            return (vals[0], grads[0]) if derivatives else vals[0]
        return (vals, grads) if derivatives else vals

    def sample_gradient_field(self, field):
        """Interpolated values of a field together with its spatial gradient."""
        return self.sample(field, derivatives=True)


def interpolate(grid, field, points, derivatives=False):
    return Stencil(grid, points).sample(field, derivatives)


def interpolation_matrix(grid_axis_origin, spacing, size, targets):
    """Sparse (len(targets), size) cubic Lagrange interpolation matrix along one axis.

    Returns the matrix and a boolean mask of targets whose stencil fits.
    """
    s = (np.asarray(targets, dtype=float) - grid_axis_origin) / spacing
    base = np.floor(s).astype(np.int64)
    w, _ = _weights(s - base)
    cols = base[None, :] + np.arange(-1, 3)[:, None]
    fits = (base >= 1) & (base <= size - 3)
    cols = np.clip(cols, 0, size - 1)
    rows = np.broadcast_to(np.arange(len(s)), cols.shape)
    mat = sparse.csr_matrix((w.ravel(), (rows.ravel(), cols.ravel())), shape=(len(s), size))
    return mat, fits


def apply_separable(mats, values):
    """Apply one sparse matrix per axis of an n-d array (tensor-product interpolation)."""
    out = np.asarray(values, dtype=float)
    for ax, mat in enumerate(mats):
        moved = np.moveaxis(out, ax, 0)
        rest = moved.shape[1:]
        res = mat @ moved.reshape(moved.shape[0], -1)
        out = np.moveaxis(np.asarray(res).reshape((mat.shape[0],) + rest), 0, ax)
    return out

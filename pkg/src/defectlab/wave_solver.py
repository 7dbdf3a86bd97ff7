"""Explicit second-order evolution of u_tt - lap u + eps^-2 f(u) = 0 on a Cartesian grid."""
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from . import kernels
from .initial_data import FieldState
from .profiles import SCALAR


class BlowUpError(RuntimeError):
    def __init__(self, message, step, time, location):
        super().__init__(message)
        self.step = step
        self.time = time
        self.location = location


@dataclass
class SolverConfig:
    """Run parameters; ``boundary_values(t, points) -> (u, ut)`` feeds fixed (non-periodic) edges."""

    t_end: float
    cfl: float = 0.5
    snapshot_every: float = None     # time between stored snapshots; None = first and last only
    model: object = SCALAR
    order: int = 2
    threads: int = 1
    boundary_values: object = None
    energy_every: int = 1
    growth_guard: float = 10.0

    def __post_init__(self):
        if not 0.0 < self.cfl < 1.0:
            raise ValueError(f"CFL number must lie in (0, 1), got {self.cfl}")
        if self.t_end < 0:
            raise ValueError("end time must be non-negative")
        if self.order not in (2, 4):
            raise ValueError("Laplacian order must be 2 or 4")

    def time_step(self, grid, eps):
        dt = self.cfl * min(grid.spacing)
        if dt > eps / 4 + 1e-15:
            raise ValueError(f"time step {dt:.4g} does not resolve eps = {eps} (need dt <= eps/4)")
        if self.t_end == 0:
            return dt, 0
        n = int(math.ceil(self.t_end / dt - 1e-9))
        return self.t_end / n, n


@dataclass
class Trajectory:
    snapshots: list
    energy_times: np.ndarray
    energy: np.ndarray
    dt: float
    steps: int
    probes: dict = field(default_factory=dict)

    @property
    def times(self):
        return np.array([s.t for s in self.snapshots])

    def energy_drift(self):
        """Least-squares slope of E/E0 per unit time and the largest relative excursion."""
        e0 = self.energy[0]
        if e0 == 0 or len(self.energy) < 2:
            return 0.0, 0.0
        rel = self.energy / e0 - 1.0
        t = self.energy_times
        slope = np.polyfit(t, rel, 1)[0] if t[-1] > t[0] else 0.0
        return float(abs(slope)), float(np.max(np.abs(rel)))


class _Stepper:
    """Velocity Verlet (the leapfrog scheme with full-step velocities) on one field."""

    def __init__(self, state, config):
        self.grid = state.grid
        self.eps = state.eps
        self.config = config
        self.nonlin = config.model.scale / state.eps ** 2
        self.u = state.u.copy()
        self.ut = state.ut.copy()
        self.acc = np.empty_like(self.u)
        self.t = state.t
        self.step_count = 0
        self._edges = None
        if not all(self.grid.periodic):
            if config.boundary_values is None:
                raise ValueError("fixed boundaries need a boundary_values callback")
            mask = np.zeros(self.grid.shape, dtype=bool)
            for ax, per in enumerate(self.grid.periodic):
                if not per:
                    idx = [slice(None)] * self.grid.ndim
                    idx[ax] = 0
                    mask[tuple(idx)] = True
                    idx[ax] = -1
                    mask[tuple(idx)] = True
            self._edges = mask
            self._edge_points = np.stack([m[mask] for m in self.grid.mesh()], axis=-1)
        self._accelerate(None, 0.0)

    def _accelerate(self, kick, kick_dt):
        maxsq, bad = kernels.acceleration(self.u, self.acc, self.grid.spacing, self.nonlin,
                                          self.grid.periodic, self.config.order,
                                          self.config.threads, kick=kick, kick_dt=kick_dt)
        if bad or maxsq > self.config.growth_guard ** 2:
            r2 = np.sum(self.u * self.u, axis=0)
            where = np.argwhere(~np.isfinite(r2) | (r2 > self.config.growth_guard ** 2))[0]
            raise BlowUpError(f"field left the growth guard at node {where.tolist()} "
                              f"(step {self.step_count}, t = {self.t:.6g})",
                              self.step_count, self.t, where.tolist())

    def step(self, dt):
        kernels.drift(self.u, self.ut, self.acc, 0.5 * dt, dt, self.config.threads)
        self.t += dt
        self.step_count += 1
        if self._edges is not None:
            ub, utb = self.config.boundary_values(self.t, self._edge_points)
            self.u[:, self._edges] = ub
            self.ut[:, self._edges] = utb
        self._accelerate(self.ut, 0.5 * dt)

    def energy(self):
        return kernels.energy(self.u, self.ut, self.grid.spacing, self.nonlin,
                              self.grid.periodic, self.config.threads)

    def state(self):
        return FieldState(self.grid, self.eps, self.u.copy(), self.ut.copy(), self.t,
                          check_resolution=False)


def step(state, dt, config=None):
    """One step of the scheme; returns a new FieldState."""
    config = config or SolverConfig(t_end=abs(dt))
    stepper = _Stepper(state, config)
    stepper.step(dt)
    return stepper.state()


def run(initial, config, probes=None, hooks=(), keep_snapshots=True):
    """Evolve ``initial`` to t_end.

    ``probes`` maps names to read-only callables of a FieldState, evaluated on
    every snapshot. ``hooks`` see every step: ``hook.before(t, dt, u, ut, acc)``
    and ``hook.after(t, u, ut, acc)``; they must not modify the arrays. With
    ``keep_snapshots=False`` only the first and last snapshots are retained.
    """
    probes = probes or {}
    dt, n = config.time_step(initial.grid, initial.eps)
    stepper = _Stepper(initial, config)
    every = n if config.snapshot_every is None else max(1, int(round(config.snapshot_every / dt)))
    snaps = [initial]
    results = {name: [fn(snaps[0])] for name, fn in probes.items()}
    etimes = [stepper.t]
    energies = [stepper.energy()]
    for i in range(1, n + 1):
        for hook in hooks:
            hook.before(stepper.t, dt, stepper.u, stepper.ut, stepper.acc)
        stepper.step(dt)
        for hook in hooks:
            hook.after(stepper.t, stepper.u, stepper.ut, stepper.acc)
        if i % config.energy_every == 0 or i == n:
            etimes.append(stepper.t)
            energies.append(stepper.energy())
        if i % every == 0 or i == n:
            if not keep_snapshots and len(snaps) > 1:
                snaps.pop()
            snap = stepper.state()
            snaps.append(snap)
            for name, fn in probes.items():
                results[name].append(fn(snap))
    return Trajectory(snaps, np.array(etimes), np.array(energies), dt, n, results)


def evolve(initial, config, dt, nsteps):
    """Fixed number of steps with a signed dt (negative dt runs backwards)."""
    stepper = _Stepper(initial, config)
    for _ in range(nsteps):
        stepper.step(dt)
    return stepper.state()


def energy_density(state, model=SCALAR):
    """Nodewise e = (u_t^2 + |grad u|^2) / 2 + F(u) / eps^2.

    The gradient term averages the forward and backward one-sided squares, so
    the grid sum equals the total energy of the forward-difference ledger on
    periodic grids.
    """
    u, ut = state.u, state.ut
    r2 = np.einsum("c...,c...->...", u, u)
    dens = model.scale * 0.25 * (r2 - 1.0) ** 2 / state.eps ** 2
    del r2
    dens += 0.5 * np.einsum("c...,c...->...", ut, ut)
    for ax, (h, per) in enumerate(zip(state.grid.spacing, state.grid.periodic)):
        sq = np.zeros(state.grid.shape)
        for comp in u:
            # one component at a time keeps the temporaries at scalar size
            if per:
                fwd = np.roll(comp, -1, ax)
                fwd -= comp
            else:
                fwd = np.diff(comp, axis=ax, append=comp.take([-1], axis=ax))
            fwd *= fwd
            sq += fwd
        del fwd
        sq *= 0.25 / (h * h)
        dens += sq
        if per:
            dens += np.roll(sq, 1, ax)
        else:
            idx = [slice(None)] * sq.ndim
            lead = list(idx)
            lead[ax] = slice(1, None)
            idx[ax] = slice(None, -1)
            dens[tuple(lead)] += sq[tuple(idx)]
    return dens


def total_energy(state, model=SCALAR, threads=1):
    return kernels.energy(state.u, state.ut, state.grid.spacing, model.scale / state.eps ** 2,
                          state.grid.periodic, threads)


# ---------------------------------------------------------------------------
# finite propagation speed


@dataclass
class LightConeReport:
    inner_energy_late: float
    outer_energy_early: float
    margin: float             # late - early, normalized by total energy
    total_energy: float
    erosion: float
    passed: bool


def region_mask(grid, boxes, complement=False):
    """Boolean mask of a union of axis-aligned boxes [(lower, upper), ...]."""
    mesh = grid.mesh()
    mask = np.zeros(grid.shape, dtype=bool)
    for lower, upper in boxes:
        sel = np.ones(grid.shape, dtype=bool)
        for m, lo, hi in zip(mesh, lower, upper):
            sel &= (m >= lo) & (m <= hi)
        mask |= sel
    return ~mask if complement else mask


def erode(grid, mask, distance):
    """Nodes of ``mask`` farther than ``distance`` from its complement."""
    if distance <= 0:
        return mask.copy()
    # periodic axes see the complement across the seam, so pad by wrapping
    pad = [(int(math.ceil(distance / h)) + 1, ) * 2 if per else (1, 1)
           for h, per in zip(grid.spacing, grid.periodic)]
    padded = np.pad(mask, [p if per else (0, 0) for p, per in zip(pad, grid.periodic)],
                    mode="wrap")
    dist = ndimage.distance_transform_edt(padded, sampling=grid.spacing)
    crop = tuple(slice(p[0], p[0] + n) if per else slice(None)
                 for p, n, per in zip(pad, grid.shape, grid.periodic))
    return dist[crop] > distance


def light_cone_check(early, late, region, model=SCALAR, tol=1e-6, slack_cells=2):
    """Energy in the eroded region at the late time must not exceed that of the region earlier.

    The erosion distance is the elapsed time plus ``slack_cells`` grid cells,
    absorbing the one-cell reach of the discrete Laplacian per step and the
    nodal resolution of the mask.
    """
    early_density = energy_density(early, model) * early.grid.quadrature_weights()
    return light_cone_from_density(early_density, early.t, late, region, model, tol, slack_cells)


def light_cone_from_density(early_density, early_t, late, region, model=SCALAR, tol=1e-6,
                            slack_cells=2):
    """light_cone_check with the early side given as quadrature-weighted energy density."""
    grid = late.grid
    span = abs(late.t - early_t)
    erosion = span + slack_cells * max(grid.spacing)
    inner = erode(grid, region, erosion) if span > 0 else region
    e_late = energy_density(late, model)
    e_late *= grid.quadrature_weights()
    total = float(np.sum(early_density))
    late_in = float(np.sum(e_late[inner]))
    early_in = float(np.sum(early_density[region]))
    margin = (late_in - early_in) / total if total > 0 else 0.0
    return LightConeReport(late_in, early_in, margin, total, erosion, margin <= tol)


def light_cone_series(traj, region, model=SCALAR, tol=1e-6):
    """Check every consecutive snapshot pair; returns the reports."""
    return [light_cone_check(a, b, region, model, tol)
            for a, b in zip(traj.snapshots[:-1], traj.snapshots[1:])]

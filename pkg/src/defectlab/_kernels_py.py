"""Numpy implementations of the stencil kernels (same contract as the compiled module)."""
import numpy as np


def _second(u, axis, periodic, order):
    # one-axis second difference, no 1/h^2; fixed edges are left as garbage and masked later
    if periodic:
        d2 = np.roll(u, 1, axis) - 2.0 * u + np.roll(u, -1, axis)
        if order == 4:
            d4 = (-np.roll(u, 2, axis) + 16.0 * np.roll(u, 1, axis) - 30.0 * u
                  + 16.0 * np.roll(u, -1, axis) - np.roll(u, -2, axis)) / 12.0
            return d4
        return d2
    d2 = np.zeros_like(u)
    n = u.shape[axis]
    inner = [slice(None)] * u.ndim
    lo = list(inner)
    hi = list(inner)
    inner[axis] = slice(1, n - 1)
    lo[axis] = slice(0, n - 2)
    hi[axis] = slice(2, n)
    d2[tuple(inner)] = u[tuple(lo)] - 2.0 * u[tuple(inner)] + u[tuple(hi)]
    if order == 4 and n > 4:
        mid = list(inner)
        mid[axis] = slice(2, n - 2)
        s = [list(inner) for _ in range(5)]
        for off, sl in zip(range(-2, 3), s):
            sl[axis] = slice(2 + off, n - 2 + off)
        d2[tuple(mid)] = (-u[tuple(s[0])] + 16.0 * u[tuple(s[1])] - 30.0 * u[tuple(s[2])]
                          + 16.0 * u[tuple(s[3])] - u[tuple(s[4])]) / 12.0
    return d2


def _acceleration(u, acc, inv_h2, nonlin, periodic, order):
    r2 = np.sum(u * u, axis=0)
    bad = int(np.count_nonzero(~np.isfinite(r2)))
    maxsq = float(np.max(np.where(np.isfinite(r2), r2, 0.0)))
    lap = np.zeros_like(u)
    for ax, (c, per) in enumerate(zip(inv_h2, periodic)):
        lap += c * _second(u, ax + 1, per, order)
    acc[...] = lap - nonlin * (r2 - 1.0)[None] * u
    for ax, per in enumerate(periodic):
        if not per:
            idx = [slice(None)] * u.ndim
            idx[ax + 1] = 0
            acc[tuple(idx)] = 0.0
            idx[ax + 1] = -1
            acc[tuple(idx)] = 0.0
    return maxsq, bad


def acceleration_2d(u, acc, inv_hx2, inv_hy2, nonlin, periodic_x, periodic_y, order, num_threads,
                    kick=None, kick_dt=0.0):
    out = _acceleration(u, acc, (inv_hx2, inv_hy2), nonlin, (periodic_x, periodic_y), order)
    if kick is not None:
        kick += kick_dt * acc
    return out


def acceleration_3d(u, acc, inv_hx2, inv_hy2, inv_hz2, nonlin,
                    periodic_x, periodic_y, periodic_z, num_threads):
    return _acceleration(u, acc, (inv_hx2, inv_hy2, inv_hz2), nonlin,
                         (periodic_x, periodic_y, periodic_z), 2)


def _energy(u, ut, h, pot, periodic):
    r2 = np.sum(u * u, axis=0)
    total = 0.5 * np.sum(ut * ut) + pot * 0.25 * np.sum((r2 - 1.0) ** 2)
    for ax, (step, per) in enumerate(zip(h, periodic)):
        if per:
            d = (np.roll(u, -1, ax + 1) - u) / step
        else:
            d = np.diff(u, axis=ax + 1) / step
        total += 0.5 * np.sum(d * d)
    return float(total) * float(np.prod(h))


def energy_2d(u, ut, hx, hy, pot, periodic_x, periodic_y, num_threads):
    return _energy(u, ut, (hx, hy), pot, (periodic_x, periodic_y))


def energy_3d(u, ut, hx, hy, hz, pot, periodic_x, periodic_y, periodic_z, num_threads):
    return _energy(u, ut, (hx, hy, hz), pot, (periodic_x, periodic_y, periodic_z))


def drift(u, ut, acc, half_dt, dt, num_threads):
    ut += half_dt * acc
    u += dt * ut

# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled stencil kernels for the leapfrog solver.

Only one- and two-component fields are supported.

Arrays are component-first and C-contiguous: ``u[c, i, j]`` in 2-D and
``u[c, i, j, l]`` in 3-D. Non-periodic axes hold their first and last node
fixed (acceleration zero there).
"""
import numpy as np
from cython.parallel cimport prange


cdef inline Py_ssize_t _wrap(Py_ssize_t i, Py_ssize_t n) noexcept nogil:
    if i < 0:
        return i + n
    if i >= n:
        return i - n
    return i


cdef inline double _d2(const double *p, Py_ssize_t idx, Py_ssize_t n, Py_ssize_t stride,
                       bint periodic, int order) noexcept nogil:
    # second difference along one axis at position idx, without 1/h^2
    cdef double center = p[0]
    cdef Py_ssize_t m1, p1, m2, p2
    if periodic:
        m1 = (_wrap(idx - 1, n) - idx) * stride
        p1 = (_wrap(idx + 1, n) - idx) * stride
    else:
        m1 = -stride
        p1 = stride
    if order == 4 and (periodic or (idx >= 2 and idx <= n - 3)):
        m2 = (_wrap(idx - 2, n) - idx) * stride
        p2 = (_wrap(idx + 2, n) - idx) * stride
        return (-p[m2] + 16.0 * p[m1] - 30.0 * center + 16.0 * p[p1] - p[p2]) / 12.0
    return p[m1] - 2.0 * center + p[p1]


def acceleration_2d(double[:, :, ::1] u, double[:, :, ::1] acc,
                    double inv_hx2, double inv_hy2, double nonlin,
                    bint periodic_x, bint periodic_y, int order, int num_threads,
                    double[:, :, ::1] kick=None, double kick_dt=0.0):
    """acc = lap_h u - nonlin (|u|^2 - 1) u; returns (max |u|^2, non-finite count).

    When ``kick`` is given it is also updated in place: kick += kick_dt * acc.
    """
    cdef Py_ssize_t k = u.shape[0], nx = u.shape[1], ny = u.shape[2]
    cdef Py_ssize_t plane = nx * ny
    cdef Py_ssize_t i, j, c, im, ip, base
    cdef double r2, v, lap, center, rmax, nbad
    cdef double *U = &u[0, 0, 0]
    cdef double *A = &acc[0, 0, 0]
    cdef double *K = NULL
    cdef double *row
    cdef double *rowm
    cdef double *rowp
    cdef bint do_kick = kick is not None
    cdef double[::1] rowmax = np.zeros(nx)
    cdef double[::1] rowbad = np.zeros(nx)
    if do_kick:
        K = &kick[0, 0, 0]
    for i in prange(nx, nogil=True, num_threads=num_threads, schedule="static"):
        im = _wrap(i - 1, nx)
        ip = _wrap(i + 1, nx)
        rmax = 0.0
        nbad = 0.0
        for j in range(ny):
            base = i * ny + j
            r2 = 0.0
            for c in range(k):
                v = U[c * plane + base]
                r2 = r2 + v * v
            if r2 != r2 or r2 > 1e300:
                nbad = nbad + 1.0
            elif r2 > rmax:
                rmax = r2
        rowmax[i] = rmax
        rowbad[i] = nbad
        if not periodic_x and (i == 0 or i == nx - 1):
            for c in range(k):
                for j in range(ny):
                    A[c * plane + i * ny + j] = 0.0
            continue
        for c in range(k):
            row = U + c * plane + i * ny
            rowm = U + c * plane + im * ny
            rowp = U + c * plane + ip * ny
            for j in range(ny):
                base = i * ny + j
                if k == 1:
                    r2 = row[j] * row[j]
                else:
                    r2 = U[base] * U[base] + U[plane + base] * U[plane + base]
                if order == 2 and j > 0 and j < ny - 1:
                    center = 2.0 * row[j]
                    lap = inv_hx2 * (rowm[j] - center + rowp[j]) \
                        + inv_hy2 * (row[j - 1] - center + row[j + 1])
                elif not periodic_y and (j == 0 or j == ny - 1):
                    A[c * plane + base] = 0.0
                    continue
                else:
                    lap = inv_hx2 * _d2(row + j, i, nx, ny, periodic_x, order) \
                        + inv_hy2 * _d2(row + j, j, ny, 1, periodic_y, order)
                A[c * plane + base] = lap - nonlin * (r2 - 1.0) * row[j]
        if do_kick:
            for c in range(k):
                for j in range(ny):
                    K[c * plane + i * ny + j] += kick_dt * A[c * plane + i * ny + j]
    return float(np.max(rowmax)), int(np.sum(rowbad))


def drift(double[::1] u, double[::1] ut, double[::1] acc, double half_dt, double dt,
          int num_threads):
    """Fused half kick and drift on flattened arrays: ut += half_dt acc; u += dt ut."""
    cdef Py_ssize_t n = u.shape[0], i
    for i in prange(n, nogil=True, num_threads=num_threads, schedule="static"):
        ut[i] = ut[i] + half_dt * acc[i]
        u[i] = u[i] + dt * ut[i]


def acceleration_3d(double[:, :, :, ::1] u, double[:, :, :, ::1] acc,
                    double inv_hx2, double inv_hy2, double inv_hz2, double nonlin,
                    bint periodic_x, bint periodic_y, bint periodic_z, int num_threads):
    """Second-order 3-D variant of :func:`acceleration_2d`."""
    cdef Py_ssize_t k = u.shape[0], nx = u.shape[1], ny = u.shape[2], nz = u.shape[3]
    cdef Py_ssize_t plane = nx * ny * nz
    cdef Py_ssize_t i, j, l, c, base
    cdef double r2, v, lap, rmax, nbad
    cdef double *U = &u[0, 0, 0, 0]
    cdef double *A = &acc[0, 0, 0, 0]
    cdef const double *p
    cdef double[::1] rowmax = np.zeros(nx)
    cdef double[::1] rowbad = np.zeros(nx)
    for i in prange(nx, nogil=True, num_threads=num_threads, schedule="static"):
        rmax = 0.0
        nbad = 0.0
        for j in range(ny):
            for l in range(nz):
                base = (i * ny + j) * nz + l
                r2 = 0.0
                for c in range(k):
                    v = U[c * plane + base]
                    r2 = r2 + v * v
                if r2 != r2 or r2 > 1e300:
                    nbad = nbad + 1.0
                elif r2 > rmax:
                    rmax = r2
                if (not periodic_x and (i == 0 or i == nx - 1)) or \
                   (not periodic_y and (j == 0 or j == ny - 1)) or \
                   (not periodic_z and (l == 0 or l == nz - 1)):
                    for c in range(k):
                        A[c * plane + base] = 0.0
                    continue
                for c in range(k):
                    p = U + c * plane + base
                    lap = inv_hx2 * _d2(p, i, nx, ny * nz, periodic_x, 2) \
                        + inv_hy2 * _d2(p, j, ny, nz, periodic_y, 2) \
                        + inv_hz2 * _d2(p, l, nz, 1, periodic_z, 2)
                    A[c * plane + base] = lap - nonlin * (r2 - 1.0) * p[0]
        rowmax[i] = rmax
        rowbad[i] = nbad
    return float(np.max(rowmax)), int(np.sum(rowbad))


def energy_2d(double[:, :, ::1] u, double[:, :, ::1] ut,
              double hx, double hy, double pot, bint periodic_x, bint periodic_y,
              int num_threads):
    """Grid sum of the scheme-consistent energy density times the cell area.

    Each forward edge difference is counted once, so the gradient part is the
    quadratic form of the discrete Laplacian used by the stepper.
    """
    cdef Py_ssize_t k = u.shape[0], nx = u.shape[1], ny = u.shape[2]
    cdef Py_ssize_t plane = nx * ny
    cdef Py_ssize_t i, j, c, ip, jp, base
    cdef double r2, d, grad, acc_row, v
    cdef double inv_hx = 1.0 / hx, inv_hy = 1.0 / hy
    cdef double *U = &u[0, 0, 0]
    cdef double *V = &ut[0, 0, 0]
    cdef double[::1] rowsum = np.zeros(nx)
    for i in prange(nx, nogil=True, num_threads=num_threads, schedule="static"):
        ip = _wrap(i + 1, nx)
        acc_row = 0.0
        for j in range(ny):
            jp = _wrap(j + 1, ny)
            base = i * ny + j
            r2 = 0.0
            grad = 0.0
            for c in range(k):
                v = U[c * plane + base]
                r2 = r2 + v * v
                acc_row = acc_row + 0.5 * V[c * plane + base] * V[c * plane + base]
                if periodic_x or i < nx - 1:
                    d = (U[c * plane + ip * ny + j] - v) * inv_hx
                    grad = grad + d * d
                if periodic_y or j < ny - 1:
                    d = (U[c * plane + i * ny + jp] - v) * inv_hy
                    grad = grad + d * d
            acc_row = acc_row + 0.5 * grad + pot * 0.25 * (r2 - 1.0) * (r2 - 1.0)
        rowsum[i] = acc_row
    return float(np.sum(rowsum)) * hx * hy


def energy_3d(double[:, :, :, ::1] u, double[:, :, :, ::1] ut,
              double hx, double hy, double hz, double pot,
              bint periodic_x, bint periodic_y, bint periodic_z, int num_threads):
    cdef Py_ssize_t k = u.shape[0], nx = u.shape[1], ny = u.shape[2], nz = u.shape[3]
    cdef Py_ssize_t plane = nx * ny * nz
    cdef Py_ssize_t i, j, l, c, ip, jp, lp, base
    cdef double r2, d, grad, acc_row, v
    cdef double *U = &u[0, 0, 0, 0]
    cdef double *V = &ut[0, 0, 0, 0]
    cdef double[::1] rowsum = np.zeros(nx)
    for i in prange(nx, nogil=True, num_threads=num_threads, schedule="static"):
        ip = _wrap(i + 1, nx)
        acc_row = 0.0
        for j in range(ny):
            jp = _wrap(j + 1, ny)
            for l in range(nz):
                lp = _wrap(l + 1, nz)
                base = (i * ny + j) * nz + l
                r2 = 0.0
                grad = 0.0
                for c in range(k):
                    v = U[c * plane + base]
                    r2 = r2 + v * v
                    acc_row = acc_row + 0.5 * V[c * plane + base] * V[c * plane + base]
                    if periodic_x or i < nx - 1:
                        d = (U[c * plane + (ip * ny + j) * nz + l] - v) / hx
                        grad = grad + d * d
                    if periodic_y or j < ny - 1:
                        d = (U[c * plane + (i * ny + jp) * nz + l] - v) / hy
                        grad = grad + d * d
                    if periodic_z or l < nz - 1:
                        d = (U[c * plane + (i * ny + j) * nz + lp] - v) / hz
                        grad = grad + d * d
                acc_row = acc_row + 0.5 * grad + pot * 0.25 * (r2 - 1.0) * (r2 - 1.0)
        rowsum[i] = acc_row
    return float(np.sum(rowsum)) * hx * hy * hz

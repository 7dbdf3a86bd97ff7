"""Backend selection for the solver's hot loops.

The compiled extension is used when it imports; setting ``DEFECTLAB_PURE=1``
forces the numpy fallback (used by the benchmark and the parity tests).
"""
import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if not os.environ.get("DEFECTLAB_PURE"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None
    if _compiled is not None:
        _impl = _compiled
        BACKEND = "cython"


def backend_module(name=None):
    """Return the kernel module for ``name`` ('cython', 'python' or None for the default)."""
    if name is None:
        return _impl
    if name == "python":
        return _kernels_py
    if name == "cython":
        from . import _kernels
        return _kernels
    raise ValueError(f"unknown kernel backend {name!r}")


def acceleration(u, acc, h, nonlin, periodic, order=2, num_threads=1, module=None,
                 kick=None, kick_dt=0.0):
    """Fill ``acc`` with lap_h u - nonlin (|u|^2-1) u; return (max |u|^2, non-finite count).

    If ``kick`` is given, ``kick += kick_dt * acc`` is applied afterwards.
    """
    mod = module or _impl
    inv_h2 = [1.0 / (s * s) for s in h]
    if u.ndim == 3:
        return mod.acceleration_2d(u, acc, inv_h2[0], inv_h2[1], nonlin,
                                   bool(periodic[0]), bool(periodic[1]), int(order), num_threads,
                                   kick, kick_dt)
    if u.ndim == 4:
        if order != 2:
            raise ValueError("3-D grids support only the second-order Laplacian")
        out = mod.acceleration_3d(u, acc, inv_h2[0], inv_h2[1], inv_h2[2], nonlin,
                                  bool(periodic[0]), bool(periodic[1]), bool(periodic[2]),
                                  num_threads)
        if kick is not None:
            kick += kick_dt * acc
        return out
    raise ValueError(f"unsupported field rank {u.ndim}")


def energy(u, ut, h, pot, periodic, num_threads=1, module=None):
    mod = module or _impl
    if u.ndim == 3:
        return mod.energy_2d(u, ut, h[0], h[1], pot, bool(periodic[0]), bool(periodic[1]),
                             num_threads)
    if u.ndim == 4:
        return mod.energy_3d(u, ut, h[0], h[1], h[2], pot, bool(periodic[0]),
                             bool(periodic[1]), bool(periodic[2]), num_threads)
    raise ValueError(f"unsupported field rank {u.ndim}")


def drift(u, ut, acc, half_dt, dt, num_threads=1, module=None):
    """In place: ut += half_dt * acc, then u += dt * ut."""
    mod = module or _impl
    mod.drift(u.reshape(-1), ut.reshape(-1), acc.reshape(-1), half_dt, dt, num_threads)

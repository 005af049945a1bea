"""Hot loops of the registration path, compiled when available.

The Cython extension ``_ckernels`` is used if it was built and imports;
otherwise (or with ``RADARLOC_PURE_PYTHON=1``) the NumPy module ``_pykernels``
is used. Call :func:`set_backend` to switch at run time.
"""
import os
from contextlib import contextmanager

import numpy as np

from . import _pykernels as python

try:
    if os.environ.get("RADARLOC_PURE_PYTHON") == "1":
        raise ImportError("pure-Python kernels forced by RADARLOC_PURE_PYTHON")
    from . import _ckernels as compiled
except ImportError:
    compiled = None

_BACKENDS = {"python": python}
if compiled is not None:
    _BACKENDS["cython"] = compiled

active = compiled if compiled is not None else python
BACKEND = "cython" if compiled is not None else "python"


def available_backends() -> list[str]:
    return list(_BACKENDS)


def set_backend(name: str) -> None:
    global active, BACKEND
    if name not in _BACKENDS:
        raise ValueError(f"kernel backend {name!r} not available ({available_backends()})")
    active = _BACKENDS[name]
    BACKEND = name


@contextmanager
def backend(name: str):
    previous = BACKEND
    set_backend(name)
    try:
        yield _BACKENDS[name]
    finally:
        set_backend(previous)


def rotate_nearest(src, a0, a1, m0, m1, b0, b1, angle):
    """``out[j] = src[round(R(-angle) (j - b)) + a]`` on an ``(m0, m1)`` lattice; zero outside ``src``."""
    dtype = np.complex128 if np.iscomplexobj(src) else np.float64
    src = np.ascontiguousarray(src, dtype=dtype)
    return active.rotate_nearest(src, int(a0), int(a1), int(m0), int(m1), int(b0), int(b1), float(angle))


def rotate_half_spectrum(half, n, angle):
    half = np.ascontiguousarray(half, dtype=np.complex128)
    return active.rotate_half_spectrum(half, int(n), float(angle))


def half_spectrum_source_index(n, angle):
    """Flat gather indices into ``[half, conj(half), 0]`` that rotate a half spectrum."""
    return active.half_spectrum_source_index(int(n), float(angle))


def brute_force_volume(dmap, dbatch, am0, am1, ab0, ab1, angles, h):
    dmap = np.ascontiguousarray(dmap, dtype=np.float64)
    dbatch = np.ascontiguousarray(dbatch, dtype=np.float64)
    angles = np.ascontiguousarray(angles, dtype=np.float64)
    return active.brute_force_volume(
        dmap, dbatch, int(am0), int(am1), int(ab0), int(ab1), angles, int(h)
    )

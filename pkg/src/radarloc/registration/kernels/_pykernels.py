"""NumPy implementations of the registration kernels (no compiled code).

Same signatures and results as ``_ckernels``; lookups are computed with the
identical operation order so nearest-grid-point decisions agree exactly.
"""
import math

import numpy as np


def _rnd(v):
    return (np.sign(v) * np.floor(np.abs(v) + 0.5)).astype(np.int64)


def rotate_nearest(src, a0, a1, m0, m1, b0, b1, angle):
    c, s = math.cos(angle), math.sin(angle)
    src = np.asarray(src)
    z0 = (np.arange(m0) - b0).astype(np.float64)[:, None]
    z1 = (np.arange(m1) - b1).astype(np.float64)[None, :]
    i0 = _rnd(c * z0 + s * z1) + a0
    i1 = _rnd(-s * z0 + c * z1) + a1
    ok = (i0 >= 0) & (i0 < src.shape[0]) & (i1 >= 0) & (i1 < src.shape[1])
    out = np.zeros((m0, m1), dtype=src.dtype)
    out[ok] = src[i0[ok], i1[ok]]
    return out


def rotate_half_spectrum(half, n, angle):
    c, s = math.cos(angle), math.sin(angle)
    hn = n // 2
    nh = half.shape[1]
    j0 = np.arange(n)
    k0 = np.where(j0 <= hn, j0, j0 - n).astype(np.float64)[:, None]
    k1 = np.arange(nh).astype(np.float64)[None, :]
    i0 = _rnd(c * k0 + s * k1)
    i1 = _rnd(-s * k0 + c * k1)
    ok = (np.abs(i0) <= hn) & (np.abs(i1) <= hn)
    out = np.zeros((n, nh), dtype=np.complex128)
    pos = ok & (i1 >= 0)
    neg = ok & (i1 < 0)
    out[pos] = half[i0[pos] % n, i1[pos]]
    out[neg] = np.conj(half[(-i0[neg]) % n, -i1[neg]])
    return out


def half_spectrum_source_index(n, angle):
    c, s = math.cos(angle), math.sin(angle)
    hn = n // 2
    nh = hn + 1
    L = n * nh
    j0 = np.arange(n)
    k0 = np.where(j0 <= hn, j0, j0 - n).astype(np.float64)[:, None]
    k1 = np.arange(nh).astype(np.float64)[None, :]
    i0 = _rnd(c * k0 + s * k1)
    i1 = _rnd(-s * k0 + c * k1)
    ok = (np.abs(i0) <= hn) & (np.abs(i1) <= hn)
    idx = np.full((n, nh), 2 * L, dtype=np.int64)
    pos = ok & (i1 >= 0)
    neg = ok & (i1 < 0)
    idx[pos] = (i0[pos] % n) * nh + i1[pos]
    idx[neg] = L + ((-i0[neg]) % n) * nh - i1[neg]
    return idx


def brute_force_volume(dmap, dbatch, am0, am1, ab0, ab1, angles, h):
    dmap = np.asarray(dmap, dtype=np.float64)
    dbatch = np.asarray(dbatch, dtype=np.float64)
    n0, n1 = dmap.shape
    k0, k1 = dbatch.shape
    x0 = np.arange(n0)[:, None]
    x1 = np.arange(n1)[None, :]
    vol = np.zeros((len(angles), 2 * h + 1, 2 * h + 1))
    for r, ang in enumerate(angles):
        c, s = math.cos(ang), math.sin(ang)
        for p in range(-h, h + 1):
            z0 = (x0 - am0 - p).astype(np.float64)
            for q in range(-h, h + 1):
                z1 = (x1 - am1 - q).astype(np.float64)
                i0 = _rnd(c * z0 + s * z1) + ab0
                i1 = _rnd(-s * z0 + c * z1) + ab1
                ok = (i0 >= 0) & (i0 < k0) & (i1 >= 0) & (i1 < k1)
                vol[r, p + h, q + h] = np.sum(
                    np.broadcast_to(dmap, ok.shape)[ok] * dbatch[i0[ok], i1[ok]]
                )
    return vol

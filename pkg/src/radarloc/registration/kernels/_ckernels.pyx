# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled registration kernels.

Nearest-grid-point lookups use ``sign(v) * floor(|v| + 0.5)`` and evaluate the
rotation as ``c*z0 + s*z1`` / ``-s*z0 + c*z1`` in that order, matching the
NumPy fallback bit for bit (the extension is built without FP contraction).
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport floor, fabs, cos, sin

cnp.import_array()

ctypedef fused real_or_complex:
    double
    double complex


cdef inline long rnd(double v) nogil:
    if v >= 0:
        return <long>floor(v + 0.5)
    return -<long>floor(-v + 0.5)


def rotate_nearest(real_or_complex[:, ::1] src, long a0, long a1,
                   long m0, long m1, long b0, long b1, double angle):
    """out[j] = src[round(R(-angle) (j - b)) + a], zero outside ``src``."""
    cdef double c = cos(angle), s = sin(angle)
    cdef long n0 = src.shape[0], n1 = src.shape[1]
    cdef long j0, j1, i0, i1
    cdef double z0, z1
    dtype = np.float64 if real_or_complex is double else np.complex128
    out_arr = np.zeros((m0, m1), dtype=dtype)
    cdef real_or_complex[:, ::1] out = out_arr
    with nogil:
        for j0 in range(m0):
            z0 = <double>(j0 - b0)
            for j1 in range(m1):
                z1 = <double>(j1 - b1)
                i0 = rnd(c * z0 + s * z1) + a0
                i1 = rnd(-s * z0 + c * z1) + a1
                if 0 <= i0 < n0 and 0 <= i1 < n1:
                    out[j0, j1] = src[i0, i1]
    return out_arr


def rotate_half_spectrum(double complex[:, ::1] half, long n, double angle):
    """Nearest-neighbour rotation of a Hermitian spectrum stored in rfft2 layout.

    ``half`` is ``(n, n // 2 + 1)`` for odd ``n``. Output bin ``k`` takes input
    bin ``round(R(-angle) k)`` with centred frequency indices; bins beyond the
    Nyquist square are zero. Negative-``k1`` sources are read through
    conjugate symmetry.
    """
    cdef double c = cos(angle), s = sin(angle)
    cdef long hn = n // 2
    cdef long nh = half.shape[1]
    cdef long j0, j1, k0, i0, i1
    cdef double z0, z1
    out_arr = np.zeros((n, nh), dtype=np.complex128)
    cdef double complex[:, ::1] out = out_arr
    cdef double complex v
    with nogil:
        for j0 in range(n):
            k0 = j0 if j0 <= hn else j0 - n
            z0 = <double>k0
            for j1 in range(nh):
                z1 = <double>j1
                i0 = rnd(c * z0 + s * z1)
                i1 = rnd(-s * z0 + c * z1)
                if i0 > hn or i0 < -hn or i1 > hn or i1 < -hn:
                    continue
                if i1 >= 0:
                    out[j0, j1] = half[(i0 + n) % n, i1]
                else:
                    v = half[(n - i0) % n, -i1]
                    out[j0, j1] = v.conjugate()
    return out_arr


def half_spectrum_source_index(long n, double angle):
    """Gather indices equivalent to ``rotate_half_spectrum``.

    Index ``i < L`` reads ``half.ravel()[i]``; ``L <= i < 2L`` reads the
    conjugate of ``half.ravel()[i - L]``; ``2L`` reads zero, where
    ``L = n * (n // 2 + 1)``.
    """
    cdef double c = cos(angle), s = sin(angle)
    cdef long hn = n // 2
    cdef long nh = hn + 1
    cdef long L = n * nh
    cdef long j0, j1, k0, i0, i1
    cdef double z0, z1
    idx_arr = np.full((n, nh), 2 * L, dtype=np.int64)
    cdef long long[:, ::1] idx = idx_arr
    with nogil:
        for j0 in range(n):
            k0 = j0 if j0 <= hn else j0 - n
            z0 = <double>k0
            for j1 in range(nh):
                z1 = <double>j1
                i0 = rnd(c * z0 + s * z1)
                i1 = rnd(-s * z0 + c * z1)
                if i0 > hn or i0 < -hn or i1 > hn or i1 < -hn:
                    continue
                if i1 >= 0:
                    idx[j0, j1] = ((i0 + n) % n) * nh + i1
                else:
                    idx[j0, j1] = L + ((n - i0) % n) * nh - i1
    return idx_arr


def brute_force_volume(double[:, ::1] dmap, double[:, ::1] dbatch,
                       long am0, long am1, long ab0, long ab1,
                       double[::1] angles, long h):
    """Exhaustive discrete correlation over rotations and shifts.

    ``vol[r, p + h, q + h] = sum_x dmap[x] * dbatch[round(R(-angles[r]) (x - am - (p, q))) + ab]``
    with ``x`` running over every map cell.
    """
    cdef long nr = angles.shape[0]
    cdef long n0 = dmap.shape[0], n1 = dmap.shape[1]
    cdef long k0 = dbatch.shape[0], k1 = dbatch.shape[1]
    cdef long r, p, q, x0, x1, i0, i1
    cdef double c, s, z0, z1, acc
    vol_arr = np.zeros((nr, 2 * h + 1, 2 * h + 1), dtype=np.float64)
    cdef double[:, :, ::1] vol = vol_arr
    with nogil:
        for r in range(nr):
            c = cos(angles[r])
            s = sin(angles[r])
            for p in range(-h, h + 1):
                for q in range(-h, h + 1):
                    acc = 0.0
                    for x0 in range(n0):
                        z0 = <double>(x0 - am0 - p)
                        for x1 in range(n1):
                            z1 = <double>(x1 - am1 - q)
                            i0 = rnd(c * z0 + s * z1) + ab0
                            i1 = rnd(-s * z0 + c * z1) + ab1
                            if 0 <= i0 < k0 and 0 <= i1 < k1:
                                acc = acc + dmap[x0, x1] * dbatch[i0, i1]
                    vol[r, p + h, q + h] = acc
    return vol_arr

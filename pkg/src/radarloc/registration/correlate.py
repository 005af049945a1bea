"""Discrete correlation of discretised PHDs over rotations and translations.

Every path here scores the same quantity (see ``search.CONVENTIONS``)::

    R[i, p, q] = sum_x Dm(x) * Db(round(Rot(-i*dphi) (x - (p, q))))

with ``x`` in cells relative to each grid's anchor cell.

* :func:`brute_force_volume` evaluates it literally (the oracle).
* :func:`correlation_volume` with ``rotation="spatial"`` rotates the batch
  once per step on a lattice padded by ``n_l/2`` and correlates by FFT. It
  reproduces the oracle exactly, up to floating-point summation order.
* ``rotation="spectral"`` transforms the batch once and rotates its spectrum
  (nearest neighbour) for each step instead. The map spectrum is computed
  once in both modes.
* :func:`naive_volume` recomputes both padded FFTs for every rotation with
  ``n/2`` padding per side: the baseline cost model.
"""
from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
import scipy.fft as sfft

from ..geometry import RigidOffset, round_half_away
from . import kernels
from .search import CorrelationVolume, SearchSpec


def _is_smooth(n: int, primes=(3, 5, 7, 11)) -> bool:
    for p in primes:
        while n % p == 0:
            n //= p
    return n == 1


def efficient_odd_size(n: int) -> int:
    """Smallest odd length >= ``n`` with only small prime factors."""
    k = max(int(n), 1)
    k += (k % 2 == 0)
    while not _is_smooth(k):
        k += 2
    return k


def _window_index(h: int, n: int) -> np.ndarray:
    """Array positions of circular shifts ``-h .. h`` in a length-``n`` transform."""
    return np.arange(-h, h + 1) % n


def _place(arr: np.ndarray, anchor, size) -> np.ndarray:
    """Zero array of ``size`` with ``arr`` written so its anchor cell lands on index (0, 0)."""
    out = np.zeros(size)
    r0 = (np.arange(arr.shape[0]) - anchor[0]) % size[0]
    r1 = (np.arange(arr.shape[1]) - anchor[1]) % size[1]
    out[np.ix_(r0, r1)] = arr
    return out


def _pruned_window(spectrum_half: np.ndarray, n: tuple[int, int], h: int) -> np.ndarray:
    """Real inverse 2-D FFT evaluated only at circular shifts ``-h .. h`` on each axis."""
    rows = sfft.ifft(spectrum_half, axis=0)[_window_index(h, n[0])]
    full = sfft.irfft(rows, n=n[1], axis=1)
    return full[:, _window_index(h, n[1])]


@lru_cache(maxsize=128)
def _rotation_gather(n: int, angle: float, backend: str) -> np.ndarray:
    idx = kernels.half_spectrum_source_index(n, angle)
    return idx.astype(np.int32) if idx.max() < 2**31 else idx


def _rotate_half(fb_ext: np.ndarray, n: int, angle: float) -> np.ndarray:
    # index maps depend only on (n, angle), so repeated alignments reuse them
    return fb_ext[_rotation_gather(n, float(angle), kernels.BACKEND)]


def _check_pair(map_w, batch_w):
    map_w = np.asarray(map_w, dtype=np.float64)
    batch_w = np.asarray(batch_w, dtype=np.float64)
    if map_w.ndim != 2 or map_w.shape != batch_w.shape:
        raise ValueError(f"grid shapes differ: {map_w.shape} vs {batch_w.shape}")
    if map_w.size == 0:
        raise ValueError("empty grids")
    return map_w, batch_w


def default_anchor(shape) -> tuple[int, int]:
    return (shape[0] // 2, shape[1] // 2)


def fft_correlate_translations(map_w, batch_w, n_l: int, padding: str = "minimal", fft_size=None):
    """Linear cross-correlation over shifts ``-n_l/2 .. n_l/2`` by FFT.

    Returns ``S[p + h, q + h] = sum_x map[x] * batch[x - (p, q)]``. With
    ``padding="minimal"`` each array is zero-padded by ``n_l/2`` per side
    (length ``n + n_l``, possibly rounded up to an efficient FFT length);
    ``"full"`` pads by ``n/2`` per side (length ``2n``).
    """
    map_w, batch_w = _check_pair(map_w, batch_w)
    if n_l % 2:
        raise ValueError("n_l must be even")
    h = n_l // 2
    n0, n1 = map_w.shape
    if n_l > max(n0, n1):
        raise ValueError("translation window wider than the grids")
    if fft_size is None:
        if padding == "minimal":
            size = (sfft.next_fast_len(n0 + n_l, real=True), sfft.next_fast_len(n1 + n_l, real=True))
        elif padding == "full":
            size = (2 * n0, 2 * n1)
        else:
            raise ValueError(f"unknown padding {padding!r}")
    else:
        size = (int(fft_size), int(fft_size)) if np.isscalar(fft_size) else tuple(fft_size)
        if size[0] < n0 + n_l or size[1] < n1 + n_l:
            raise ValueError("fft_size smaller than n + n_l would alias")
    fm = sfft.rfft2(_place(map_w, (0, 0), size))
    fb = sfft.rfft2(_place(batch_w, (0, 0), size))
    return _pruned_window(fm * np.conj(fb), size, h)


def rotate_spectrum(spectrum: np.ndarray, dphi: float) -> np.ndarray:
    """Nearest-neighbour rotation of a centred (DC at ``n // 2``) square spectrum.

    Output bin ``k`` takes the input bin nearest to ``Rot(-dphi) k``; bins
    whose source falls outside the array are zero.
    """
    spectrum = np.asarray(spectrum)
    if spectrum.ndim != 2 or spectrum.shape[0] != spectrum.shape[1]:
        raise ValueError("spectrum must be square")
    n = spectrum.shape[0]
    c = n // 2
    return kernels.rotate_nearest(spectrum.astype(np.complex128), c, c, n, n, c, c, dphi)


def rotate_grid(arr, anchor, dphi, out_shape=None, out_anchor=None) -> np.ndarray:
    """Nearest-neighbour spatial rotation of a grid about its anchor cell."""
    arr = np.asarray(arr, dtype=np.float64)
    out_shape = arr.shape if out_shape is None else out_shape
    out_anchor = anchor if out_anchor is None else out_anchor
    return kernels.rotate_nearest(arr, anchor[0], anchor[1], out_shape[0], out_shape[1],
                                  out_anchor[0], out_anchor[1], dphi)


def brute_force_volume(map_w, batch_w, spec: SearchSpec, map_anchor=None, batch_anchor=None):
    """Exhaustive evaluation of the discrete correlation at every candidate offset."""
    map_w, batch_w = _check_pair(map_w, batch_w)
    am = default_anchor(map_w.shape) if map_anchor is None else map_anchor
    ab = default_anchor(batch_w.shape) if batch_anchor is None else batch_anchor
    scores = kernels.brute_force_volume(map_w, batch_w, am[0], am[1], ab[0], ab[1],
                                        spec.angles, spec.h)
    return CorrelationVolume(scores, spec)


def correlation_volume(
    map_w,
    batch_w,
    spec: SearchSpec,
    map_anchor=None,
    batch_anchor=None,
    rotation: str = "spectral",
    fft_size=None,
) -> CorrelationVolume:
    """FFT correlation volume over all rotation steps and shifts.

    The map is padded and transformed once. For ``rotation="spatial"`` the
    batch is rotated on the ``n + n_l`` lattice and transformed per step; for
    ``rotation="spectral"`` it is transformed once and its spectrum rotated
    per step, which needs an odd transform length.
    """
    map_w, batch_w = _check_pair(map_w, batch_w)
    am = default_anchor(map_w.shape) if map_anchor is None else tuple(map_anchor)
    ab = default_anchor(batch_w.shape) if batch_anchor is None else tuple(batch_anchor)
    h = spec.h
    n0, n1 = map_w.shape
    need = max(n0, n1) + spec.n_l
    if rotation == "spectral":
        n = efficient_odd_size(need) if fft_size is None else int(fft_size)
        if n % 2 == 0:
            raise ValueError("spectral rotation needs an odd FFT length")
    elif rotation == "spatial":
        n = sfft.next_fast_len(need, real=True) if fft_size is None else int(fft_size)
    else:
        raise ValueError(f"unknown rotation mode {rotation!r}")
    if n < need:
        raise ValueError(f"fft_size {n} < n + n_l = {need} would alias")
    size = (n, n)

    fm = sfft.rfft2(_place(map_w, am, size))
    scores = np.empty(spec.shape)
    if rotation == "spectral":
        fb = sfft.rfft2(_place(batch_w, ab, size))
        fb_ext = np.concatenate([fb.ravel(), np.conj(fb).ravel(), [0.0]])
        for k, ang in enumerate(spec.angles):
            rot = fb if ang == 0 else _rotate_half(fb_ext, n, ang)
            scores[k] = _pruned_window(fm * np.conj(rot), size, h)
    else:
        # padded lattice covering every x - s with x in the map grid and |s| <= h
        lat_shape = (n0 + 2 * h, n1 + 2 * h)
        lat_anchor = (am[0] + h, am[1] + h)
        for k, ang in enumerate(spec.angles):
            rb = rotate_grid(batch_w, ab, ang, lat_shape, lat_anchor)
            fb = sfft.rfft2(_place(rb, lat_anchor, size))
            scores[k] = _pruned_window(fm * np.conj(fb), size, h)
    return CorrelationVolume(scores, spec)


def naive_volume(map_w, batch_w, spec: SearchSpec, map_anchor=None, batch_anchor=None):
    """Baseline: per rotation, re-pad by ``n/2`` per side and redo all three FFTs."""
    map_w, batch_w = _check_pair(map_w, batch_w)
    am = default_anchor(map_w.shape) if map_anchor is None else tuple(map_anchor)
    ab = default_anchor(batch_w.shape) if batch_anchor is None else tuple(batch_anchor)
    h = spec.h
    n0, n1 = map_w.shape
    size = (2 * max(n0, n1), 2 * max(n0, n1))
    lat_shape = (n0 + 2 * h, n1 + 2 * h)
    lat_anchor = (am[0] + h, am[1] + h)
    scores = np.empty(spec.shape)
    for k, ang in enumerate(spec.angles):
        fm = sfft.rfft2(_place(map_w, am, size))
        rb = rotate_grid(batch_w, ab, ang, lat_shape, lat_anchor)
        fb = sfft.rfft2(_place(rb, lat_anchor, size))
        full = sfft.irfft2(fm * np.conj(fb), s=size)
        scores[k] = full[np.ix_(_window_index(h, size[0]), _window_index(h, size[1]))]
    return CorrelationVolume(scores, spec)


def compute_l2_distance(
    map_phd,
    batch_phd,
    theta: RigidOffset,
    spec: SearchSpec,
    circular: bool = False,
    map_anchor=None,
    batch_anchor=None,
) -> float:
    """Squared L2 distance between the map PHD and the batch PHD moved by ``theta``.

    ``sum_x (Dm(x) - Db(round(Rot(-dphi) (x - t))))^2 * delta_t^2``. In the
    linear case ``x`` runs over the map lattice widened by ``n_l/2`` cells per
    side, so the whole batch stays inside the sum for any admissible shift. In
    the circular case indices wrap on the (common) grid size.
    """
    map_phd, batch_phd = _check_pair(map_phd, batch_phd)
    am = default_anchor(map_phd.shape) if map_anchor is None else tuple(map_anchor)
    ab = default_anchor(batch_phd.shape) if batch_anchor is None else tuple(batch_anchor)
    s = round_half_away(np.array([theta.dx, theta.dy]) / spec.delta_t)
    cell_area = spec.delta_t**2
    c, sn = math.cos(theta.dphi), math.sin(theta.dphi)
    n0, n1 = map_phd.shape
    if circular:
        x0 = np.arange(n0)[:, None]
        x1 = np.arange(n1)[None, :]
        z0 = (x0 - am[0] - s[0]).astype(float)
        z1 = (x1 - am[1] - s[1]).astype(float)
        i0 = (round_half_away(c * z0 + sn * z1) + ab[0]) % n0
        i1 = (round_half_away(-sn * z0 + c * z1) + ab[1]) % n1
        diff = map_phd - batch_phd[i0, i1]
        return float(np.sum(diff**2) * cell_area)
    h = spec.h
    x0 = np.arange(-h, n0 + h)[:, None]
    x1 = np.arange(-h, n1 + h)[None, :]
    mp = np.zeros((n0 + 2 * h, n1 + 2 * h))
    mp[h:h + n0, h:h + n1] = map_phd
    z0 = (x0 - am[0] - s[0]).astype(float)
    z1 = (x1 - am[1] - s[1]).astype(float)
    i0 = round_half_away(c * z0 + sn * z1) + ab[0]
    i1 = round_half_away(-sn * z0 + c * z1) + ab[1]
    ok = (i0 >= 0) & (i0 < n0) & (i1 >= 0) & (i1 < n1)
    moved = np.zeros_like(mp)
    moved[ok] = batch_phd[i0[ok], i1[ok]]
    return float(np.sum((mp - moved) ** 2) * cell_area)

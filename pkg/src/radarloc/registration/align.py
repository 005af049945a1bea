"""Global 3-DoF alignment of a radar batch against a prior map."""
from __future__ import annotations

import time

import numpy as np
import scipy.fft as sfft

from ..batch import assemble_batch
from ..mapping import (
    InverseSensorModel,
    MapStore,
    OccupancyGrid,
    _apply_scan_inplace,
    anchored_grid,
    logit,
    query_region,
)
from .correlate import brute_force_volume, correlation_volume
from .search import AlignmentResult, SearchSpec


class AlignmentError(RuntimeError):
    pass


class NoMapCoverage(AlignmentError):
    """The map has no points in the window around the batch anchor."""


class NoBatchReturns(AlignmentError):
    """The batch has no returns left after gating."""


def correlation_weights(grid) -> np.ndarray:
    """Per-cell weights fed to the correlation.

    For an :class:`OccupancyGrid` this is the occupancy in excess of the
    prior. The prior is a positive constant under the pessimistic model, and a
    constant floor correlates against the other grid's mass inside the
    overlap, which shrinks as the shift grows and so biases the peak towards
    zero shift. Plain arrays are used as given.
    """
    if isinstance(grid, OccupancyGrid):
        return grid.excess_occupancy()
    return np.asarray(grid, dtype=np.float64)


def _weights_and_anchor(grid):
    w = correlation_weights(grid)
    if w.ndim != 2 or w.size == 0:
        raise ValueError("empty grid")
    if isinstance(grid, OccupancyGrid):
        try:
            return w, grid.anchor_index()
        except ValueError:
            pass
    return w, (w.shape[0] // 2, w.shape[1] // 2)


def _check_grids(map_grid, batch_grid):
    if isinstance(map_grid, OccupancyGrid) and isinstance(batch_grid, OccupancyGrid):
        if map_grid.cell_size != batch_grid.cell_size:
            raise ValueError("grids must share cell_size")
    wm, am = _weights_and_anchor(map_grid)
    wb, ab = _weights_and_anchor(batch_grid)
    if not np.any(wm) or not np.any(wb):
        raise ValueError("empty grid: no cell above the prior")
    return wm, am, wb, ab


def brute_force_align(map_grid, batch_grid, spec: SearchSpec, keep_volume: bool = True) -> AlignmentResult:
    """Exhaustive search over every (rotation, shift) of ``spec``.

    Grids are :class:`OccupancyGrid` (anchored at world (0, 0) when possible,
    else at the centre cell) or plain 2-D arrays anchored at the centre cell.
    """
    wm, am, wb, ab = _check_grids(map_grid, batch_grid)
    t0 = time.perf_counter()
    vol = brute_force_volume(wm, wb, spec, am, ab)
    return AlignmentResult.from_volume(vol, time.perf_counter() - t0, keep_volume)


def fft_align(
    map_grid, batch_grid, spec: SearchSpec, rotation: str = "spectral", keep_volume: bool = True, workers=None
) -> AlignmentResult:
    """FFT search over the same candidates as :func:`brute_force_align`."""
    wm, am, wb, ab = _check_grids(map_grid, batch_grid)
    t0 = time.perf_counter()
    with sfft.set_workers(workers or 1):
        vol = correlation_volume(wm, wb, spec, am, ab, rotation=rotation)
    return AlignmentResult.from_volume(vol, time.perf_counter() - t0, keep_volume)


def map_grid_from_points(points, half_extent: float, cell_size: float, model: InverseSensorModel) -> OccupancyGrid:
    """Anchored map grid where every stored point counts as one Type-A observation.

    The store keeps no scan membership, so a cell's evidence grows with the
    number of points that fell into it.
    """
    grid = anchored_grid(half_extent, cell_size, model.l0)
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if len(pts) == 0:
        return grid
    if model.near_radius == 0:
        idx = grid.cell_index(pts)
        idx = idx[grid.in_bounds(idx)]
        counts = np.zeros(grid.log_odds.shape)
        np.add.at(counts, (idx[:, 0], idx[:, 1]), 1.0)
        grid.log_odds += counts * (logit(model.p_occ_A) - model.l0)
    else:
        for p in pts:
            _apply_scan_inplace(grid, p[None, :], model)
    return grid


def batch_grid_from_groups(groups, half_extent: float, cell_size: float, model: InverseSensorModel) -> OccupancyGrid:
    """Anchored batch grid with one binary Bayes update per scan."""
    grid = anchored_grid(half_extent, cell_size, model.l0)
    for g in groups:
        _apply_scan_inplace(grid, g, model)
    return grid


def _map_window(map_points, center, half_extent):
    if isinstance(map_points, MapStore):
        return query_region(map_points, center, half_extent)
    pts = np.asarray(map_points, dtype=np.float64).reshape(-1, 2)
    keep = np.all(np.abs(pts - np.asarray(center)) <= half_extent, axis=1)
    return pts[keep]


def fast_global_align(
    map_points,
    batch_scans,
    odom_poses,
    spec: SearchSpec | None = None,
    model: InverseSensorModel | None = None,
    *,
    range_gate: float | None = 50.0,
    speed_gate: float | None = None,
    grid_half_extent: float | None = None,
    rotation: str = "spectral",
    keep_volume: bool = True,
    workers: int | None = None,
) -> AlignmentResult:
    """Align a batch of scans, placed by odometry, against map points.

    Both point sets are re-anchored on the final odometric position and
    rasterised on the same square grid (half-width ``range_gate`` plus the
    translation half-window unless ``grid_half_extent`` is given). The map
    spectrum is computed once; each rotation step costs one batch-spectrum
    rotation and one pruned inverse FFT. ``theta_hat`` is the correction that
    carries anchored odometry-frame coordinates onto the map.

    Raises :class:`NoBatchReturns` or :class:`NoMapCoverage` when either side
    has nothing to correlate.
    """
    spec = SearchSpec() if spec is None else spec
    model = InverseSensorModel() if model is None else model
    t0 = time.perf_counter()
    if len(batch_scans) == 0:
        raise NoBatchReturns("batch has no scans")
    groups = assemble_batch(batch_scans, odom_poses, range_gate=range_gate, speed_gate=speed_gate, grouped=True)
    if sum(len(g) for g in groups) == 0:
        raise NoBatchReturns("batch has no returns after gating")

    if grid_half_extent is None:
        base = range_gate if range_gate is not None else max(float(np.abs(np.concatenate(groups)).max()), 1.0)
        grid_half_extent = base + spec.h * spec.delta_t
    anchor = np.asarray(odom_poses[-1].position, dtype=np.float64)
    window = _map_window(map_points, anchor, grid_half_extent)
    if len(window) == 0:
        raise NoMapCoverage(f"no map points within {grid_half_extent:.1f} m of the batch anchor")

    map_grid = map_grid_from_points(window - anchor, grid_half_extent, spec.delta_t, model)
    batch_grid = batch_grid_from_groups(groups, grid_half_extent, spec.delta_t, model)
    wm, am = correlation_weights(map_grid), map_grid.anchor_index()
    wb, ab = correlation_weights(batch_grid), batch_grid.anchor_index()
    if not np.any(wb):
        raise NoBatchReturns("no batch return falls inside the grid")
    with sfft.set_workers(workers or 1):
        vol = correlation_volume(wm, wb, spec, am, ab, rotation=rotation)
    return AlignmentResult.from_volume(vol, time.perf_counter() - t0, keep_volume)

"""Occupancy-grid approximation of the reflector PHD.

Grids are indexed ``log_odds[p, q]`` with ``p`` along world x and ``q`` along
world y; cell ``(p, q)`` is centred at ``origin + (p, q) * cell_size``. A point
falls in the cell whose centre is nearest, ties rounded away from zero.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.spatial import cKDTree

from .geometry import Pose2D, as_points, round_half_away, transform_points
from .scene import RadarScan


def logit(p):
    return np.log(p / (1.0 - p))


def logistic(l):
    return 1.0 / (1.0 + np.exp(-l))


def update_cell(l_prev, p_inv, l0):
    """Binary Bayes filter step in log-odds form."""
    if np.any(np.asarray(p_inv) <= 0) or np.any(np.asarray(p_inv) >= 1):
        raise ValueError("inverse sensor probability must lie in (0, 1)")
    return logit(p_inv) - l0 + l_prev


@dataclass(frozen=True)
class InverseSensorModel:
    """Per-scan occupancy assigned to each cell type.

    The default is the pessimistic model: a return raises its cell to 0.2,
    everything else stays at the 0.1 prior.
    """

    prior_occ: float = 0.1
    p_occ_A: float = 0.2
    p_free_BC: float = 0.1
    near_radius: float = 0.0

    def __post_init__(self):
        if not 0 < self.prior_occ < 1:
            raise ValueError("prior_occ must lie in (0, 1)")
        if not self.prior_occ <= self.p_occ_A < 1:
            raise ValueError("p_occ_A must lie in [prior_occ, 1)")
        if not 0 < self.p_free_BC <= self.prior_occ:
            raise ValueError("p_free_BC must lie in (0, prior_occ]")
        if self.near_radius < 0:
            raise ValueError("near_radius must be >= 0")

    @property
    def l0(self) -> float:
        return float(logit(self.prior_occ))

    @property
    def is_pessimistic(self) -> bool:
        return self.p_free_BC == self.prior_occ


@dataclass
class OccupancyGrid:
    origin: tuple[float, float]
    cell_size: float
    log_odds: np.ndarray
    prior_log_odds: float = 0.0

    def __post_init__(self):
        if not self.cell_size > 0:
            raise ValueError("cell_size must be > 0")
        self.origin = (float(self.origin[0]), float(self.origin[1]))
        self.log_odds = np.asarray(self.log_odds, dtype=np.float64)
        if self.log_odds.ndim != 2:
            raise ValueError("log_odds must be 2-D")

    @classmethod
    def filled(cls, origin, cell_size, width, height, l0) -> "OccupancyGrid":
        return cls(origin, cell_size, np.full((width, height), float(l0)), float(l0))

    @property
    def width(self) -> int:
        return self.log_odds.shape[0]

    @property
    def height(self) -> int:
        return self.log_odds.shape[1]

    @property
    def cell_area(self) -> float:
        return self.cell_size**2

    def copy(self) -> "OccupancyGrid":
        return OccupancyGrid(self.origin, self.cell_size, self.log_odds.copy(), self.prior_log_odds)

    def occupancy(self) -> np.ndarray:
        return logistic(self.log_odds)

    def excess_occupancy(self) -> np.ndarray:
        """Occupancy above the prior; zero for cells no return has touched."""
        return self.occupancy() - logistic(self.prior_log_odds)

    def cell_index(self, points) -> np.ndarray:
        pts = as_points(points)
        rel = (pts - np.asarray(self.origin)) / self.cell_size
        return round_half_away(rel)

    def in_bounds(self, idx: np.ndarray) -> np.ndarray:
        return (idx[:, 0] >= 0) & (idx[:, 0] < self.width) & (idx[:, 1] >= 0) & (idx[:, 1] < self.height)

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        xs = self.origin[0] + self.cell_size * np.arange(self.width)
        ys = self.origin[1] + self.cell_size * np.arange(self.height)
        return xs, ys

    def anchor_index(self) -> tuple[int, int]:
        """Index of the cell centred on world (0, 0); must be a lattice point."""
        a = -np.asarray(self.origin) / self.cell_size
        ai = np.rint(a)
        if np.any(np.abs(a - ai) > 1e-6):
            raise ValueError("grid origin is not aligned with (0, 0)")
        return int(ai[0]), int(ai[1])


def anchored_grid(half_extent: float, cell_size: float, l0: float) -> OccupancyGrid:
    """Square ``(2c+1)``-cell grid whose centre cell sits on (0, 0)."""
    c = int(math.ceil(half_extent / cell_size - 1e-9))
    n = 2 * c + 1
    return OccupancyGrid.filled((-c * cell_size, -c * cell_size), cell_size, n, n, l0)


def _type_a_cells(grid: OccupancyGrid, points: np.ndarray, near_radius: float) -> np.ndarray:
    """Unique flat indices of cells in the vicinity of any return."""
    idx = grid.cell_index(points)
    if near_radius > 0 and len(idx):
        k = int(math.ceil(near_radius / grid.cell_size)) + 1
        off = np.arange(-k, k + 1)
        ox, oy = np.meshgrid(off, off, indexing="ij")
        ox, oy = ox.ravel(), oy.ravel()
        cand = idx[:, None, :] + np.stack((ox, oy), axis=-1)[None]
        centers = np.asarray(grid.origin) + cand * grid.cell_size
        d = np.hypot(centers[..., 0] - points[:, None, 0], centers[..., 1] - points[:, None, 1])
        near = d <= near_radius
        near |= (ox == 0)[None, :] & (oy == 0)[None, :]  # containing cell always counts
        idx = cand[near]
    idx = idx[grid.in_bounds(idx)] if len(idx) else idx.reshape(0, 2)
    flat = idx[:, 0] * grid.height + idx[:, 1]
    return np.unique(flat)


def _ray_cells(grid: OccupancyGrid, start, points: np.ndarray) -> np.ndarray:
    """Flat indices of cells crossed between ``start`` and each point (exclusive of the end)."""
    out = []
    step = 0.5 * grid.cell_size
    start = np.asarray(start, float)
    for p in points:
        length = np.hypot(*(p - start))
        n = int(length // step)
        if n == 0:
            continue
        t = np.arange(n) * (step / length)
        seg = start + t[:, None] * (p - start)
        idx = grid.cell_index(seg)
        idx = idx[grid.in_bounds(idx)]
        out.append(idx[:, 0] * grid.height + idx[:, 1])
    if not out:
        return np.zeros(0, dtype=np.int64)
    return np.unique(np.concatenate(out))


def _apply_scan_inplace(grid, points, model, sensor_origin=None, trace_free=False):
    points = as_points(points)
    if len(points) == 0:
        return
    hits = _type_a_cells(grid, points, model.near_radius)
    lo = grid.log_odds.reshape(-1)
    if trace_free and not model.is_pessimistic:
        if sensor_origin is None:
            raise ValueError("free-space tracing needs the sensor origin")
        free = np.setdiff1d(_ray_cells(grid, sensor_origin, points), hits, assume_unique=True)
        lo[free] = update_cell(lo[free], model.p_free_BC, model.l0)
    lo[hits] = update_cell(lo[hits], model.p_occ_A, model.l0)


def apply_scan(
    grid: OccupancyGrid,
    points,
    model: InverseSensorModel,
    sensor_origin=None,
    trace_free: bool = False,
) -> OccupancyGrid:
    """Return a copy of ``grid`` updated with one scan of world-frame returns.

    Cells within ``model.near_radius`` of a return (always including the cell
    containing it) take the Type-A update, at most once per scan. Under the
    pessimistic model every other cell keeps its value, so no ray tracing is
    done. With ``trace_free`` and a non-pessimistic model, cells crossed by the
    ray from ``sensor_origin`` to each return get the free-space update.
    Returns outside the grid are skipped.
    """
    out = grid.copy()
    _apply_scan_inplace(out, points, model, sensor_origin, trace_free)
    return out


def to_ogm(
    scan_groups: Sequence,
    cell_size: float,
    model: InverseSensorModel,
    extent: tuple[float, float, float, float],
    sensor_origins=None,
    trace_free: bool = False,
) -> OccupancyGrid:
    """Occupancy grid from per-scan groups of world-frame points.

    ``extent`` is ``(xmin, ymin, xmax, ymax)``; cell (0, 0) is centred on
    ``(xmin, ymin)`` and the grid spans every cell centre up to ``xmax, ymax``.
    Points outside are clipped away. Groups are applied in the given order,
    which callers keep chronological.
    """
    if not cell_size > 0:
        raise ValueError("cell_size must be > 0")
    xmin, ymin, xmax, ymax = extent
    width = int(math.floor((xmax - xmin) / cell_size + 1e-9)) + 1
    height = int(math.floor((ymax - ymin) / cell_size + 1e-9)) + 1
    grid = OccupancyGrid.filled((xmin, ymin), cell_size, width, height, model.l0)
    for k, pts in enumerate(scan_groups):
        origin = None if sensor_origins is None else sensor_origins[k]
        _apply_scan_inplace(grid, pts, model, origin, trace_free)
    return grid


def ogm_to_phd(grid: OccupancyGrid) -> np.ndarray:
    """Per-cell occupancy divided by cell area (reflectors per square metre)."""
    return grid.occupancy() / grid.cell_area


@dataclass
class MapStore:
    """World-frame map points behind a k-d tree."""

    points: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.points = as_points(self.points)
        self._tree = cKDTree(self.points) if len(self.points) else None

    def __len__(self) -> int:
        return len(self.points)

    def extent(self) -> tuple[float, float, float, float] | None:
        if not len(self.points):
            return None
        lo, hi = self.points.min(axis=0), self.points.max(axis=0)
        return (float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1]))


def vehicle_speeds(times, poses: Sequence[Pose2D]) -> np.ndarray:
    """Finite-difference speed at each pose (forward difference for the first)."""
    times = np.asarray(times, dtype=float)
    n = len(poses)
    if n < 2:
        return np.full(n, np.nan)
    xy = np.array([[p.x, p.y] for p in poses])
    dt = np.diff(times)
    v = np.hypot(*np.diff(xy, axis=0).T) / np.where(dt > 0, dt, np.nan)
    return np.concatenate([[v[0]], v])


def gate_returns(scans, poses, speed_gate, range_gate, speeds=None):
    """Per-scan world-frame returns that survive the speed and range gates."""
    if len(scans) != len(poses):
        raise ValueError("one pose per scan required")
    if speeds is None:
        speeds = vehicle_speeds([s.timestamp for s in scans], poses)
    groups = []
    for scan, pose, v in zip(scans, poses, speeds):
        if speed_gate is not None and not (np.isfinite(v) and v >= speed_gate):
            groups.append(np.zeros((0, 2)))
            continue
        det = scan.detections
        if range_gate is not None and len(det):
            det = det[np.hypot(det[:, 0], det[:, 1]) <= range_gate]
        groups.append(transform_points(det, pose))
    return groups


def aggregate_map(
    scans: Sequence[RadarScan],
    poses: Sequence[Pose2D],
    speed_gate: float = 1.0,
    range_gate: float = 50.0,
    speeds=None,
) -> MapStore:
    """Build the prior map from scans with reference poses.

    Scans taken below ``speed_gate`` (m/s) are dropped; returns beyond
    ``range_gate`` (m) are dropped. Speed is finite-differenced from the poses
    unless ``speeds`` is given; a lone scan without ``speeds`` cannot be gated
    and is dropped.
    """
    groups = gate_returns(scans, poses, speed_gate, range_gate, speeds)
    pts = np.concatenate(groups) if groups else np.zeros((0, 2))
    meta = {"speed_gate_mps": speed_gate, "range_gate_m": range_gate, "n_scans": len(scans)}
    return MapStore(pts, meta)


def query_region(store: MapStore, center, half_extent: float) -> np.ndarray:
    """Map points inside the axis-aligned square ``center +- half_extent`` (inclusive)."""
    if not half_extent > 0:
        raise ValueError("half_extent must be > 0")
    if store._tree is None:
        return np.zeros((0, 2))
    c = np.asarray(center, dtype=float).reshape(2)
    idx = store._tree.query_ball_point(c, r=half_extent, p=np.inf)
    return store.points[np.sort(np.asarray(idx, dtype=np.int64))]

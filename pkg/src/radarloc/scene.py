"""Synthetic radar world and sensor model.

A :class:`SceneSpec` is a static set of point reflectors, optionally with
periodic rows (parked cars, bollards) generated from a compact description.
:func:`sample_scan` draws one sparse, cluttered range-azimuth sweep from a
single wide-FOV virtual radar located at the vehicle pose.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .geometry import Pose2D, Trajectory, as_points, wrap_angle


@dataclass(frozen=True)
class RowGenerator:
    """``count`` reflectors starting at ``origin`` every ``spacing`` metres along ``direction``."""

    origin: tuple[float, float]
    direction: tuple[float, float]
    spacing: float
    count: int

    def __post_init__(self):
        if not self.spacing > 0:
            raise ValueError("row spacing must be > 0")
        if self.count < 0:
            raise ValueError("row count must be >= 0")
        norm = math.hypot(*self.direction)
        if norm == 0:
            raise ValueError("row direction must be non-zero")
        object.__setattr__(
            self, "direction", (self.direction[0] / norm, self.direction[1] / norm)
        )

    def points(self) -> np.ndarray:
        k = np.arange(self.count, dtype=float)[:, None]
        return np.asarray(self.origin, dtype=float) + k * self.spacing * np.asarray(
            self.direction
        )


@dataclass
class SceneSpec:
    reflectors: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    rows: list[RowGenerator] = field(default_factory=list)
    bounds: tuple[float, float, float, float] = (-1e3, -1e3, 1e3, 1e3)  # xmin, ymin, xmax, ymax

    def __post_init__(self):
        self.reflectors = as_points(self.reflectors)
        xmin, ymin, xmax, ymax = self.bounds
        if not (xmin < xmax and ymin < ymax):
            raise ValueError(f"degenerate bounds {self.bounds}")
        pts = self.all_reflectors()
        if not np.all(np.isfinite(pts)):
            raise ValueError("non-finite reflector coordinates")
        if not np.all(self.contains(pts)):
            raise ValueError("reflectors outside scene bounds")

    def contains(self, points) -> np.ndarray:
        pts = as_points(points)
        xmin, ymin, xmax, ymax = self.bounds
        return (
            (pts[:, 0] >= xmin) & (pts[:, 0] <= xmax) & (pts[:, 1] >= ymin) & (pts[:, 1] <= ymax)
        )

    def all_reflectors(self) -> np.ndarray:
        """Explicit reflectors followed by every row, in declaration order."""
        parts = [self.reflectors] + [r.points() for r in self.rows]
        return np.concatenate(parts, axis=0) if parts else np.zeros((0, 2))


@dataclass(frozen=True)
class SensorConfig:
    max_range: float = 50.0
    fov_half_angle: float = math.radians(75.0)
    detection_prob: float = 0.1
    clutter_rate: float = 3.0
    range_sigma: float = 0.15
    azimuth_sigma: float = math.radians(0.5)
    occlusion_enabled: bool = True
    occlusion_width: float = 0.5

    def __post_init__(self):
        values = (
            self.max_range,
            self.fov_half_angle,
            self.detection_prob,
            self.clutter_rate,
            self.range_sigma,
            self.azimuth_sigma,
            self.occlusion_width,
        )
        if not all(math.isfinite(v) for v in values):
            raise ValueError("sensor config values must be finite")
        if not self.max_range > 0:
            raise ValueError("max_range must be > 0")
        if not 0.0 <= self.detection_prob <= 1.0:
            raise ValueError("detection_prob must lie in [0, 1]")
        if self.clutter_rate < 0:
            raise ValueError("clutter_rate must be >= 0")
        if not 0 < self.fov_half_angle <= math.pi:
            raise ValueError("fov_half_angle must lie in (0, pi]")
        if self.range_sigma < 0 or self.azimuth_sigma < 0 or self.occlusion_width < 0:
            raise ValueError("noise sigmas and occlusion width must be >= 0")

    @classmethod
    def noiseless(cls, **overrides) -> "SensorConfig":
        """Every visible reflector detected exactly, no clutter."""
        kw = dict(detection_prob=1.0, clutter_rate=0.0, range_sigma=0.0, azimuth_sigma=0.0)
        kw.update(overrides)
        return cls(**kw)


@dataclass
class RadarScan:
    timestamp: float
    detections: np.ndarray  # (N, 2) body frame
    sensor_pose_truth: Pose2D | None = None

    def __post_init__(self):
        self.detections = as_points(self.detections)

    def __len__(self) -> int:
        return len(self.detections)


def _polar(points_body: np.ndarray):
    r = np.hypot(points_body[:, 0], points_body[:, 1])
    b = np.arctan2(points_body[:, 1], points_body[:, 0])
    return r, b


def _to_body(points_world: np.ndarray, pose: Pose2D) -> np.ndarray:
    d = points_world - np.array([pose.x, pose.y])
    c, s = math.cos(pose.phi), math.sin(pose.phi)
    return np.column_stack((c * d[:, 0] + s * d[:, 1], -s * d[:, 0] + c * d[:, 1]))


def occlusion_mask(ranges: np.ndarray, bearings: np.ndarray, width: float) -> np.ndarray:
    """True where a reflector is shadowed by a strictly closer one.

    A blocker at range ``r`` shadows the bearings within ``atan2(width / 2, r)``
    of its own bearing, at every range beyond ``r``.
    """
    n = len(ranges)
    if n < 2 or width <= 0:
        return np.zeros(n, dtype=bool)
    half = np.arctan2(0.5 * width, ranges)  # footprint of each blocker
    dbear = np.abs(wrap_angle(bearings[None, :] - bearings[:, None]))  # [blocker, target]
    closer = ranges[:, None] < ranges[None, :]
    return np.any(closer & (dbear <= half[:, None]), axis=0)


def occluded(scene: SceneSpec, pose: Pose2D, target, cfg: SensorConfig) -> bool:
    """Whether ``target`` (world frame) is shadowed by another scene reflector."""
    if not cfg.occlusion_enabled:
        raise ValueError("occlusion is disabled in this sensor config")
    tgt = as_points(target)
    pts = scene.all_reflectors()
    body = _to_body(np.concatenate([tgt, pts]), pose)
    r, b = _polar(body)
    rt, bt = r[0], b[0]
    r, b = r[1:], b[1:]
    others = ~np.all(np.isclose(pts, tgt[0], rtol=0, atol=1e-12), axis=1)
    half = np.arctan2(0.5 * cfg.occlusion_width, r)
    hit = others & (r < rt) & (np.abs(wrap_angle(b - bt)) <= half)
    return bool(np.any(hit))


def sample_scan(scene: SceneSpec, pose: Pose2D, cfg: SensorConfig, rng_seed) -> RadarScan:
    """Draw one radar sweep at ``pose``.

    Each visible reflector (in range, in FOV and, if enabled, not occluded) is
    reported independently with probability ``cfg.detection_prob`` and
    perturbed in range and azimuth. Perturbed returns that leave the sensor's
    range/FOV are dropped. ``Poisson(cfg.clutter_rate)`` clutter returns are
    spread uniformly (by area) over the FOV sector. Returns come back in body
    frame, true detections first.
    """
    if not scene.contains([[pose.x, pose.y]])[0]:
        raise ValueError("pose outside scene bounds")
    rng = np.random.default_rng(rng_seed)

    pts = scene.all_reflectors()
    body = _to_body(pts, pose)
    r, b = _polar(body)
    vis = (r <= cfg.max_range) & (np.abs(b) <= cfg.fov_half_angle) & (r > 0)
    r, b = r[vis], b[vis]
    if cfg.occlusion_enabled and len(r):
        keep = ~occlusion_mask(r, b, cfg.occlusion_width)
        r, b = r[keep], b[keep]

    hit = rng.random(len(r)) < cfg.detection_prob
    r, b = r[hit], b[hit]
    r = r + rng.normal(0.0, cfg.range_sigma, len(r)) if cfg.range_sigma > 0 else r
    b = b + rng.normal(0.0, cfg.azimuth_sigma, len(b)) if cfg.azimuth_sigma > 0 else b
    ok = (r > 0) & (r <= cfg.max_range) & (np.abs(b) <= cfg.fov_half_angle)
    r, b = r[ok], b[ok]

    n_clutter = rng.poisson(cfg.clutter_rate)
    rc = cfg.max_range * np.sqrt(rng.random(n_clutter))
    bc = rng.uniform(-cfg.fov_half_angle, cfg.fov_half_angle, n_clutter)

    r = np.concatenate([r, rc])
    b = np.concatenate([b, bc])
    det = np.column_stack((r * np.cos(b), r * np.sin(b)))
    return RadarScan(timestamp=0.0, detections=det, sensor_pose_truth=pose)


def generate_trajectory(waypoints, speed: float, scan_rate: float) -> Trajectory:
    """Constant-speed poses along a piecewise-linear path, sampled at ``scan_rate``.

    Headings follow the segment being traversed; a sample that lands exactly
    on an interior waypoint takes the heading of the outgoing segment.
    """
    if not speed > 0 or not scan_rate > 0:
        raise ValueError("speed and scan_rate must be > 0")
    wp = as_points(waypoints)
    seg = np.diff(wp, axis=0)
    seg_len = np.hypot(seg[:, 0], seg[:, 1])
    nz = seg_len > 0
    seg, seg_len = seg[nz], seg_len[nz]
    if len(seg_len) == 0:
        raise ValueError("degenerate (zero-length) path")
    starts = wp[:-1][nz]
    cum = np.concatenate([[0.0], np.cumsum(seg_len)])
    total = cum[-1]

    n = int(math.floor(total / speed * scan_rate + 1e-9)) + 1
    times = np.arange(n) / scan_rate
    s = np.minimum(times * speed, total)
    k = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, len(seg_len) - 1)
    frac = (s - cum[k]) / seg_len[k]
    xy = starts[k] + frac[:, None] * seg[k]
    heading = np.arctan2(seg[k, 1], seg[k, 0])
    poses = [Pose2D(x, y, h) for (x, y), h in zip(xy, heading)]
    return Trajectory(times, poses)


def simulate_scans(
    scene: SceneSpec, trajectory: Trajectory, cfg: SensorConfig, seeds: Sequence[int]
) -> list[RadarScan]:
    """One scan per trajectory pose, stamped with the pose time."""
    scans = []
    for t, pose, seed in zip(trajectory.times, trajectory.poses, seeds):
        scan = sample_scan(scene, pose, cfg, seed)
        scan.timestamp = float(t)
        scans.append(scan)
    return scans


def scan_seeds(base_seed: int, stream: int, n: int) -> list[int]:
    """Independent per-scan seeds for one simulation stream."""
    ss = np.random.SeedSequence([int(base_seed), int(stream)])
    return [int(x) for x in ss.generate_state(n, dtype=np.uint32)]


# --- scene builders ---------------------------------------------------------


def _irregular_line(rng, start, end, mean_gap, jitter):
    start, end = np.asarray(start, float), np.asarray(end, float)
    length = np.hypot(*(end - start))
    if length <= 0:
        return np.zeros((0, 2))
    d = (end - start) / length
    normal = np.array([-d[1], d[0]])
    s = []
    pos = rng.uniform(0, mean_gap)
    while pos < length:
        s.append(pos)
        pos += rng.exponential(mean_gap) + 0.3
    s = np.asarray(s)
    off = rng.normal(0.0, jitter, len(s))
    return start + s[:, None] * d + off[:, None] * normal


def urban_loop_scene(
    seed: int = 0,
    block: tuple[float, float] = (260.0, 180.0),
    street_half_width: float = 11.0,
    parking_offset: float = 5.0,
    car_period: float = 5.5,
) -> tuple[SceneSpec, np.ndarray]:
    """A rectangular downtown loop and the waypoints that drive it.

    Building fronts line both sides of every street as irregularly spaced
    reflectors, broken by cross-street gaps; parked-car rows (periodic) sit on
    some stretches and poles are scattered along the kerbs. Returns the scene
    and a closed waypoint list centred on the street axis.
    """
    rng = np.random.default_rng(seed)
    w, h = block
    corners = np.array([[0.0, 0.0], [w, 0.0], [w, h], [0.0, h], [0.0, 0.0]])
    pts = []
    rows: list[RowGenerator] = []
    for a, b in zip(corners[:-1], corners[1:]):
        d = (b - a) / np.hypot(*(b - a))
        normal = np.array([-d[1], d[0]])  # points into the block interior
        length = np.hypot(*(b - a))
        for side in (+1.0, -1.0):
            off = side * street_half_width
            # building fronts with cross-street gaps
            cursor = -street_half_width if side < 0 else street_half_width
            end_len = length + (street_half_width if side < 0 else -street_half_width)
            while cursor < end_len:
                seg_len = rng.uniform(35.0, 80.0)
                seg_end = min(cursor + seg_len, end_len)
                p0 = a + cursor * d + off * normal
                p1 = a + seg_end * d + off * normal
                pts.append(_irregular_line(rng, p0, p1, mean_gap=1.2, jitter=0.25))
                cursor = seg_end + rng.uniform(10.0, 18.0)
            # parked cars: periodic clusters on some stretches
            cursor = 20.0
            while cursor < length - 25.0:
                n_cars = int(rng.integers(4, 12))
                if rng.random() < 0.6:
                    base = a + cursor * d + side * parking_offset * normal
                    for dx_car, dy_car in ((0.0, 0.0), (1.6, 0.8 * side), (3.4, 0.0)):
                        origin = base + dx_car * d + dy_car * normal
                        rows.append(
                            RowGenerator(tuple(origin), tuple(d), car_period, n_cars)
                        )
                cursor += n_cars * car_period + rng.uniform(8.0, 30.0)
            # poles
            n_poles = int(length // 25)
            s = np.sort(rng.uniform(0, length, n_poles))
            poles = a + s[:, None] * d + side * (parking_offset + 2.0) * normal
            pts.append(poles)
    # a few free-standing objects inside and around the block
    pts.append(rng.uniform([-40, -40], [w + 40, h + 40], size=(60, 2)))
    margin = 120.0
    bounds = (-margin, -margin, w + margin, h + margin)
    scene = SceneSpec(reflectors=np.concatenate(pts), rows=rows, bounds=bounds)
    return scene, corners


def periodic_row_scene(
    period: float = 4.0,
    count: int = 40,
    row_offset: float = 5.0,
    wall_offset: float = 12.0,
    n_landmarks: int = 10,
    seed: int = 0,
) -> tuple[SceneSpec, np.ndarray]:
    """Straight street along +x with a parked-car row of fixed ``period``.

    The row (two reflectors per car) sits at ``y = -row_offset`` and provides
    most of the reflector mass; a handful of aperiodic landmarks on a wall at
    ``y = +wall_offset`` break the along-track symmetry.
    """
    rng = np.random.default_rng(seed)
    length = period * count
    x0 = 0.0
    rows = [
        RowGenerator((x0, -row_offset), (1.0, 0.0), period, count),
        RowGenerator((x0 + 1.5, -row_offset - 0.8), (1.0, 0.0), period, count),
    ]
    lx = np.sort(rng.uniform(x0 + 10, x0 + length - 10, n_landmarks))
    landmarks = np.column_stack((lx, np.full(n_landmarks, wall_offset)))
    scene = SceneSpec(
        reflectors=landmarks, rows=rows, bounds=(-100.0, -60.0, length + 100.0, 60.0)
    )
    waypoints = np.array([[x0 - 20.0, 0.0], [x0 + length + 20.0, 0.0]])
    return scene, waypoints

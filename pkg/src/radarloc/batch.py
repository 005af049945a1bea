"""Localization batches: odometry-framed scan assembly and error injection.

Order of operations used by the evaluation harness: the true trajectory is
first corrupted by drift (:func:`inject_drift`, growing from zero at batch
start), then the whole batch is displaced by one rigid offset
(:func:`inject_rigid_offset`, pivoting about the batch-end position). The
result is the odometric trajectory in the prior-belief frame ``V``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .geometry import Pose2D, RigidOffset, Trajectory, offset_trajectory, transform_points
from .mapping import gate_returns
from .scene import RadarScan


@dataclass(frozen=True)
class BatchSpec:
    duration: float = 5.0
    scan_rate: float = 10.0

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError("batch duration must be > 0")
        if not self.scan_rate > 0:
            raise ValueError("scan_rate must be > 0")


@dataclass(frozen=True)
class OffsetPrior:
    sigma_t: float = 2.0
    sigma_phi: float = math.radians(3.0)

    def __post_init__(self):
        if self.sigma_t < 0 or self.sigma_phi < 0:
            raise ValueError("offset prior sigmas must be >= 0")


@dataclass(frozen=True)
class DriftModel:
    """Odometric drift described by its spread at the end of the batch.

    ``position_law`` is ``"linear"`` (integrated velocity) or ``"quadratic"``
    (double-integrated acceleration). Heading drift always grows linearly.
    """

    position_law: str = "linear"
    sigma_pos_end: float = 0.0
    sigma_heading_end: float = 0.0

    def __post_init__(self):
        if self.position_law not in ("linear", "quadratic"):
            raise ValueError(f"unknown position law {self.position_law!r}")
        if self.sigma_pos_end < 0 or self.sigma_heading_end < 0:
            raise ValueError("drift sigmas must be >= 0")

    def growth(self, tau):
        tau = np.asarray(tau, dtype=float)
        return tau if self.position_law == "linear" else tau**2


def assemble_batch(
    scans: Sequence[RadarScan],
    odom_poses: Sequence[Pose2D],
    range_gate: float | None = 50.0,
    speed_gate: float | None = None,
    grouped: bool = False,
):
    """Place body-frame returns in the odometry frame, anchored at the last pose.

    Every return is mapped through its scan's odometric pose and then shifted
    so that the final pose position is the origin. Returns beyond
    ``range_gate`` are dropped; ``speed_gate`` (off by default) drops scans
    taken while the odometric speed is below it. With ``grouped`` the result is
    a list with one array per scan instead of one stacked array.
    """
    if len(scans) != len(odom_poses):
        raise ValueError(f"{len(scans)} scans but {len(odom_poses)} poses")
    if len(scans) == 0:
        return [] if grouped else np.zeros((0, 2))
    anchor = odom_poses[-1].position
    groups = gate_returns(scans, odom_poses, speed_gate, range_gate)
    groups = [g - anchor for g in groups]
    if grouped:
        return groups
    return np.concatenate(groups)


def inject_rigid_offset(
    poses: Sequence[Pose2D], prior: OffsetPrior, rng_seed
) -> tuple[list[Pose2D], RigidOffset]:
    """Displace a trajectory by one offset drawn from ``prior``.

    ``dx, dy ~ N(0, sigma_t^2)`` and ``dphi ~ N(0, sigma_phi^2)``; the offset
    rotates the trajectory about its final position and then translates it.
    Returns the displaced poses and the drawn offset.
    """
    rng = np.random.default_rng(rng_seed)
    dx, dy = rng.normal(0.0, 1.0, 2) * prior.sigma_t
    dphi = rng.normal(0.0, 1.0) * prior.sigma_phi
    offset = RigidOffset(dx, dy, dphi)
    return offset_trajectory(poses, offset), offset


def sample_drift_endpoint(model: DriftModel, rng_seed) -> tuple[np.ndarray, float]:
    """Position drift vector and heading drift at batch end."""
    rng = np.random.default_rng(rng_seed)
    magnitude = abs(rng.normal(0.0, 1.0)) * model.sigma_pos_end
    direction = rng.uniform(0.0, 2.0 * math.pi)
    heading = rng.normal(0.0, 1.0) * model.sigma_heading_end
    return magnitude * np.array([math.cos(direction), math.sin(direction)]), float(heading)


def inject_drift(trajectory: Trajectory, model: DriftModel, rng_seed) -> Trajectory:
    """Corrupt a trajectory with drift that is zero at its first pose.

    Heading error grows linearly to the sampled endpoint; it also rotates each
    odometric displacement increment, so it compounds into position. On top of
    that an explicit position error grows along ``model.position_law`` to the
    sampled endpoint vector, which it reaches exactly at the last pose.
    """
    n = len(trajectory)
    if n == 0:
        return Trajectory(np.zeros(0), [])
    t = trajectory.times
    span = t[-1] - t[0]
    tau = (t - t[0]) / span if span > 0 else np.zeros(n)
    d_end, h_end = sample_drift_endpoint(model, rng_seed)

    xy = trajectory.xy
    heading_err = tau * h_end
    if h_end != 0.0:
        inc = np.diff(xy, axis=0)
        mid = 0.5 * (heading_err[1:] + heading_err[:-1])
        c, s = np.cos(mid), np.sin(mid)
        rot = np.column_stack((c * inc[:, 0] - s * inc[:, 1], s * inc[:, 0] + c * inc[:, 1]))
        xy = np.vstack([xy[:1], xy[0] + np.cumsum(rot, axis=0)])
    xy = xy + model.growth(tau)[:, None] * d_end
    poses = [
        Pose2D(x, y, p.phi + e) for (x, y), p, e in zip(xy, trajectory.poses, heading_err)
    ]
    return Trajectory(t.copy(), poses)


def batch_window(trajectory: Trajectory, end_time: float, duration: float) -> Trajectory:
    """Poses in ``[end_time - duration, end_time]``."""
    return trajectory.window(end_time - duration, end_time)


def batch_points_world(scans, poses) -> np.ndarray:
    """All returns of a batch in the frame of ``poses`` (no anchoring, no gates)."""
    parts = [transform_points(s.detections, p) for s, p in zip(scans, poses)]
    return np.concatenate(parts) if parts else np.zeros((0, 2))

"""SE(2) poses, rigid offsets and point transforms.

Frames used throughout the package:

* ``W`` - world frame (the frame the prior map lives in).
* ``V`` - prior-belief frame: where odometry plus the (erroneous) initial
  guess place the vehicle. ``V`` differs from ``W`` by a rigid offset.
* ``B`` - vehicle body frame, x forward, y left.

Headings are radians, counterclockwise from +x, normalized to (-pi, pi].
Point lists are ``(N, 2)`` float arrays; a single point may be a
:class:`Point2D`.

Offset convention
-----------------
A :class:`RigidOffset` acting on a trajectory rotates every pose by ``dphi``
about a pivot (the batch-end position of that same trajectory) and then
translates by ``(dx, dy)``. For a single pose the pivot is the pose itself, so
:func:`apply_offset` reduces to adding ``(dx, dy, dphi)``. With this
parameterization the inverse offset is the component-wise negation, taken
about the displaced pivot (see :func:`offset_trajectory`).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

TWO_PI = 2.0 * math.pi


def wrap_angle(a):
    """Wrap angle(s) into (-pi, pi]."""
    if np.ndim(a) == 0:
        a = float(a)
        w = a - TWO_PI * math.ceil((a - math.pi) / TWO_PI)
        return w
    a = np.asarray(a, dtype=float)
    return a - TWO_PI * np.ceil((a - np.pi) / TWO_PI)


def rotation(phi: float) -> np.ndarray:
    c, s = math.cos(phi), math.sin(phi)
    return np.array([[c, -s], [s, c]])


def round_half_away(v):
    """Nearest integer, ties away from zero (the grid-lookup rounding rule)."""
    v = np.asarray(v, dtype=float)
    return (np.sign(v) * np.floor(np.abs(v) + 0.5)).astype(np.int64)


class Point2D(NamedTuple):
    x: float
    y: float


@dataclass(frozen=True)
class Pose2D:
    x: float
    y: float
    phi: float = 0.0

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.x, self.y, self.phi)):
            raise ValueError(f"non-finite pose {self.x, self.y, self.phi}")
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "phi", wrap_angle(self.phi))

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y])

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.phi)

    @classmethod
    def identity(cls) -> "Pose2D":
        return cls(0.0, 0.0, 0.0)


@dataclass(frozen=True)
class RigidOffset:
    dx: float = 0.0
    dy: float = 0.0
    dphi: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "dx", float(self.dx))
        object.__setattr__(self, "dy", float(self.dy))
        object.__setattr__(self, "dphi", wrap_angle(self.dphi))

    def __neg__(self) -> "RigidOffset":
        return RigidOffset(-self.dx, -self.dy, -self.dphi)

    @property
    def translation(self) -> np.ndarray:
        return np.array([self.dx, self.dy])

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.dx, self.dy, self.dphi)


@dataclass
class Trajectory:
    """Timestamped discrete pose sequence."""

    times: np.ndarray
    poses: list[Pose2D] = field(default_factory=list)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if len(self.times) != len(self.poses):
            raise ValueError("times and poses differ in length")

    def __len__(self) -> int:
        return len(self.poses)

    @property
    def xy(self) -> np.ndarray:
        return np.array([[p.x, p.y] for p in self.poses]).reshape(-1, 2)

    @property
    def headings(self) -> np.ndarray:
        return np.array([p.phi for p in self.poses])

    def window(self, t_start: float, t_end: float) -> "Trajectory":
        """Poses with ``t_start <= t <= t_end`` (small tolerance at both ends)."""
        eps = 1e-9
        keep = (self.times >= t_start - eps) & (self.times <= t_end + eps)
        idx = np.flatnonzero(keep)
        return Trajectory(self.times[idx], [self.poses[i] for i in idx])


def as_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.size == 0:
        return np.zeros((0, 2))
    return pts.reshape(-1, 2)


def transform_points(points, pose: Pose2D) -> np.ndarray:
    """Map points given in a frame attached at ``pose`` into the pose's parent frame.

    Each output is ``R(pose.phi) @ p + (pose.x, pose.y)``.
    """
    pts = as_points(points)
    c, s = math.cos(pose.phi), math.sin(pose.phi)
    out = np.empty_like(pts)
    out[:, 0] = c * pts[:, 0] - s * pts[:, 1] + pose.x
    out[:, 1] = s * pts[:, 0] + c * pts[:, 1] + pose.y
    return out


def apply_offset(pose: Pose2D, offset: RigidOffset) -> Pose2D:
    """Shift a pose by ``(dx, dy)`` and advance its heading by ``dphi``."""
    return Pose2D(pose.x + offset.dx, pose.y + offset.dy, pose.phi + offset.dphi)


def compose(a: Pose2D, b: Pose2D) -> Pose2D:
    """``a (+) b``: pose ``b`` expressed in frame ``a``, mapped to ``a``'s parent."""
    c, s = math.cos(a.phi), math.sin(a.phi)
    return Pose2D(
        a.x + c * b.x - s * b.y,
        a.y + s * b.x + c * b.y,
        a.phi + b.phi,
    )


def invert(a: Pose2D) -> Pose2D:
    c, s = math.cos(a.phi), math.sin(a.phi)
    return Pose2D(-(c * a.x + s * a.y), -(-s * a.x + c * a.y), -a.phi)


def offset_trajectory(
    poses: Sequence[Pose2D], offset: RigidOffset, pivot=None
) -> list[Pose2D]:
    """Apply one rigid offset to every pose of a trajectory.

    Positions rotate by ``offset.dphi`` about ``pivot`` (default: the final
    pose position) and then translate by ``(dx, dy)``; headings advance by
    ``dphi``. The final pose ends up exactly at ``apply_offset(final, offset)``.
    """
    if len(poses) == 0:
        return []
    if offset.dx == 0.0 and offset.dy == 0.0 and offset.dphi == 0.0:
        return list(poses)
    if pivot is None:
        pivot = poses[-1].position
    pivot = np.asarray(pivot, dtype=float)
    xy = np.array([[p.x, p.y] for p in poses]) - pivot
    c, s = math.cos(offset.dphi), math.sin(offset.dphi)
    rx = c * xy[:, 0] - s * xy[:, 1] + pivot[0] + offset.dx
    ry = s * xy[:, 0] + c * xy[:, 1] + pivot[1] + offset.dy
    return [Pose2D(x, y, p.phi + offset.dphi) for x, y, p in zip(rx, ry, poses)]

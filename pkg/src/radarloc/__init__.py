"""Radar occupancy-grid mapping and globally optimal FFT localization."""
from .geometry import Point2D, Pose2D, RigidOffset, Trajectory
from .mapping import InverseSensorModel, MapStore, OccupancyGrid
from .registration import AlignmentResult, SearchSpec, fast_global_align

__version__ = "0.1.0"

__all__ = [
    "AlignmentResult",
    "InverseSensorModel",
    "MapStore",
    "OccupancyGrid",
    "Point2D",
    "Pose2D",
    "RigidOffset",
    "SearchSpec",
    "Trajectory",
    "fast_global_align",
]

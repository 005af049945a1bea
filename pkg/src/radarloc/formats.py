"""On-disk formats: scenes, scan fixtures, maps, trajectories.

Byte layouts are documented in ``docs/formats.md``. Floats are written with
``repr`` precision, so identical inputs give identical files.
"""
from __future__ import annotations

import csv
import io
import json
import os

import numpy as np

from .geometry import Pose2D, RigidOffset, Trajectory
from .mapping import MapStore
from .scene import RadarScan, RowGenerator, SceneSpec

SCENE_FORMAT = "radarloc-scene/1"
SCAN_FORMAT = "radarloc-scans/1"
MAP_FORMAT = "radarloc-map/1"


class FormatError(ValueError):
    pass


def _pts(a) -> list:
    return [[float(x), float(y)] for x, y in np.asarray(a, dtype=float).reshape(-1, 2)]


def _pose_dict(p: Pose2D) -> dict:
    return {"x_m": float(p.x), "y_m": float(p.y), "phi_rad": float(p.phi)}


def _pose_from(d) -> Pose2D:
    try:
        return Pose2D(float(d["x_m"]), float(d["y_m"]), float(d["phi_rad"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"bad pose record {d!r}") from exc


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, allow_nan=False)


# scenes

def scene_to_dict(scene: SceneSpec, waypoints=None) -> dict:
    d = {
        "format": SCENE_FORMAT,
        "bounds_m": [float(v) for v in scene.bounds],
        "reflectors_m": _pts(scene.reflectors),
        "rows": [
            {"origin_m": list(map(float, r.origin)), "direction": list(map(float, r.direction)),
             "spacing_m": float(r.spacing), "count": int(r.count)}
            for r in scene.rows
        ],
    }
    if waypoints is not None:
        d["waypoints_m"] = _pts(waypoints)
    return d


def scene_from_dict(d: dict) -> tuple[SceneSpec, np.ndarray | None]:
    if d.get("format") != SCENE_FORMAT:
        raise FormatError(f"not a scene file (format={d.get('format')!r})")
    try:
        rows = [RowGenerator(tuple(r["origin_m"]), tuple(r["direction"]), float(r["spacing_m"]), int(r["count"]))
                for r in d.get("rows", [])]
        scene = SceneSpec(np.asarray(d.get("reflectors_m", []), dtype=float).reshape(-1, 2), rows,
                          tuple(float(v) for v in d["bounds_m"]))
    except (KeyError, TypeError) as exc:
        raise FormatError(f"malformed scene: {exc}") from exc
    wp = d.get("waypoints_m")
    return scene, (None if wp is None else np.asarray(wp, dtype=float).reshape(-1, 2))


def write_scene(path, scene: SceneSpec, waypoints=None) -> None:
    with open(path, "w") as f:
        f.write(json.dumps(scene_to_dict(scene, waypoints), indent=1, sort_keys=True) + "\n")


def read_scene(path) -> tuple[SceneSpec, np.ndarray | None]:
    with open(path) as f:
        return scene_from_dict(json.load(f))


# scans and batch fixtures

def scan_to_record(scan: RadarScan, odom_pose: Pose2D | None = None) -> dict:
    rec = {"timestamp_s": float(scan.timestamp), "detections_m": _pts(scan.detections)}
    if scan.sensor_pose_truth is not None:
        rec["pose_truth"] = _pose_dict(scan.sensor_pose_truth)
    if odom_pose is not None:
        rec["odom_pose"] = _pose_dict(odom_pose)
    return rec


def write_scans(path, scans, odom_poses=None) -> None:
    """One JSON object per line, one line per scan, timestamp order."""
    if odom_poses is not None and len(odom_poses) != len(scans):
        raise ValueError("one odometric pose per scan required")
    with open(path, "w") as f:
        for k, s in enumerate(scans):
            f.write(_dump(scan_to_record(s, None if odom_poses is None else odom_poses[k])) + "\n")


def read_scans(path) -> tuple[list[RadarScan], list[Pose2D] | None]:
    """Scans and, if every line carries one, their odometric poses."""
    scans, odom = [], []
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                det = np.asarray(rec["detections_m"], dtype=float).reshape(-1, 2)
                ts = float(rec["timestamp_s"])
            except (ValueError, KeyError, TypeError) as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from exc
            truth = _pose_from(rec["pose_truth"]) if "pose_truth" in rec else None
            scans.append(RadarScan(ts, det, truth))
            odom.append(_pose_from(rec["odom_pose"]) if "odom_pose" in rec else None)
    ts = [s.timestamp for s in scans]
    if any(b < a for a, b in zip(ts, ts[1:])):
        raise FormatError(f"{path}: scans not in timestamp order")
    if odom and all(p is not None for p in odom):
        return scans, odom
    return scans, None


def truth_sidecar(path) -> str:
    return os.fspath(path) + ".truth.json"


def write_batch_fixture(path, scans, odom_poses, true_offset: RigidOffset | None = None, extra=None) -> None:
    """Batch JSON lines plus, when the offset is known, a ``.truth.json`` sidecar."""
    write_scans(path, scans, odom_poses)
    if true_offset is not None:
        meta = {"true_offset": {"dx_m": true_offset.dx, "dy_m": true_offset.dy, "dphi_rad": true_offset.dphi}}
        meta.update(extra or {})
        with open(truth_sidecar(path), "w") as f:
            f.write(json.dumps(meta, indent=1, sort_keys=True) + "\n")


def read_batch_truth(path) -> RigidOffset | None:
    p = truth_sidecar(path)
    if not os.path.exists(p):
        return None
    with open(p) as f:
        t = json.load(f)["true_offset"]
    return RigidOffset(t["dx_m"], t["dy_m"], t["dphi_rad"])


# trajectories

def trajectory_to_csv(traj: Trajectory) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t_s", "x_m", "y_m", "phi_rad"])
    for t, p in zip(traj.times, traj.poses):
        w.writerow([repr(float(t)), repr(float(p.x)), repr(float(p.y)), repr(float(p.phi))])
    return buf.getvalue()


def write_trajectory(path, traj: Trajectory) -> None:
    with open(path, "w", newline="") as f:
        f.write(trajectory_to_csv(traj))


def read_trajectory(path) -> Trajectory:
    with open(path, newline="") as f:
        rows = list(csv.DictReader(f))
    return Trajectory([float(r["t_s"]) for r in rows],
                      [Pose2D(float(r["x_m"]), float(r["y_m"]), float(r["phi_rad"])) for r in rows])


# maps

def map_sidecar(path) -> str:
    return os.fspath(path) + ".json"


def write_map(path, store: MapStore, cell_size: float | None = None) -> None:
    """Raw little-endian float64 ``x0 y0 x1 y1 ...`` plus a JSON sidecar."""
    pts = np.ascontiguousarray(store.points, dtype="<f8")
    with open(path, "wb") as f:
        f.write(pts.tobytes())
    meta = {"format": MAP_FORMAT, "dtype": "<f8", "layout": "xy-interleaved", "frame": "world",
            "n_points": int(len(pts)), "cell_size_m": cell_size}
    meta.update({k: v for k, v in store.metadata.items() if k not in meta})
    with open(map_sidecar(path), "w") as f:
        f.write(json.dumps(meta, indent=1, sort_keys=True) + "\n")


def read_map(path) -> MapStore:
    with open(map_sidecar(path)) as f:
        meta = json.load(f)
    if meta.get("format") != MAP_FORMAT:
        raise FormatError(f"not a map sidecar (format={meta.get('format')!r})")
    raw = np.fromfile(path, dtype="<f8")
    if raw.size != 2 * meta["n_points"]:
        raise FormatError(f"{path}: {raw.size} values, sidecar says {meta['n_points']} points")
    return MapStore(raw.reshape(-1, 2).astype(np.float64), meta)

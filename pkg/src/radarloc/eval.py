"""Monte-Carlo localization trials, error statistics and result files.

Seeding
-------
Every trial draws its randomness from ``SeedSequence([base_seed, key, trial])``
where ``key`` is the condition index, or 0 for every condition when
``paired=True``. Pairing gives all conditions the same batch end times,
offset draws, scan noise and normalised drift draws (common random numbers),
so differences between conditions come from the condition alone. The mapping
pass uses ``SeedSequence([base_seed, MAP_STREAM])``, disjoint from every trial.

Scoring
-------
``true_offset`` is the injected rigid offset; drift is a nuisance the
alignment cannot remove and is not part of the target. ``estimated_offset``
is the negated alignment correction. Errors are the Euclidean and absolute
wrapped differences of the two.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .batch import DriftModel, OffsetPrior, batch_window, inject_drift, inject_rigid_offset
from .geometry import RigidOffset, Trajectory, wrap_angle
from .mapping import InverseSensorModel, MapStore, aggregate_map
from .registration import AlignmentError, NoMapCoverage, SearchSpec, fast_global_align
from .scene import SceneSpec, SensorConfig, generate_trajectory, simulate_scans

MAP_STREAM = 2**31 - 1
STATUS_OK = "ok"


@dataclass
class TrialRecord:
    batch_length: float
    drift_level: str
    trial: int
    seed: int
    true_offset: RigidOffset
    estimated_offset: RigidOffset | None
    translation_error: float
    heading_error: float
    runtime: float = 0.0
    status: str = STATUS_OK
    peak_score: float = float("nan")

    def __post_init__(self):
        if self.translation_error < 0 or self.heading_error < 0:
            raise ValueError("errors must be >= 0")


def min_samples(p: float) -> int:
    """Fewest samples for which the ``p`` order statistic is not an endpoint extrapolation."""
    return int(math.ceil(1.0 / min(p, 1.0 - p) - 1e-9))


@dataclass
class Ccdf:
    """Empirical survival function.

    ``exceedance[i]`` is the fraction of samples strictly greater than
    ``values[i]``; with distinct samples it starts at ``1 - 1/N`` and ends at 0.
    """

    values: np.ndarray
    exceedance: np.ndarray

    @classmethod
    def from_errors(cls, errors) -> "Ccdf":
        v = np.sort(np.asarray(errors, dtype=float).ravel())
        if v.size == 0:
            raise ValueError("no samples")
        if np.any(np.isnan(v)):
            raise ValueError("NaN error values")
        n = v.size
        exc = (n - np.searchsorted(v, v, side="right")) / n
        return cls(v, exc)

    def __len__(self) -> int:
        return self.values.size

    def at(self, x: float) -> float:
        """Fraction of samples exceeding ``x``."""
        return float(np.count_nonzero(self.values > x)) / self.values.size


def percentile(data, p: float) -> float:
    """Linearly interpolated order statistic at fraction ``p``.

    Sorted samples ``v[0..N-1]`` are read at position ``(N - 1) p``, e.g.
    values 1..100 give 50.5 at ``p = 0.5``. Failed trials carry an infinite
    error, which propagates only when the interpolation reaches it.
    """
    if not 0.0 < p < 1.0:
        raise ValueError("p must be in (0, 1)")
    v = data.values if isinstance(data, Ccdf) else np.sort(np.asarray(data, dtype=float).ravel())
    if v.size < min_samples(p):
        raise ValueError(f"need at least {min_samples(p)} samples for p={p}, got {v.size}")
    pos = (v.size - 1) * p
    lo = int(math.floor(pos))
    frac = pos - lo
    if frac == 0.0 or lo + 1 >= v.size:
        return float(v[lo])
    a, b = v[lo], v[lo + 1]
    if math.isinf(b):
        return float(b)
    return float(a + frac * (b - a))


@dataclass
class DriftLevel:
    label: str
    model: DriftModel | None = None


@dataclass
class SweepConfig:
    scene: SceneSpec
    waypoints: np.ndarray
    sensor: SensorConfig = field(default_factory=SensorConfig)
    map_sensor: SensorConfig | None = None
    speed: float = 6.0
    scan_rate: float = 10.0
    search: SearchSpec = field(default_factory=SearchSpec)
    model: InverseSensorModel = field(default_factory=InverseSensorModel)
    prior: OffsetPrior = field(default_factory=OffsetPrior)
    batch_lengths: tuple = (5.0,)
    drift_levels: tuple = (DriftLevel("none"),)
    trials: int = 1
    base_seed: int = 0
    speed_gate: float = 1.0
    range_gate: float = 50.0
    grid_half_extent: float | None = None
    rotation: str = "spectral"
    paired: bool = False

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.batch_lengths:
            raise ValueError("at least one batch length")
        if not self.drift_levels:
            raise ValueError("at least one drift level")
        self.batch_lengths = tuple(float(b) for b in self.batch_lengths)
        self.drift_levels = tuple(self.drift_levels)

    def conditions(self) -> list[tuple[int, float, DriftLevel]]:
        out = []
        for b in self.batch_lengths:
            for d in self.drift_levels:
                out.append((len(out), b, d))
        return out


def _seed_ints(ss: np.random.SeedSequence, n: int) -> list[int]:
    return [int(x) for x in ss.generate_state(n, dtype=np.uint32)]


def build_sweep_map(cfg: SweepConfig) -> tuple[Trajectory, MapStore]:
    """Drive the whole route once and aggregate the mapping-pass returns."""
    traj = generate_trajectory(cfg.waypoints, cfg.speed, cfg.scan_rate)
    sensor = cfg.map_sensor or cfg.sensor
    seeds = _seed_ints(np.random.SeedSequence([cfg.base_seed, MAP_STREAM]), len(traj))
    scans = simulate_scans(cfg.scene, traj, sensor, seeds)
    store = aggregate_map(scans, traj.poses, speed_gate=cfg.speed_gate, range_gate=cfg.range_gate)
    return traj, store


def run_trial(cfg: SweepConfig, traj: Trajectory, store: MapStore, cond: int, batch_length: float,
              drift: DriftLevel, trial: int) -> TrialRecord:
    key = 0 if cfg.paired else cond
    ss = np.random.SeedSequence([cfg.base_seed, key, trial])
    seed = int(ss.generate_state(1, dtype=np.uint32)[0])
    s_end, s_scans, s_offset, s_drift = ss.spawn(4)

    # end time drawn so that the longest batch of the sweep also fits
    t0 = traj.times[0] + max(cfg.batch_lengths)
    t_end = float(np.random.default_rng(s_end).uniform(t0, traj.times[-1]))
    t_end = traj.times[int(np.searchsorted(traj.times, t_end))] if t_end < traj.times[-1] else traj.times[-1]
    window = batch_window(traj, t_end, batch_length)

    # scan seeds indexed by absolute scan number so overlapping batches share returns
    first = int(np.searchsorted(traj.times, window.times[0] - 1e-9))
    all_seeds = _seed_ints(s_scans, len(traj))
    scans = simulate_scans(cfg.scene, window, cfg.sensor, all_seeds[first:first + len(window)])

    odom = window
    if drift.model is not None:
        odom = inject_drift(window, drift.model, s_drift)
    odom_poses, truth = inject_rigid_offset(odom.poses, cfg.prior, s_offset)

    label = drift.label
    try:
        res = fast_global_align(
            store, scans, odom_poses, cfg.search, cfg.model,
            range_gate=cfg.range_gate, grid_half_extent=cfg.grid_half_extent,
            rotation=cfg.rotation, keep_volume=False,
        )
    except AlignmentError as exc:
        status = "no-map-coverage" if isinstance(exc, NoMapCoverage) else "no-batch-returns"
        return TrialRecord(batch_length, label, trial, seed, truth, None, math.inf, math.inf, 0.0, status)
    est = res.prior_frame_offset()
    terr = math.hypot(est.dx - truth.dx, est.dy - truth.dy)
    herr = abs(wrap_angle(est.dphi - truth.dphi))
    return TrialRecord(batch_length, label, trial, seed, truth, est, terr, herr, res.runtime,
                       STATUS_OK, res.peak_score)


_CTX = {}


def _init_worker(cfg, traj, store):
    _CTX["args"] = (cfg, traj, store)


def _run_task(task):
    cfg, traj, store = _CTX["args"]
    return run_trial(cfg, traj, store, *task)


def run_sweep(cfg: SweepConfig, workers: int = 1, progress=None, context=None) -> list[TrialRecord]:
    """All trials of every (batch length, drift level) condition, in condition-then-trial order.

    ``context`` may carry a prebuilt ``(trajectory, map store)`` to skip the
    mapping pass. Results do not depend on ``workers``.
    """
    traj, store = context if context is not None else build_sweep_map(cfg)
    tasks = [(c, b, d, k) for c, b, d in cfg.conditions() for k in range(cfg.trials)]
    if workers <= 1:
        out = []
        for i, t in enumerate(tasks):
            out.append(run_trial(cfg, traj, store, *t))
            if progress is not None:
                progress(i + 1, len(tasks))
        return out
    with ProcessPoolExecutor(workers, initializer=_init_worker, initargs=(cfg, traj, store)) as ex:
        return list(ex.map(_run_task, tasks, chunksize=max(1, len(tasks) // (8 * workers))))


def group_records(records) -> dict[tuple[float, str], list[TrialRecord]]:
    groups: dict[tuple[float, str], list[TrialRecord]] = {}
    for r in records:
        groups.setdefault((r.batch_length, r.drift_level), []).append(r)
    return groups


def summarize(records, ps=(0.5, 0.95)) -> list[dict]:
    """Per-condition percentiles of translation (m) and heading (deg) error."""
    out = []
    for (b, d), recs in group_records(records).items():
        t = [r.translation_error for r in recs]
        h = [math.degrees(r.heading_error) for r in recs]
        row = {"batch_length_s": b, "drift_level": d, "trials": len(recs),
               "failures": sum(r.status != STATUS_OK for r in recs)}
        for p in ps:
            tag = f"p{round(p * 100):02d}"
            ok = len(recs) >= min_samples(p)
            row[f"translation_error_{tag}_m"] = percentile(t, p) if ok else None
            row[f"heading_error_{tag}_deg"] = percentile(h, p) if ok else None
        out.append(row)
    return out


RESULT_COLUMNS = [
    "batch_length_s", "drift_level", "trial", "seed", "status",
    "true_dx_m", "true_dy_m", "true_dphi_deg", "est_dx_m", "est_dy_m", "est_dphi_deg",
    "translation_error_m", "heading_error_deg", "peak_score",
]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def records_to_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RESULT_COLUMNS)
    for r in records:
        e = r.estimated_offset
        w.writerow([_fmt(x) for x in (
            r.batch_length, r.drift_level, r.trial, r.seed, r.status,
            r.true_offset.dx, r.true_offset.dy, math.degrees(r.true_offset.dphi),
            None if e is None else e.dx, None if e is None else e.dy,
            None if e is None else math.degrees(e.dphi),
            r.translation_error, math.degrees(r.heading_error), r.peak_score,
        )])
    return buf.getvalue()


def ccdf_to_csv(records) -> str:
    """Long-format CCDF table for every condition and both error kinds."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["batch_length_s", "drift_level", "error_kind", "error", "exceedance"])
    for (b, d), recs in group_records(records).items():
        for kind, vals in (("translation_m", [r.translation_error for r in recs]),
                           ("heading_deg", [math.degrees(r.heading_error) for r in recs])):
            c = Ccdf.from_errors(vals)
            for v, e in zip(c.values, c.exceedance):
                w.writerow([_fmt(b), d, kind, _fmt(float(v)), _fmt(float(e))])
    return buf.getvalue()


def write_results(records, out_dir) -> dict[str, str]:
    """Write ``results.csv``, ``summary.json``, ``ccdf.csv`` and ``timings.csv``.

    Only ``timings.csv`` holds wall-clock values, so the other three files are
    byte-identical across reruns with the same config and seed.
    """
    os.makedirs(out_dir, exist_ok=True)
    paths = {k: os.path.join(out_dir, f) for k, f in (
        ("results", "results.csv"), ("summary", "summary.json"),
        ("ccdf", "ccdf.csv"), ("timings", "timings.csv"))}
    with open(paths["results"], "w", newline="") as f:
        f.write(records_to_csv(records))
    with open(paths["summary"], "w") as f:
        json.dump({"conditions": summarize(records)}, f, indent=2, sort_keys=True)
        f.write("\n")
    with open(paths["ccdf"], "w", newline="") as f:
        f.write(ccdf_to_csv(records))
    with open(paths["timings"], "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["batch_length_s", "drift_level", "trial", "runtime_s"])
        for r in records:
            w.writerow([_fmt(r.batch_length), r.drift_level, r.trial, _fmt(r.runtime)])
    return paths


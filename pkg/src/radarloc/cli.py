"""``radarloc`` command line: simulate, build-map, make-batch, localize, sweep, bench."""
from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import formats
from .batch import batch_window, inject_drift, inject_rigid_offset
from .config import ConfigError, RunConfig
from .eval import MAP_STREAM, run_sweep, summarize, write_results
from .geometry import RigidOffset, Trajectory
from .mapping import aggregate_map
from .registration import NoBatchReturns, NoMapCoverage, fast_global_align
from .scene import generate_trajectory, simulate_scans

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NO_MAP = 3
EXIT_NO_BATCH = 4

LOCALIZE_STREAM = 2**31 - 2


def _seeds(base: int, stream: int, n: int) -> list[int]:
    ss = np.random.SeedSequence([base, stream])
    return [int(x) for x in ss.generate_state(n, dtype=np.uint32)]


def _prepare_out(cfg: RunConfig) -> str:
    out = cfg.output_dir
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "config.json"), "w") as f:
        f.write(cfg.to_json())
    return out


def _route(cfg: RunConfig):
    scene, wp = cfg.scene()
    t = cfg.raw["trajectory"]
    traj = generate_trajectory(wp, t["speed_mps"], t["scan_rate_hz"])
    return scene, traj


def cmd_simulate(cfg: RunConfig, args) -> int:
    """Mapping-pass scans along the configured route plus the true trajectory."""
    scene, traj = _route(cfg)
    dur = cfg.raw["simulate"].get("duration_s")
    if dur is not None:
        n = int(round(dur * cfg.raw["trajectory"]["scan_rate_hz"]))
        if n > len(traj):
            raise ConfigError(f"simulate.duration_s={dur} exceeds the route ({traj.times[-1]:.1f} s)")
        traj = Trajectory(traj.times[:n], traj.poses[:n])
    scans = simulate_scans(scene, traj, cfg.map_sensor(), _seeds(cfg.seed, MAP_STREAM, len(traj)))
    out = _prepare_out(cfg)
    formats.write_scans(os.path.join(out, "scans.jsonl"), scans)
    formats.write_trajectory(os.path.join(out, "truth.csv"), traj)
    formats.write_scene(os.path.join(out, "scene.json"), scene, cfg.scene()[1])
    print(f"wrote {len(scans)} scans over {traj.times[-1] - traj.times[0]:.1f} s to {out}")
    return EXIT_OK


def cmd_build_map(cfg: RunConfig, args) -> int:
    scans, _ = formats.read_scans(args.scans)
    if any(s.sensor_pose_truth is None for s in scans):
        raise ConfigError("every scan needs pose_truth to build a map")
    g = cfg.raw["gates"]
    store = aggregate_map(scans, [s.sensor_pose_truth for s in scans], g["speed_mps"], g["range_m"])
    if len(store) == 0:
        print("error: no map points survive the speed and range gates", file=sys.stderr)
        return EXIT_NO_MAP
    out = _prepare_out(cfg)
    path = os.path.join(out, "map.bin")
    formats.write_map(path, store, cfg.search().delta_t)
    xmin, ymin, xmax, ymax = store.extent()
    print(f"map: {len(store)} points, extent x [{xmin:.1f}, {xmax:.1f}] m, y [{ymin:.1f}, {ymax:.1f}] m -> {path}")
    return EXIT_OK


def cmd_make_batch(cfg: RunConfig, args) -> int:
    """Localization-pass batch with an injected rigid offset (and optional drift)."""
    scene, traj = _route(cfg)
    b = cfg.raw["batch"]
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, LOCALIZE_STREAM, 0]))
    t_end = b.get("end_time_s")
    if t_end is None:
        t_end = float(rng.uniform(traj.times[0] + b["duration_s"], traj.times[-1]))
    window = batch_window(traj, t_end, b["duration_s"])
    if len(window) == 0:
        raise ConfigError(f"batch end time {t_end} s is outside the route")
    scans = simulate_scans(scene, window, cfg.sensor(), _seeds(cfg.seed, LOCALIZE_STREAM, len(window)))
    odom = window
    drift = cfg.drift_levels()[0]
    if drift.model is not None:
        odom = inject_drift(window, drift.model, np.random.SeedSequence([cfg.seed, LOCALIZE_STREAM, 1]))
    if args.zero_offset:
        poses, offset = list(odom.poses), RigidOffset(0.0, 0.0, 0.0)
    else:
        poses, offset = inject_rigid_offset(odom.poses, cfg.prior(), np.random.SeedSequence([cfg.seed, LOCALIZE_STREAM, 2]))
    out = _prepare_out(cfg)
    path = os.path.join(out, "batch.jsonl")
    formats.write_batch_fixture(path, scans, poses, offset, {"end_time_s": float(window.times[-1]),
                                                             "drift_level": drift.label})
    print(f"batch: {len(scans)} scans ending at t={window.times[-1]:.1f} s -> {path}")
    return EXIT_OK


def cmd_localize(cfg: RunConfig, args) -> int:
    store = formats.read_map(args.map)
    scans, odom = formats.read_scans(args.batch)
    if odom is None:
        raise ConfigError("batch fixture lines need odom_pose")
    g = cfg.raw["gates"]
    try:
        res = fast_global_align(
            store, scans, odom, cfg.search(), cfg.model(), range_gate=g["range_m"],
            grid_half_extent=cfg.raw["registration"]["grid_half_extent_m"],
            rotation=cfg.raw["registration"]["rotation"],
            keep_volume=args.dump_correlation_volume is not None, workers=args.threads,
        )
    except NoBatchReturns as exc:
        print(f"error: no-batch-returns: {exc}", file=sys.stderr)
        return EXIT_NO_BATCH
    except NoMapCoverage as exc:
        print(f"error: no-map-coverage: {exc}", file=sys.stderr)
        return EXIT_NO_MAP
    th, est = res.theta_hat, res.prior_frame_offset()
    result = {
        "theta_hat": {"dx_m": th.dx, "dy_m": th.dy, "dphi_deg": math.degrees(th.dphi)},
        "estimated_offset": {"dx_m": est.dx, "dy_m": est.dy, "dphi_deg": math.degrees(est.dphi)},
        "peak_score": res.peak_score,
        "peak_index": list(res.peak_index),
        "runtime_s": res.runtime,
    }
    truth = formats.read_batch_truth(args.batch)
    if truth is not None:
        result["true_offset"] = {"dx_m": truth.dx, "dy_m": truth.dy, "dphi_deg": math.degrees(truth.dphi)}
        result["translation_error_m"] = math.hypot(est.dx - truth.dx, est.dy - truth.dy)
        result["heading_error_deg"] = abs(math.degrees(est.dphi - truth.dphi))
    out = _prepare_out(cfg)
    with open(os.path.join(out, "alignment.json"), "w") as f:
        json.dump(result, f, indent=2, sort_keys=True)
        f.write("\n")
    if args.dump_correlation_volume is not None:
        path = args.dump_correlation_volume or os.path.join(out, "correlation_volume.npz")
        spec = res.volume.spec
        np.savez_compressed(path, scores=res.volume.scores, delta_t_m=spec.delta_t,
                            delta_phi_rad=spec.delta_phi, n_l=spec.n_l, m=spec.m)
        print(f"correlation volume -> {path}")
    print(f"theta_hat: dx={th.dx:+.2f} m dy={th.dy:+.2f} m dphi={math.degrees(th.dphi):+.1f} deg "
          f"(peak {res.peak_score:.4g}, {res.runtime:.2f} s)")
    if truth is not None:
        print(f"error vs truth: {result['translation_error_m']:.3f} m, {result['heading_error_deg']:.2f} deg")
    return EXIT_OK


def cmd_sweep(cfg: RunConfig, args) -> int:
    sweep = cfg.sweep()
    out = _prepare_out(cfg)

    def progress(done, total):
        if done % max(1, total // 20) == 0 or done == total:
            print(f"  {done}/{total} trials", file=sys.stderr)

    records = run_sweep(sweep, workers=args.threads, progress=progress)
    write_results(records, out)
    for row in summarize(records):
        p95t, p95h = row.get("translation_error_p95_m"), row.get("heading_error_p95_deg")
        tail = "" if p95t is None else f" p95 {p95t:.3f} m / {p95h:.2f} deg"
        print(f"batch {row['batch_length_s']:g} s, drift {row['drift_level']}: "
              f"{row['trials']} trials, {row['failures']} failed{tail}")
    print(f"results -> {out}")
    return EXIT_OK


def cmd_bench(cfg: RunConfig, args) -> int:
    from .bench import format_report, run_benchmarks
    report = run_benchmarks(quick=args.quick)
    print(format_report(report))
    out = _prepare_out(cfg)
    with open(os.path.join(out, "bench.json"), "w") as f:
        json.dump(report, f, indent=2, sort_keys=True)
        f.write("\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON or YAML run configuration (defaults apply without one)")
    common.add_argument("--seed", type=int, help="override seeds.base")
    common.add_argument("--out", help="override output_dir")
    common.add_argument("--threads", type=int, default=1, help="worker processes / FFT threads")

    p = argparse.ArgumentParser(prog="radarloc", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="simulate mapping-pass scans")
    s = sub.add_parser("build-map", parents=[common], help="aggregate scans into a map")
    s.add_argument("--scans", required=True)
    s = sub.add_parser("make-batch", parents=[common], help="simulate a localization batch with a known offset")
    s.add_argument("--zero-offset", action="store_true", help="skip the rigid offset")
    s = sub.add_parser("localize", parents=[common], help="align a batch against a map")
    s.add_argument("--map", required=True)
    s.add_argument("--batch", required=True)
    s.add_argument("--dump-correlation-volume", nargs="?", const="", default=None, metavar="PATH",
                   help="save the correlation volume (.npz); default path inside --out")
    sub.add_parser("sweep", parents=[common], help="Monte-Carlo batch-length / drift sweep")
    s = sub.add_parser("bench", parents=[common], help="compiled vs fallback kernels and path timings")
    s.add_argument("--quick", action="store_true", help="small sizes only")
    return p


COMMANDS = {
    "simulate": cmd_simulate,
    "build-map": cmd_build_map,
    "make-batch": cmd_make_batch,
    "localize": cmd_localize,
    "sweep": cmd_sweep,
    "bench": cmd_bench,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig.load(args.config) if args.config else RunConfig.from_dict({})
        cfg = cfg.with_overrides(seed=args.seed, out=args.out)
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        for attr in ("scans", "map", "batch"):
            path = getattr(args, attr, None)
            if path is not None and not os.path.exists(path):
                raise ConfigError(f"--{attr} file not found: {path}")
        return COMMANDS[args.command](cfg, args)
    except (ConfigError, formats.FormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

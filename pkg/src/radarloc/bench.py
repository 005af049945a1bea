"""Timing of the compiled and pure-Python kernels and of the registration paths.

Run with ``python -m radarloc.bench [--quick]`` or ``radarloc bench``.
"""
from __future__ import annotations

import argparse
import json
import math
import time

import numpy as np

from .registration import kernels
from .registration.correlate import brute_force_volume, correlation_volume, naive_volume
from .registration.search import SearchSpec


def best_of(fn, repeat: int = 3) -> float:
    best = math.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def _sparse_grid(rng, n, fill=0.05):
    g = np.zeros((n, n))
    mask = rng.random((n, n)) < fill
    g[mask] = rng.random(mask.sum())
    return g


def kernel_timings(quick: bool = False, seed: int = 0) -> dict:
    """Per-backend wall time of each kernel on the same inputs."""
    rng = np.random.default_rng(seed)
    n_rot = 301 if quick else 1001
    n_spec = 301 if quick else 1225
    n_bf, h_bf = (32, 4) if quick else (64, 8)
    img = rng.random((n_rot, n_rot))
    half = np.fft.rfft2(rng.random((n_spec, n_spec)))
    a, b = rng.random((n_bf, n_bf)), rng.random((n_bf, n_bf))
    angles = np.radians([-3.0, 0.0, 3.0])
    cases = {
        f"rotate_nearest {n_rot}x{n_rot}": lambda: kernels.rotate_nearest(
            img, n_rot // 2, n_rot // 2, n_rot, n_rot, n_rot // 2, n_rot // 2, 0.05),
        f"half_spectrum_source_index n={n_spec}": lambda: kernels.half_spectrum_source_index(n_spec, 0.05),
        f"rotate_half_spectrum n={n_spec}": lambda: kernels.rotate_half_spectrum(half, n_spec, 0.05),
        f"brute_force_volume n={n_bf} h={h_bf} 3 rot": lambda: kernels.brute_force_volume(
            a, b, n_bf // 2, n_bf // 2, n_bf // 2, n_bf // 2, angles, h_bf),
    }
    out = {}
    for name, fn in cases.items():
        row = {}
        for backend in kernels.available_backends():
            with kernels.backend(backend):
                row[backend] = best_of(fn, 1 if backend == "python" and "brute" in name else 3)
        out[name] = row
    return out


def path_timings(quick: bool = False, seed: int = 0) -> dict:
    """Registration paths at the sizes used for the performance bounds.

    ``rotation_theorem_vs_naive``: one map FFT plus spectrum rotations versus
    three FFTs per rotation with ``n/2`` padding (``n = 512``, ``m = 18``,
    ``n_l = 120``). ``fft_vs_brute_force``: the FFT path versus the exhaustive
    triple loop (``n = 256``, ``n_l = 32``, ``m = 3``).
    """
    rng = np.random.default_rng(seed)
    out = {}
    n, spec = (128, SearchSpec(n_l=32, m=4)) if quick else (512, SearchSpec(n_l=120, m=18))
    dm, db = _sparse_grid(rng, n), _sparse_grid(rng, n)
    correlation_volume(dm, db, spec)  # warm the rotation index cache
    fast = best_of(lambda: correlation_volume(dm, db, spec))
    naive = best_of(lambda: naive_volume(dm, db, spec), 1)
    out["rotation_theorem_vs_naive"] = {"n": n, "n_l": spec.n_l, "m": spec.m, "rotation_theorem_s": fast,
                                        "naive_s": naive, "ratio": fast / naive}

    n, spec = (64, SearchSpec(n_l=8, m=3)) if quick else (256, SearchSpec(n_l=32, m=3))
    dm, db = _sparse_grid(rng, n), _sparse_grid(rng, n)
    correlation_volume(dm, db, spec)
    fft = best_of(lambda: correlation_volume(dm, db, spec))
    brute = best_of(lambda: brute_force_volume(dm, db, spec), 1)
    out["fft_vs_brute_force"] = {"n": n, "n_l": spec.n_l, "m": spec.m, "fft_s": fft, "brute_force_s": brute,
                                 "backend": kernels.BACKEND, "ratio": fft / brute}
    return out


def run_benchmarks(quick: bool = False) -> dict:
    return {"backends": kernels.available_backends(), "default_backend": kernels.BACKEND,
            "kernels": kernel_timings(quick), "paths": path_timings(quick)}


def format_report(report: dict) -> str:
    lines = [f"kernel backends: {', '.join(report['backends'])} (default {report['default_backend']})", ""]
    backends = report["backends"]
    lines.append(f"{'kernel':45s}" + "".join(f"{b:>12s}" for b in backends) + f"{'speedup':>10s}")
    for name, row in report["kernels"].items():
        cells = "".join(f"{row[b] * 1e3:10.2f}ms" for b in backends)
        sp = f"{row['python'] / row['cython']:9.1f}x" if "cython" in row else ""
        lines.append(f"{name:45s}{cells}{sp}")
    lines.append("")
    r = report["paths"]["rotation_theorem_vs_naive"]
    lines.append(f"n={r['n']} m={r['m']}: rotation theorem {r['rotation_theorem_s']:.3f} s, "
                 f"per-rotation FFTs {r['naive_s']:.3f} s, ratio {r['ratio']:.3f}")
    r = report["paths"]["fft_vs_brute_force"]
    lines.append(f"n={r['n']} n_l={r['n_l']} m={r['m']}: FFT {r['fft_s']:.4f} s, "
                 f"brute force ({r['backend']}) {r['brute_force_s']:.3f} s, ratio {r['ratio']:.4f}")
    return "\n".join(lines)


def main(argv=None) -> None:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--quick", action="store_true")
    p.add_argument("--json", help="also write the report here")
    args = p.parse_args(argv)
    report = run_benchmarks(args.quick)
    print(format_report(report))
    if args.json:
        with open(args.json, "w") as f:
            json.dump(report, f, indent=2, sort_keys=True)


if __name__ == "__main__":
    main()

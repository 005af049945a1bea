import json
import subprocess
import sys

import numpy as np
import pytest

from radarloc import formats
from radarloc.cli import EXIT_CONFIG, EXIT_NO_BATCH, EXIT_NO_MAP, EXIT_OK, main
from radarloc.config import DEFAULTS, ConfigError, RunConfig


def write_cfg(path, **d):
    path.write_text(json.dumps(d))
    return str(path)


@pytest.fixture(scope="module")
def run(tmp_path_factory):
    """Simulate, build a map and make a batch once for the module."""
    root = tmp_path_factory.mktemp("cli")
    cfg = write_cfg(root / "cfg.json", simulate={"duration_s": 30.0},
                    batch={"duration_s": 4.0, "end_time_s": 20.0})
    assert main(["simulate", "--config", cfg, "--out", str(root / "sim")]) == EXIT_OK
    assert main(["build-map", "--config", cfg, "--scans", str(root / "sim" / "scans.jsonl"),
                 "--out", str(root / "map")]) == EXIT_OK
    assert main(["make-batch", "--config", cfg, "--out", str(root / "batch")]) == EXIT_OK
    return root, cfg


def test_simulate_outputs(run):
    root, _ = run
    scans, odom = formats.read_scans(root / "sim" / "scans.jsonl")
    assert len(scans) == 300 and odom is None
    assert len(formats.read_trajectory(root / "sim" / "truth.csv")) == 300
    echoed = json.loads((root / "sim" / "config.json").read_text())
    assert echoed["simulate"]["duration_s"] == 30.0
    assert echoed["trajectory"] == DEFAULTS["trajectory"]


def test_simulate_is_byte_identical(run, tmp_path):
    root, cfg = run
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path)]) == EXIT_OK
    for name in ("scans.jsonl", "truth.csv", "scene.json"):
        assert (tmp_path / name).read_bytes() == (root / "sim" / name).read_bytes(), name
    a, b = (json.loads((d / "config.json").read_text()) for d in (tmp_path, root / "sim"))
    assert a.pop("output_dir") != b.pop("output_dir") and a == b
    assert main(["simulate", "--config", cfg, "--seed", "5", "--out", str(tmp_path / "s5")]) == EXIT_OK
    assert (tmp_path / "s5" / "scans.jsonl").read_bytes() != (root / "sim" / "scans.jsonl").read_bytes()


def test_localize_recovers_offset(run, tmp_path):
    root, cfg = run
    rc = main(["localize", "--config", cfg, "--map", str(root / "map" / "map.bin"),
               "--batch", str(root / "batch" / "batch.jsonl"), "--out", str(tmp_path),
               "--dump-correlation-volume"])
    assert rc == EXIT_OK
    res = json.loads((tmp_path / "alignment.json").read_text())
    assert res["translation_error_m"] <= 0.3 and res["heading_error_deg"] <= 1.0
    with np.load(tmp_path / "correlation_volume.npz") as z:
        assert z["scores"].shape == (37, 121, 121)


def test_zero_offset_batch(run, tmp_path):
    _, cfg = run
    assert main(["make-batch", "--config", cfg, "--zero-offset", "--out", str(tmp_path)]) == EXIT_OK
    truth = formats.read_batch_truth(tmp_path / "batch.jsonl")
    assert (truth.dx, truth.dy, truth.dphi) == (0.0, 0.0, 0.0)


def test_localize_outside_map(run, tmp_path):
    root, _ = run
    scans, odom = formats.read_scans(root / "batch" / "batch.jsonl")
    far = [type(p)(p.x + 1e4, p.y, p.phi) for p in odom]
    formats.write_scans(tmp_path / "far.jsonl", scans, far)
    rc = main(["localize", "--map", str(root / "map" / "map.bin"), "--batch", str(tmp_path / "far.jsonl"),
               "--out", str(tmp_path)])
    assert rc == EXIT_NO_MAP


def test_localize_empty_batch(run, tmp_path, capsys):
    root, _ = run
    scans, odom = formats.read_scans(root / "batch" / "batch.jsonl")
    empty = [type(s)(s.timestamp, []) for s in scans]
    formats.write_scans(tmp_path / "empty.jsonl", empty, odom)
    rc = main(["localize", "--map", str(root / "map" / "map.bin"), "--batch", str(tmp_path / "empty.jsonl"),
               "--out", str(tmp_path)])
    assert rc == EXIT_NO_BATCH
    assert "no-batch-returns" in capsys.readouterr().err


def test_build_map_empty_after_gates(run, tmp_path):
    root, _ = run
    cfg = write_cfg(tmp_path / "c.json", gates={"range_m": 0.01})
    assert main(["build-map", "--config", cfg, "--scans", str(root / "sim" / "scans.jsonl"),
                 "--out", str(tmp_path)]) == EXIT_NO_MAP


@pytest.mark.parametrize("cfg", [
    {"search": {"n_l_cells": 7}},
    {"unknown_key": 1},
    {"sensor": {"detection_prob": 2.0}},
    {"scene": {"file": "missing.json"}},
])
def test_bad_config_exit_code(tmp_path, cfg, capsys):
    path = write_cfg(tmp_path / "bad.json", **cfg)
    assert main(["simulate", "--config", path, "--out", str(tmp_path)]) == EXIT_CONFIG
    assert "error" in capsys.readouterr().err
    assert not (tmp_path / "scans.jsonl").exists()


def test_config_errors_other_paths(tmp_path):
    (tmp_path / "x.json").write_text("{not json")
    assert main(["simulate", "--config", str(tmp_path / "x.json")]) == EXIT_CONFIG
    assert main(["simulate", "--config", str(tmp_path / "nope.json")]) == EXIT_CONFIG
    assert main(["localize", "--map", str(tmp_path / "m"), "--batch", str(tmp_path / "b")]) == EXIT_CONFIG
    cfg = write_cfg(tmp_path / "long.json", simulate={"duration_s": 1e5})
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path)]) == EXIT_CONFIG


def test_yaml_config(tmp_path):
    (tmp_path / "c.yaml").write_text("trajectory:\n  speed_mps: 4.0\nsweep:\n  trials: 3\n")
    cfg = RunConfig.load(tmp_path / "c.yaml")
    assert cfg.raw["trajectory"]["speed_mps"] == 4.0 and cfg.sweep().trials == 3
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"drift": [{"label": "x", "position_law": "cubic"}]})


def test_console_script_help():
    out = subprocess.run([sys.executable, "-m", "radarloc.cli", "--help"], capture_output=True, text=True)
    assert out.returncode == 0
    for cmd in ("simulate", "build-map", "make-batch", "localize", "sweep", "bench"):
        assert cmd in out.stdout

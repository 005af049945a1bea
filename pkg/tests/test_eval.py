import filecmp
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from radarloc.batch import DriftModel, OffsetPrior
from radarloc.eval import (
    Ccdf,
    DriftLevel,
    SweepConfig,
    build_sweep_map,
    min_samples,
    percentile,
    run_sweep,
    summarize,
    write_results,
)
from radarloc.registration import SearchSpec
from radarloc.scene import SensorConfig, urban_loop_scene


def test_percentile_examples():
    assert percentile(np.zeros(50), 0.95) == 0.0
    assert percentile(np.arange(1, 101), 0.5) == 50.5
    assert percentile(np.arange(1, 101), 0.95) == pytest.approx(95.05)
    u = np.random.default_rng(0).random(10_000)
    assert abs(percentile(u, 0.95) - 0.95) <= 0.02


def test_percentile_sample_floor():
    assert min_samples(0.95) == 20 and min_samples(0.5) == 2 and min_samples(0.99) == 100
    with pytest.raises(ValueError):
        percentile(np.arange(19), 0.95)
    percentile(np.arange(20), 0.95)
    with pytest.raises(ValueError):
        percentile(np.arange(20), 1.0)


def test_percentile_failed_trials():
    v = np.r_[np.zeros(19), math.inf]
    assert percentile(v, 0.5) == 0.0
    assert math.isinf(percentile(v, 0.95))  # position 18.05 interpolates toward the inf
    v = np.r_[np.zeros(39), math.inf]
    assert percentile(v, 0.95) == 0.0


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 1e6, allow_nan=False), min_size=1, max_size=200))
def test_ccdf_monotone_and_bounded(errs):
    c = Ccdf.from_errors(errs)
    assert np.all(np.diff(c.values) >= 0)
    assert np.all(np.diff(c.exceedance) <= 0)
    assert c.exceedance[-1] == 0.0
    assert np.all((c.exceedance >= 0) & (c.exceedance <= 1))
    for x in (c.values[0], c.values[len(c) // 2]):
        assert c.at(x) == pytest.approx(np.mean(np.asarray(errs) > x))


def test_ccdf_rejects_bad_input():
    with pytest.raises(ValueError):
        Ccdf.from_errors([])
    with pytest.raises(ValueError):
        Ccdf.from_errors([1.0, float("nan")])


def small_cfg(**kw):
    scene, wp = urban_loop_scene(0)
    base = dict(scene=scene, waypoints=wp, search=SearchSpec(n_l=40, m=3), grid_half_extent=30.0,
                batch_lengths=(3.0,), trials=2, base_seed=11)
    base.update(kw)
    return SweepConfig(**base)


@pytest.fixture(scope="module")
def noiseless_ctx():
    cfg = small_cfg(sensor=SensorConfig.noiseless())
    return cfg, build_sweep_map(cfg)


def test_noiseless_trial_within_one_cell(noiseless_ctx):
    cfg, ctx = noiseless_ctx
    cfg = small_cfg(sensor=SensorConfig.noiseless(), trials=1, prior=OffsetPrior(0.5, math.radians(1.0)))
    (rec,) = run_sweep(cfg, context=ctx)
    assert rec.status == "ok"
    e, t = rec.estimated_offset, rec.true_offset
    assert max(abs(e.dx - t.dx), abs(e.dy - t.dy)) <= cfg.search.delta_t + 1e-9
    assert rec.heading_error <= cfg.search.delta_phi + 1e-9


def test_paired_conditions_share_draws(noiseless_ctx):
    _, ctx = noiseless_ctx
    cfg = small_cfg(sensor=SensorConfig.noiseless(), trials=2, paired=True,
                    drift_levels=(DriftLevel("none"), DriftLevel("drift", DriftModel("linear", 0.3, 0.0))))
    recs = run_sweep(cfg, context=ctx)
    assert [r.true_offset for r in recs[:2]] == [r.true_offset for r in recs[2:]]
    unpaired = run_sweep(small_cfg(sensor=SensorConfig.noiseless(), trials=2,
                                   drift_levels=cfg.drift_levels), context=ctx)
    assert unpaired[0].true_offset != unpaired[2].true_offset


def test_summary_and_determinism(tmp_path):
    cfg = small_cfg(trials=2, batch_lengths=(2.0, 3.0))
    ctx = build_sweep_map(cfg)
    a, b = run_sweep(cfg, context=ctx), run_sweep(cfg, context=ctx)
    write_results(a, tmp_path / "a")
    write_results(b, tmp_path / "b")
    for name in ("results.csv", "summary.json", "ccdf.csv"):
        assert filecmp.cmp(tmp_path / "a" / name, tmp_path / "b" / name, shallow=False), name
    assert (tmp_path / "a" / "timings.csv").exists()
    rows = summarize(a)
    assert [r["batch_length_s"] for r in rows] == [2.0, 3.0]
    assert rows[0]["translation_error_p95_m"] is None  # 2 trials < 20
    assert rows[0]["translation_error_p50_m"] is not None


def test_sweep_workers_do_not_change_results(noiseless_ctx):
    cfg, ctx = noiseless_ctx
    one = run_sweep(cfg, context=ctx)
    two = run_sweep(cfg, workers=2, context=ctx)
    assert [(r.estimated_offset, r.seed) for r in one] == [(r.estimated_offset, r.seed) for r in two]


def test_sweep_config_validation():
    with pytest.raises(ValueError):
        small_cfg(trials=0)
    with pytest.raises(ValueError):
        small_cfg(batch_lengths=())

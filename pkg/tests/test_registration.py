import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from radarloc.batch import assemble_batch, batch_window, inject_rigid_offset, OffsetPrior
from radarloc.geometry import Pose2D, RigidOffset, offset_trajectory
from radarloc.mapping import InverseSensorModel, MapStore, aggregate_map, anchored_grid, apply_scan
from radarloc.registration import (
    CONVENTIONS,
    CorrelationVolume,
    NoBatchReturns,
    NoMapCoverage,
    SearchSpec,
    brute_force_align,
    brute_force_volume,
    compute_l2_distance,
    correlation_volume,
    efficient_odd_size,
    fast_global_align,
    fft_align,
    fft_correlate_translations,
    naive_volume,
    rotate_spectrum,
    select_peak,
)
from radarloc.registration.align import batch_grid_from_groups, map_grid_from_points
from radarloc.scene import SensorConfig, generate_trajectory, simulate_scans, urban_loop_scene

MODEL = InverseSensorModel()


def impulse(n, p, q, v=1.0):
    g = np.zeros((n, n))
    g[n // 2 + p, n // 2 + q] = v
    return g


def direct_correlation(a, b, h):
    """Sliding-window sum_x a[x] * b[x - s] over |s| <= h, zero outside the grids."""
    n0, n1 = a.shape
    out = np.zeros((2 * h + 1, 2 * h + 1))
    for p in range(-h, h + 1):
        for q in range(-h, h + 1):
            x0 = slice(max(0, p), min(n0, n0 + p))
            x1 = slice(max(0, q), min(n1, n1 + q))
            y0 = slice(max(0, -p), min(n0, n0 - p))
            y1 = slice(max(0, -q), min(n1, n1 - q))
            out[p + h, q + h] = np.sum(a[x0, x1] * b[y0, y1])
    return out


def test_search_spec_defaults_and_prior_sizing():
    s = SearchSpec()
    assert (s.n_l, s.m, s.shape) == (120, 18, (37, 121, 121))
    s = SearchSpec.from_prior(2.0, math.radians(3.0))
    assert (s.n_l, s.m) == (120, 9)
    with pytest.raises(ValueError):
        SearchSpec(n_l=7)


def test_self_alignment_zero_window():
    g = np.random.default_rng(0).random((16, 16))
    r = brute_force_align(g, g, SearchSpec(n_l=0, m=0))
    assert r.theta_hat == RigidOffset(0, 0, 0)


def test_impulse_shift_convention():
    spec = SearchSpec(n_l=8, m=0)
    m, b = impulse(21, 7, 8), impulse(21, 5, 5)
    for r in (brute_force_align(m, b, spec), fft_align(m, b, spec, rotation="spatial"), fft_align(m, b, spec)):
        assert r.theta_hat.dx == pytest.approx(0.2) and r.theta_hat.dy == pytest.approx(0.3)
        assert r.volume.conventions == CONVENTIONS


def test_empty_grids_rejected():
    with pytest.raises(ValueError):
        brute_force_align(np.zeros((8, 8)), np.ones((8, 8)), SearchSpec(n_l=2, m=0))
    with pytest.raises(ValueError):
        brute_force_align(np.zeros((0, 0)), np.zeros((0, 0)), SearchSpec(n_l=0, m=0))
    grid = anchored_grid(1.0, 0.1, MODEL.l0)
    with pytest.raises(ValueError):
        brute_force_align(grid, grid, SearchSpec(n_l=2, m=0))


def test_translation_correlation_examples():
    a = impulse(32, 0, 0, 0.2)
    s = fft_correlate_translations(a, a, 8)
    assert np.unravel_index(np.argmax(s), s.shape) == (4, 4)
    assert s.max() == pytest.approx(0.04)
    s = fft_correlate_translations(impulse(32, 2, 3), impulse(32, 0, 0), 8)
    assert np.unravel_index(np.argmax(s), s.shape) == (4 + 2, 4 + 3)
    with pytest.raises(ValueError):
        fft_correlate_translations(np.ones((8, 8)), np.ones((8, 9)), 2)


@pytest.mark.parametrize("shape, n_l", [((32, 32), 8), ((40, 40), 16), ((17, 17), 16)])
def test_translation_correlation_matches_direct_sum(shape, n_l):
    rng = np.random.default_rng(n_l)
    a, b = rng.random(shape), rng.random(shape)
    ref = direct_correlation(a, b, n_l // 2)
    got = fft_correlate_translations(a, b, n_l)
    np.testing.assert_allclose(got, ref, rtol=1e-9)


def test_padding_sizes_do_not_change_window():
    rng = np.random.default_rng(3)
    a, b = rng.random((30, 30)), rng.random((30, 30))
    base = fft_correlate_translations(a, b, 10)
    np.testing.assert_allclose(fft_correlate_translations(a, b, 10, padding="full"), base, rtol=1e-9)
    np.testing.assert_allclose(fft_correlate_translations(a, b, 10, fft_size=97), base, rtol=1e-9)
    with pytest.raises(ValueError):
        fft_correlate_translations(a, b, 10, fft_size=39)


def test_efficient_odd_size():
    assert efficient_odd_size(1241) == 1323
    assert efficient_odd_size(10) == 11
    for n in range(1, 400):
        k = efficient_odd_size(n)
        assert k >= n and k % 2 == 1


def test_rotate_spectrum_identity_and_quarter_turn():
    rng = np.random.default_rng(4)
    n = 15
    spec = rng.random((n, n)) + 1j * rng.random((n, n))
    np.testing.assert_array_equal(rotate_spectrum(spec, 0.0), spec)
    out = rotate_spectrum(spec, math.pi / 2)
    c = n // 2
    k0, k1 = np.meshgrid(np.arange(n) - c, np.arange(n) - c, indexing="ij")
    np.testing.assert_array_equal(out, spec[k1 + c, -k0 + c])
    with pytest.raises(ValueError):
        rotate_spectrum(spec[:, :-1], 0.1)


def test_rotated_spectrum_approximates_rotated_image():
    # a smooth blob keeps its energy away from the corners of the spectrum
    n = 65
    x = np.arange(n) - n // 2
    img = np.exp(-((x[:, None] - 6.0) ** 2 + (x[None, :] + 3.0) ** 2) / 8.0)
    ang = math.radians(7.0)
    spec = np.fft.fftshift(np.fft.fft2(np.fft.ifftshift(img)))
    rot = np.fft.fftshift(np.real(np.fft.ifft2(np.fft.ifftshift(rotate_spectrum(spec, ang)))))
    c, s = math.cos(ang), math.sin(ang)
    z0, z1 = x[:, None], x[None, :]
    expect = np.exp(-((c * z0 + s * z1 - 6.0) ** 2 + (-s * z0 + c * z1 + 3.0) ** 2) / 8.0)
    assert np.unravel_index(np.argmax(rot), rot.shape) == np.unravel_index(np.argmax(expect), expect.shape)
    assert np.max(np.abs(rot - expect)) < 0.15  # nearest-neighbour spectral resampling


def test_l2_examples():
    spec = SearchSpec(n_l=4, m=0)
    g = np.random.default_rng(5).random((12, 12))
    assert compute_l2_distance(g, g, RigidOffset(), spec) == 0.0
    a, b = impulse(12, 1, 1, 3.0), impulse(12, -2, 0, 2.0)
    assert compute_l2_distance(a, b, RigidOffset(), spec) == pytest.approx((9 + 4) * 0.01)
    assert compute_l2_distance(a, b, RigidOffset(), spec, circular=True) == pytest.approx((9 + 4) * 0.01)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_l2_argmin_equals_circular_correlation_argmax(seed):
    rng = np.random.default_rng(seed)
    n = 16
    a, b = rng.random((n, n)), rng.random((n, n))
    spec = SearchSpec(delta_t=1.0, n_l=0, m=0)
    corr = np.real(np.fft.ifft2(np.fft.fft2(a) * np.conj(np.fft.fft2(b))))
    l2 = np.array([[compute_l2_distance(a, b, RigidOffset(p, q, 0.0), spec, circular=True)
                    for q in range(n)] for p in range(n)])
    assert np.argmin(l2) == np.argmax(corr)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.01, 100.0), st.booleans())
def test_positive_scaling_keeps_argmax(seed, c, scale_map):
    rng = np.random.default_rng(seed)
    a, b = rng.random((24, 24)), rng.random((24, 24))
    spec = SearchSpec(n_l=6, m=2, delta_phi=math.radians(4))
    r0 = fft_align(a, b, spec, rotation="spatial")
    r1 = fft_align(a * c if scale_map else a, b if scale_map else b * c, spec, rotation="spatial")
    assert r0.peak_index == r1.peak_index


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(8, 28), st.integers(0, 3), st.integers(0, 3))
def test_spatial_fft_path_equals_brute_force(seed, n, h, m):
    rng = np.random.default_rng(seed)
    a, b = rng.random((n, n)), rng.random((n, n))
    spec = SearchSpec(n_l=2 * min(h, n // 2), m=m, delta_phi=math.radians(3))
    bf = brute_force_volume(a, b, spec).scores
    fv = correlation_volume(a, b, spec, rotation="spatial").scores
    np.testing.assert_allclose(fv, bf, rtol=1e-9, atol=1e-9 * bf.max())
    assert select_peak(fv) == select_peak(bf)


def test_naive_path_matches_brute_force():
    rng = np.random.default_rng(6)
    a, b = rng.random((20, 20)), rng.random((20, 20))
    spec = SearchSpec(n_l=6, m=2, delta_phi=math.radians(2))
    np.testing.assert_allclose(naive_volume(a, b, spec).scores, brute_force_volume(a, b, spec).scores, rtol=1e-9)


def test_spectral_requires_odd_size():
    a = np.ones((10, 10))
    with pytest.raises(ValueError):
        correlation_volume(a, a, SearchSpec(n_l=2, m=1), rotation="spectral", fft_size=14)
    with pytest.raises(ValueError):
        correlation_volume(a, a, SearchSpec(n_l=2, m=1), rotation="polar")


def test_tie_break_rule():
    spec = SearchSpec(n_l=4, m=1)
    v = np.zeros(spec.shape)
    assert select_peak(v) == (1, 2, 2)
    v[2, 2, 2] = v[1, 4, 2] = 1.0  # rotation step +1 at zero shift vs zero rotation at p = +2
    assert select_peak(v) == (1, 4, 2)
    v[:] = 0
    v[0, 2, 2] = v[2, 2, 2] = 1.0
    assert select_peak(v) == (0, 2, 2)
    v[:] = 0
    v[1, 3, 2] = v[1, 2, 1] = 1.0
    assert select_peak(v) == (1, 2, 1)
    with pytest.raises(ValueError):
        select_peak(np.full(spec.shape, np.nan))
    with pytest.raises(ValueError):
        CorrelationVolume(np.zeros((2, 2, 2)), spec)


# scene-level checks

@pytest.fixture(scope="module")
def urban():
    scene, wp = urban_loop_scene(0)
    traj = generate_trajectory(wp, 6.0, 10.0)
    cfg = SensorConfig.noiseless()
    store = aggregate_map(simulate_scans(scene, traj, cfg, range(len(traj))), traj.poses)
    return scene, traj, cfg, store


def _batch(urban, t_end, seed0=100_000):
    scene, traj, cfg, _ = urban
    w = batch_window(traj, t_end, 5.0)
    return w, simulate_scans(scene, w, cfg, range(seed0, seed0 + len(w)))


def test_noiseless_self_alignment(urban):
    w, scans = _batch(urban, 60.0)
    r = fast_global_align(urban[3], scans, w.poses)
    assert abs(r.theta_hat.dx) <= 0.1 and abs(r.theta_hat.dy) <= 0.1
    assert abs(r.theta_hat.dphi) <= math.radians(1.0) + 1e-12


def test_noiseless_known_offset(urban):
    w, scans = _batch(urban, 90.0)
    off = RigidOffset(-1.3, 0.8, math.radians(2.0))
    r = fast_global_align(urban[3], scans, offset_trajectory(w.poses, off))
    est = r.prior_frame_offset()
    assert abs(est.dx - off.dx) <= 0.1 and abs(est.dy - off.dy) <= 0.1
    assert abs(est.dphi - off.dphi) <= math.radians(1.0)


def test_fast_global_align_equals_brute_force_on_small_spec(urban):
    w, scans = _batch(urban, 30.0)
    odom, _ = inject_rigid_offset(w.poses, OffsetPrior(0.2, math.radians(1.0)), 1)
    spec = SearchSpec(n_l=8, m=2)
    r = fast_global_align(urban[3], scans, odom, spec, rotation="spatial", grid_half_extent=7.0)
    anchor = odom[-1].position
    from radarloc.mapping import query_region
    mg = map_grid_from_points(query_region(urban[3], anchor, 7.0) - anchor, 7.0, 0.1, MODEL)
    bg = batch_grid_from_groups(assemble_batch(scans, odom, grouped=True), 7.0, 0.1, MODEL)
    ref = brute_force_align(mg, bg, spec)
    assert ref.peak_index == r.peak_index
    np.testing.assert_allclose(r.volume.scores, ref.volume.scores, rtol=1e-9, atol=1e-9 * ref.peak_score)


def test_alignment_errors(urban):
    w, scans = _batch(urban, 60.0)
    with pytest.raises(NoBatchReturns):
        fast_global_align(urban[3], [], [])
    far = [Pose2D(p.x + 5000.0, p.y, p.phi) for p in w.poses]
    with pytest.raises(NoMapCoverage):
        fast_global_align(urban[3], scans, far)
    with pytest.raises(NoMapCoverage):
        fast_global_align(MapStore(np.zeros((0, 2))), scans, w.poses)
    empty = [type(s)(s.timestamp, np.zeros((0, 2))) for s in scans]
    with pytest.raises(NoBatchReturns):
        fast_global_align(urban[3], empty, w.poses)


@pytest.mark.parametrize("deg", [-9.0, -4.0, 0.0, 5.0, 9.0])
def test_spectral_and_spatial_rotation_agree_on_peak(urban, deg):
    scene, traj, _, store = urban
    cfg = SensorConfig()
    w = batch_window(traj, 70.0, 5.0)
    scans = simulate_scans(scene, w, cfg, range(200_000, 200_000 + len(w)))
    odom = offset_trajectory(w.poses, RigidOffset(0.7, -1.1, math.radians(deg)))
    a = fast_global_align(store, scans, odom, rotation="spectral", keep_volume=False)
    b = fast_global_align(store, scans, odom, rotation="spatial", keep_volume=False)
    assert a.peak_index[0] == b.peak_index[0]
    assert max(abs(a.peak_index[1] - b.peak_index[1]), abs(a.peak_index[2] - b.peak_index[2])) <= 1

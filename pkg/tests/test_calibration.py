import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from rtitrack.calibration import (
    CalibrationIncomplete,
    CalibrationProfile,
    ProfileMismatch,
    calibrate,
    channel_frequency,
    fade_levels,
    mean_rss,
)
from rtitrack.geometry import projection_for
from rtitrack.imaging import Frame
from rtitrack.simulator import Simulation

from conftest import walk_scenario

gains = arrays(np.float64, st.tuples(st.integers(1, 8), st.integers(1, 6)),
               elements=st.floats(-100, -20, allow_nan=False))


@pytest.mark.parametrize("row, expected", [
    ([-60, -60], [0, 0]),
    ([-55, -50, -58], [3, 8, 0]),
    ([-50, -47, -53], [3, 6, 0]),
])
def test_fade_examples(row, expected):
    assert np.allclose(fade_levels(np.array([row], dtype=float)), [expected])


@given(gains, st.floats(-30, 30))
def test_fade_properties(G, shift):
    F = fade_levels(G)
    assert np.all(F >= 0)
    assert np.all(F.min(axis=1) == 0)
    per_row = np.linspace(-1, 1, G.shape[0])[:, None] * shift
    assert np.allclose(fade_levels(G + per_row), F, atol=1e-9)


def test_channel_frequency():
    assert channel_frequency(11) == 2405
    assert channel_frequency(26) == 2480
    for bad in (10, 27, 11.5):
        with pytest.raises(ValueError):
            channel_frequency(bad)


def _projection(cfg, cache_dir):
    im = cfg.imaging
    return projection_for(cfg.geometry(), cfg.grid(), excess=im.excess_path, sigma_x=im.sigma_x,
                          sigma_n=im.sigma_n, delta_c=im.delta_c, cache_dir=cache_dir)


def _calibrate(cfg, frames, cache_dir, **kw):
    im = cfg.imaging
    return calibrate(frames, _projection(cfg, cache_dir), cfg.grid(), cfg.channels,
                     sigma_g=im.sigma_g, r_g=im.kernel_radius, **kw)


def test_constant_trace(small_cfg, cache_dir):
    M, K = small_cfg.geometry().n_links, len(small_cfg.channels)
    frames = [Frame(k, k / 10, np.full((M, K), -50.0)) for k in range(40)]
    prof = _calibrate(small_cfg, frames, cache_dir)
    assert np.all(prof.mean_rss == -50) and np.all(prof.fade == 0)
    assert prof.empty_baseline == 0


def test_missing_pair_is_named(small_cfg, cache_dir):
    M, K = small_cfg.geometry().n_links, len(small_cfg.channels)
    frames = []
    for k in range(40):
        rss = np.full((M, K), -50.0)
        rss[7, 2] = np.nan
        frames.append(Frame(k, k / 10, rss))
    with pytest.raises(CalibrationIncomplete) as info:
        _calibrate(small_cfg, frames, cache_dir)
    assert info.value.missing == [(7, 26)]
    assert "(link 7, channel 26)" in str(info.value)


def test_too_short_calibration(small_cfg, cache_dir):
    M, K = small_cfg.geometry().n_links, len(small_cfg.channels)
    with pytest.raises(ValueError):
        _calibrate(small_cfg, [Frame(k, 0, np.zeros((M, K))) for k in range(10)], cache_dir)


def test_mean_rss_skips_missing():
    a = np.array([[1.0, np.nan]])
    b = np.array([[3.0, 5.0]])
    m, n = mean_rss([Frame(0, 0, a), Frame(1, 0, b)], (11, 12))
    assert n == 2 and np.allclose(m, [[2.0, 5.0]])


def test_simulated_fades_recovered(cache_dir):
    sc = walk_scenario(noise_db=0.0, drop_rate=0.0, calibration_frames=40)
    sim = Simulation(sc)
    prof = _calibrate(sc.config, list(sim.calibration_frames()), cache_dir,
                      tx_power=sc.config.tx_power)
    assert np.abs(prof.fade - sim.channels.fade).max() < 0.1


def test_frame_order_does_not_matter(cache_dir):
    sc = walk_scenario(noise_db=1.0, drop_rate=0.05, calibration_frames=40)
    frames = list(Simulation(sc).calibration_frames())
    a = _calibrate(sc.config, frames, cache_dir)
    b = _calibrate(sc.config, frames[::-1], cache_dir)
    assert np.allclose(a.mean_rss, b.mean_rss, atol=1e-12)
    assert np.allclose(a.fade, b.fade, atol=1e-12)
    assert a.empty_baseline == pytest.approx(b.empty_baseline, rel=1e-12)
    assert a.empty_baseline >= 0


def test_profile_round_trip_and_hash(tmp_path, small_cfg):
    prof = CalibrationProfile(np.array([[-50.0, -51.5]]), np.array([[1.5, 0.0]]), 0.003,
                              (11, 26), "abc123", 40)
    path = tmp_path / "p.json"
    prof.save(path)
    back = CalibrationProfile.load(path, expected_hash="abc123")
    assert back.to_json() == prof.to_json()
    with pytest.raises(ProfileMismatch):
        CalibrationProfile.load(path, expected_hash="other")

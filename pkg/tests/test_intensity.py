import math

import numpy as np
import pytest

from evprep import (
    IntensityConfig,
    IntensityState,
    Method,
    SegmentConfig,
    SensorGeometry,
    run_sequence,
    simulate_events,
    update_adaptive_batch,
    update_per_event,
)
from evprep.errors import StreamOrderError
from evprep.events import make_events
from conftest import disc_scene

GEO = SensorGeometry(16, 12)
SEG = SegmentConfig(50_000, 10)


def decay_cfg(**kw):
    return IntensityConfig(Method.PER_EVENT_DECAY, **kw)


def adaptive_cfg(**kw):
    kw.setdefault("bin_duration_us", 5000)
    return IntensityConfig(Method.ADAPTIVE_BATCH, **kw)


def test_no_events_state_unchanged():
    state = IntensityState.initial(GEO, decay_cfg())
    before = state.frame.copy()
    update_per_event(state, make_events([], [], [], []))
    assert np.array_equal(state.frame, before)


def test_single_event_on_zero_pixel():
    state = IntensityState.initial(GEO, decay_cfg(threshold=0.7))
    update_per_event(state, make_events([123], [2], [3], [1]))
    assert state.frame[3, 2] == pytest.approx(0.7)
    assert state.frame.sum() == pytest.approx(0.7)


def test_event_pair_closed_form():
    # positive then negative at one pixel: final value (e^{-a dt} - 1) * C
    alpha, C, dt_us = 5.0, 1.0, 20_000
    state = IntensityState.initial(GEO, decay_cfg(alpha_per_s=alpha, threshold=C))
    update_per_event(state, make_events([1000, 1000 + dt_us], [4, 4], [5, 5], [1, -1]))
    expected = (math.exp(-alpha * dt_us * 1e-6) - 1.0) * C
    assert state.frame[5, 4] == pytest.approx(expected, rel=1e-12)


def test_unsorted_events_rejected():
    state = IntensityState.initial(GEO, decay_cfg())
    with pytest.raises(StreamOrderError):
        update_per_event(state, make_events([10, 5], [0, 0], [0, 0], [1, 1]))


def test_adaptive_silent_bin_bit_identical(rng):
    state = IntensityState.initial(GEO, adaptive_cfg())
    state.frame[:] = rng.normal(size=state.frame.shape)
    before = state.frame.copy()
    update_adaptive_batch(state, np.zeros(state.frame.shape, dtype=np.int64), 0)
    assert np.array_equal(state.frame, before)
    assert state.last_update_time_us == state.config.bin_duration_us


def test_adaptive_pure_decay():
    cfg = adaptive_cfg(alpha_per_s=5.0, normalizer=5000)
    state = IntensityState.initial(GEO, cfg)
    state.frame[:] = 3.0
    signed = np.zeros(state.frame.shape, dtype=np.int64)
    update_adaptive_batch(state, signed, 5000)
    assert state.frame[0, 0] == pytest.approx(3.0 * math.exp(-5.0 * 0.005), rel=1e-12)


def test_adaptive_derived_value():
    # alpha=5/s, dt=5ms, n=N=5000, v=1, E=+2, C=1 -> e^-0.025 + 2
    cfg = adaptive_cfg(alpha_per_s=5.0, normalizer=5000, threshold=1.0)
    state = IntensityState.initial(GEO, cfg)
    state.frame[:] = 1.0
    signed = np.full(state.frame.shape, 2, dtype=np.int64)
    update_adaptive_batch(state, signed, 5000)
    assert state.frame[7, 7] == pytest.approx(2.9753099120283326, rel=1e-12)


def test_adaptive_negative_count_rejected():
    state = IntensityState.initial(GEO, adaptive_cfg())
    with pytest.raises(ValueError):
        update_adaptive_batch(state, np.zeros(state.frame.shape, dtype=np.int64), -1)


def test_run_sequence_empty_stream():
    empty = make_events([], [], [], [])
    _, frames = run_sequence(empty, GEO, SEG, adaptive_cfg(), num_segments=2)
    assert len(frames) == 2
    assert not frames[0].any() and not frames[1].any()


@pytest.mark.parametrize("method", [Method.PER_EVENT_DECAY, Method.ADAPTIVE_BATCH])
def test_split_run_matches_single_run(scene, method):
    events = simulate_events(scene)
    geo = scene.geometry
    seg = SegmentConfig(20_000, 4)
    cfg = IntensityConfig(method, bin_duration_us=seg.bin_duration_us)
    _, combined = run_sequence(events, geo, seg, cfg, num_segments=5)

    cut = np.searchsorted(events["t"], 40_000)
    state, first = run_sequence(events[:cut], geo, seg, cfg, num_segments=2)
    state, second = run_sequence(
        events[cut:], geo, seg, cfg, resume=state, num_segments=3
    )
    frames = first + second
    assert len(frames) == len(combined)
    for a, b in zip(frames, combined):
        assert np.array_equal(a, b)


def test_resume_mismatch_rejected(scene):
    events = simulate_events(scene)
    seg = SegmentConfig(20_000, 4)
    cfg = adaptive_cfg(bin_duration_us=5000)
    state, _ = run_sequence(events, scene.geometry, seg, cfg, num_segments=2)
    other = IntensityConfig(Method.ADAPTIVE_BATCH, alpha_per_s=9.0, bin_duration_us=5000)
    with pytest.raises(ValueError):
        run_sequence(events, scene.geometry, seg, other, resume=state)
    from evprep.errors import GeometryError

    with pytest.raises(GeometryError):
        run_sequence(events, SensorGeometry(8, 8), seg, cfg, resume=state)


def test_linearity_in_threshold(scene):
    events = simulate_events(scene)
    seg = SegmentConfig(20_000, 4)
    for method in Method:
        cfg1 = IntensityConfig(method, threshold=1.0, bin_duration_us=5000)
        cfg3 = IntensityConfig(method, threshold=3.0, bin_duration_us=5000)
        _, f1 = run_sequence(events, scene.geometry, seg, cfg1, num_segments=5)
        _, f3 = run_sequence(events, scene.geometry, seg, cfg3, num_segments=5)
        for a, b in zip(f1, f3):
            np.testing.assert_allclose(3.0 * a, b, rtol=1e-6)


def test_long_run_bounded_and_finite(rng):
    # bounded per-bin signed counts keep the frame within Emax*C/(1-decay)
    cfg = adaptive_cfg(alpha_per_s=5.0, normalizer=100, threshold=1.0)
    state = IntensityState.initial(GEO, cfg)
    emax, n_min = 4, 50
    for _ in range(5000):
        signed = rng.integers(-emax, emax + 1, size=state.frame.shape)
        n = max(n_min, int(np.abs(signed).sum()))
        update_adaptive_batch(state, signed, n)
    bound = emax * 1.0 / (1.0 - math.exp(-5.0 * 0.005 * n_min / 100))
    assert np.isfinite(state.frame).all()
    assert np.abs(state.frame).max() <= bound


def test_eq6_trail_persists_eq7_trail_decays(scene):
    from evprep import trail_energy, trail_region

    events = simulate_events(scene)
    seg = SegmentConfig(10_000, 2)
    region = trail_region(scene, 60_000)
    _, decay_frames = run_sequence(
        events, scene.geometry, seg,
        IntensityConfig(Method.PER_EVENT_DECAY, bin_duration_us=5000),
        num_segments=10,
    )
    _, adaptive_frames = run_sequence(
        events, scene.geometry, seg,
        IntensityConfig(Method.ADAPTIVE_BATCH, alpha_per_s=50.0, normalizer=100,
                        bin_duration_us=5000),
        num_segments=10,
    )
    tail = slice(6, 10)  # frames after the disc cleared the region
    e_decay = trail_energy(decay_frames[tail], region)
    e_adaptive = trail_energy(adaptive_frames[tail], region)
    assert all(a == pytest.approx(e_decay[0], rel=1e-9) for a in e_decay)
    assert all(b < a for a, b in zip(e_adaptive, e_adaptive[1:]))
    assert e_adaptive[-1] < e_decay[-1]

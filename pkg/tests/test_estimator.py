"""Coincidence peak search, two-way combination, and frequency tracking."""

from __future__ import annotations

import warnings

import numpy as np
import pytest

from qcsync.estimator import (
    CorrelationConfig,
    EmptyOverlapError,
    InsufficientBlocksError,
    NoPeakError,
    UnphysicalFlightTimeError,
    coarse_histogram,
    cross_correlate,
    estimate_uncertainty,
    frequency_track,
    two_way_offset,
)

CFG = CorrelationConfig(
    search_window=10**10, coarse_bin=10**6, fine_bin=1000, refine_span_bins=3
)


def _pair_streams(n, offset, spacing=10**9, jitter=0, seed=0):
    # uniform arrival times give a flat accidental background
    rng = np.random.default_rng(seed)
    local = np.sort(rng.integers(0, n * spacing, n)).astype(np.int64)
    shifts = rng.normal(0, jitter, n).round().astype(np.int64) if jitter else 0
    remote = np.sort(local + offset + shifts)
    return local, remote


def test_exact_shift_recovered():
    local, remote = _pair_streams(100, offset=123456)
    result = cross_correlate(local, remote, CFG)
    assert result.peak_offset == 123456
    assert result.peak_counts == 100
    assert result.peak_width_fs == 0.0


def test_five_event_constructed_shift():
    local = np.array([10**6, 3 * 10**6, 7 * 10**6, 11 * 10**6, 20 * 10**6], dtype=np.int64)
    remote = local + 999
    cfg = CorrelationConfig(
        search_window=10**10, coarse_bin=10**6, fine_bin=1000, significance_sigma=2.0
    )
    result = cross_correlate(local, remote, cfg)
    assert result.peak_offset == 999


def test_negative_shift_recovered():
    local, remote = _pair_streams(100, offset=-54321)
    assert cross_correlate(local, remote, CFG).peak_offset == -54321


def test_shift_equivariance():
    # shifting the remote stream by delta shifts the answer by exactly delta
    local, remote = _pair_streams(200, offset=777, jitter=300, seed=3)
    base = cross_correlate(local, remote, CFG).peak_offset
    for delta in (1, 999, 10**6 + 7, -12345):
        shifted = cross_correlate(local, remote + delta, CFG).peak_offset
        assert shifted == base + delta


def test_centroid_is_mean_of_peak_members():
    local = np.arange(1, 201, dtype=np.int64) * 10**7
    remote = local + np.where(np.arange(200) % 2 == 0, 1000, 1100)
    result = cross_correlate(local, remote, CFG)
    assert result.peak_offset == 1050


def test_tie_breaks_toward_smallest_offset():
    local = np.array([10**7], dtype=np.int64)
    remote = np.array([10**7 - 5 * 10**6, 10**7 + 5 * 10**6], dtype=np.int64)
    cfg = CorrelationConfig(
        search_window=10**10, coarse_bin=10**6, fine_bin=1000, significance_sigma=0.1
    )
    assert cross_correlate(local, remote, cfg).peak_offset == -5 * 10**6


def test_no_peak_raises_with_significance():
    rng = np.random.default_rng(11)
    local = np.sort(rng.integers(0, 10**12, 300)).astype(np.int64)
    remote = np.sort(rng.integers(0, 10**12, 300)).astype(np.int64)
    with pytest.raises(NoPeakError) as err:
        cross_correlate(local, remote, CFG)
    assert err.value.significance < CFG.significance_sigma


def test_empty_stream_rejected():
    with pytest.raises(EmptyOverlapError):
        cross_correlate(np.empty(0, dtype=np.int64), np.array([1], dtype=np.int64), CFG)


def test_disjoint_windows_rejected():
    local = np.array([0], dtype=np.int64)
    remote = np.array([10**14], dtype=np.int64)
    with pytest.raises(EmptyOverlapError):
        cross_correlate(local, remote, CFG)


def test_brute_force_histogram_equivalence():
    rng = np.random.default_rng(29)
    cfg = CorrelationConfig(search_window=10**8, coarse_bin=10**5, fine_bin=100)
    for _ in range(50):
        n, m = int(rng.integers(1, 200)), int(rng.integers(1, 200))
        local = np.sort(rng.integers(0, 10**9, n)).astype(np.int64)
        remote = np.sort(rng.integers(0, 10**9, m)).astype(np.int64)
        bins, counts, origin = coarse_histogram(local, remote, cfg)
        diffs = (remote[None, :] - local[:, None]).ravel()
        diffs = diffs[np.abs(diffs) <= cfg.search_window]
        want_bins, want_counts = np.unique((diffs - origin) // cfg.coarse_bin, return_counts=True)
        assert np.array_equal(bins, want_bins)
        assert np.array_equal(counts, want_counts)


def test_uncertainty_scales_with_width_over_sqrt_n():
    local, remote = _pair_streams(10000, offset=0, jitter=70700, seed=5)
    cfg = CorrelationConfig(search_window=10**10, coarse_bin=10**6, fine_bin=2 * 10**5)
    result = cross_correlate(local, remote, cfg)
    assert result.peak_width_fs == pytest.approx(70700, rel=0.05)
    assert estimate_uncertainty(result, 10000) == pytest.approx(707, rel=0.1)
    with pytest.raises(ValueError):
        estimate_uncertainty(result, 0)


def test_two_way_combination_algebra():
    local, remote = _pair_streams(50, offset=10**9 + 10**6)
    d_ab = cross_correlate(local, remote, CFG)
    local2, remote2 = _pair_streams(50, offset=10**9 - 10**6)
    d_ba = cross_correlate(local2, remote2, CFG)
    result = two_way_offset(d_ab, d_ba)
    assert result.clock_offset == 10**6
    assert result.flight_time == 10**9
    assert result.forward is d_ab and result.backward is d_ba


def test_two_way_halving_rounds_toward_zero():
    local, remote = _pair_streams(50, offset=11)
    d_ab = cross_correlate(local, remote, CFG)
    local2, remote2 = _pair_streams(50, offset=16)
    d_ba = cross_correlate(local2, remote2, CFG)
    result = two_way_offset(d_ab, d_ba)
    assert result.clock_offset == -2  # (11-16)/2 = -2.5 -> -2
    assert result.flight_time == 13  # (11+16)/2 = 13.5 -> 13


def test_negative_flight_time_rejected():
    local, remote = _pair_streams(50, offset=-10**6)
    d = cross_correlate(local, remote, CFG)
    with pytest.raises(UnphysicalFlightTimeError):
        two_way_offset(d, d)


def test_config_validation():
    with pytest.raises(ValueError):
        CorrelationConfig(fine_bin=0)
    with pytest.raises(ValueError):
        CorrelationConfig(fine_bin=10**7, coarse_bin=10**6)
    with pytest.raises(ValueError):
        CorrelationConfig(coarse_bin=10**14, search_window=10**13)
    with pytest.raises(ValueError):
        CorrelationConfig(significance_sigma=0.0)


def _drifting_session(y, n, jitter, seed, theta0=5 * 10**6, flight=10**9):
    # remote_ab tag = local_a + flight + theta(t); remote_ba = local_b + flight - theta(t)
    rng = np.random.default_rng(seed)
    span = 10**12
    local_a = np.sort(rng.integers(0, span, n)).astype(np.int64)
    theta_a = theta0 + (y * local_a).round().astype(np.int64)
    jit = lambda k: rng.normal(0, jitter, k).round().astype(np.int64) if jitter else 0
    remote_ab = np.sort(local_a + flight + theta_a + jit(n))
    local_b = np.sort(rng.integers(0, span, n)).astype(np.int64)
    theta_b = theta0 + (y * local_b).round().astype(np.int64)
    remote_ba = np.sort(local_b + flight - theta_b + jit(n))
    return local_a, remote_ab, local_b, remote_ba


def test_frequency_track_recovers_slope():
    cfg = CorrelationConfig(
        search_window=10**10, coarse_bin=10**6, fine_bin=10**4, block_count=10
    )
    streams = _drifting_session(1e-9, 20000, jitter=0, seed=8)
    fit = frequency_track(*streams, cfg)
    assert fit.fractional_frequency == pytest.approx(1e-9, abs=1e-11)
    assert fit.offset_at_epoch == pytest.approx(5 * 10**6, abs=100)
    assert len(fit.block_offsets) == 10


def test_frequency_track_needs_two_blocks():
    cfg = CorrelationConfig(search_window=10**10, block_count=1)
    with pytest.raises(ValueError):
        frequency_track(*_drifting_session(0.0, 100, 0, 1), cfg)


def test_frequency_track_insufficient_blocks():
    cfg = CorrelationConfig(
        search_window=10**10, coarse_bin=10**6, fine_bin=10**4, block_count=10
    )
    # 8 pairs cannot make 10 significant blocks
    streams = _drifting_session(0.0, 8, jitter=0, seed=9)
    with pytest.raises(InsufficientBlocksError):
        frequency_track(*streams, cfg)


def test_frequency_track_warns_when_drift_crosses_fine_bin():
    cfg = CorrelationConfig(
        search_window=10**10, coarse_bin=10**6, fine_bin=1000, block_count=2
    )
    streams = _drifting_session(3e-8, 20000, jitter=0, seed=10)  # 15000 fs per block
    with pytest.warns(UserWarning, match="fine bin"):
        frequency_track(*streams, cfg)

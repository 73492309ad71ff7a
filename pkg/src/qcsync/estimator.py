"""Offset, flight-time, and frequency recovery from timetag streams.

The correlator histograms pairwise differences (remote - local) inside a
search window using a sliding-window sweep over the sorted streams, so cost
scales with the number of in-window pairs, never len(local)*len(remote).
A sparse coarse histogram locates the peak; a fine histogram around it
refines the offset to the count-weighted centroid of the fine peak bin and
its two neighbors (the centroid is the exact integer-rounded mean of the
member differences, which makes the result shift-equivariant).

Binning is anchored at the difference of the two first tags, not at zero,
so shifting one stream by any amount relabels bins but never re-partitions
pairs across bin edges.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .photonics import TagStream
from .timebase import _round_div

__all__ = [
    "CorrelationConfig",
    "CorrelationResult",
    "TwoWayResult",
    "FrequencyFit",
    "EstimationError",
    "NoPeakError",
    "EmptyOverlapError",
    "InsufficientBlocksError",
    "UnphysicalFlightTimeError",
    "cross_correlate",
    "coarse_histogram",
    "two_way_offset",
    "frequency_track",
    "estimate_uncertainty",
]

_SINGLE_PASS_PAIR_LIMIT = 1 << 23  # keep the materialized diff array under ~64 MB
_CHUNK_PAIRS = 1 << 22


class EstimationError(Exception):
    """Base for recoverable estimation failures."""


class NoPeakError(EstimationError):
    """No histogram bin cleared the significance threshold."""

    def __init__(self, message: str, significance: float = float("nan")):
        super().__init__(message)
        self.significance = significance


class EmptyOverlapError(EstimationError):
    """No pairwise differences fell inside the search window."""


class InsufficientBlocksError(EstimationError):
    """Fewer than two blocks produced a significant two-way offset."""


class UnphysicalFlightTimeError(EstimationError):
    """Two-way combination produced a negative flight time (swapped inputs?)."""


@dataclass(frozen=True)
class CorrelationConfig:
    search_window: int = 10**13  # fs, max |candidate offset| (10 ms)
    coarse_bin: int = 10**6  # fs (1 ns)
    fine_bin: int = 1000  # fs (1 ps)
    refine_span_bins: int = 3  # fine stage covers coarse peak +- this many coarse bins
    significance_sigma: float = 6.0
    block_count: int = 1  # for frequency tracking

    def __post_init__(self):
        if not 1 <= self.fine_bin <= self.coarse_bin <= self.search_window:
            raise ValueError("need 1 <= fine_bin <= coarse_bin <= search_window")
        if self.refine_span_bins < 1:
            raise ValueError("refine_span_bins must be >= 1")
        if not self.significance_sigma > 0:
            raise ValueError("significance_sigma must be > 0")
        if self.block_count < 1:
            raise ValueError("block_count must be >= 1")


@dataclass(frozen=True)
class CorrelationResult:
    peak_offset: int  # fs, centroid-refined (remote - local)
    peak_counts: int  # counts in the winning coarse bin
    background_mean: float
    background_sigma: float
    significance: float
    peak_width_fs: float  # sample std of differences in the fine peak region
    histogram_summary: dict = field(default_factory=dict)


@dataclass(frozen=True)
class TwoWayResult:
    clock_offset: int  # fs, theta = (d_AB - d_BA)/2, halving rounded toward zero
    flight_time: int  # fs, T_f = (d_AB + d_BA)/2, same rounding
    offset_uncertainty: int  # fs, 1-sigma
    forward: CorrelationResult  # d_AB
    backward: CorrelationResult  # d_BA


@dataclass(frozen=True)
class FrequencyFit:
    fractional_frequency: float  # slope of theta vs local time
    offset_at_epoch: int  # fs, fitted theta at local time 0
    residual_rms: int  # fs
    block_offsets: list  # (block midpoint local time fs, theta_block fs)


def _timestamps(stream) -> np.ndarray:
    ts = stream.timestamps if isinstance(stream, TagStream) else np.asarray(stream)
    return np.ascontiguousarray(ts, dtype=np.int64)


def _halve_toward_zero(value: int) -> int:
    return value // 2 if value >= 0 else -((-value) // 2)


def _window_pair_bounds(local: np.ndarray, remote: np.ndarray, window: int):
    lo = np.searchsorted(remote, local - window, side="left")
    hi = np.searchsorted(remote, local + window, side="right")
    counts = (hi - lo).astype(np.int64)
    return lo, counts


def _iter_diff_chunks(local: np.ndarray, remote: np.ndarray, window: int):
    """Yield int64 arrays of in-window differences (remote - local), chunked."""
    lo, counts = _window_pair_bounds(local, remote, window)
    start = 0
    n_local = len(local)
    while start < n_local:
        end = start
        pairs = 0
        while end < n_local and (pairs == 0 or pairs + counts[end] <= _CHUNK_PAIRS):
            pairs += int(counts[end])
            end += 1
        c = counts[start:end]
        total = int(c.sum())
        if total:
            starts = np.cumsum(c) - c
            idx = np.repeat(lo[start:end], c) + (np.arange(total, dtype=np.int64) - np.repeat(starts, c))
            yield remote[idx] - np.repeat(local[start:end], c)
        start = end


def coarse_histogram(
    local, remote, cfg: CorrelationConfig
) -> tuple[np.ndarray, np.ndarray, int]:
    """Sparse coarse histogram of in-window differences.

    Returns (occupied bin indices, counts, origin). Bin i covers differences
    d with floor((d - origin)/coarse_bin) == i; origin is remote[0]-local[0].
    """
    local_ts, remote_ts = _timestamps(local), _timestamps(remote)
    if len(local_ts) == 0 or len(remote_ts) == 0:
        raise EmptyOverlapError("cannot correlate an empty stream")
    origin = int(remote_ts[0]) - int(local_ts[0])
    bins_parts, counts_parts = [], []
    for diffs in _iter_diff_chunks(local_ts, remote_ts, cfg.search_window):
        b, c = np.unique((diffs - origin) // cfg.coarse_bin, return_counts=True)
        bins_parts.append(b)
        counts_parts.append(c)
    if not bins_parts:
        raise EmptyOverlapError("no pairwise differences inside the search window")
    bins = np.concatenate(bins_parts)
    counts = np.concatenate(counts_parts)
    order = np.argsort(bins, kind="stable")
    bins, counts = bins[order], counts[order]
    boundaries = np.concatenate(([True], bins[1:] != bins[:-1]))
    starts = np.flatnonzero(boundaries)
    merged_counts = np.add.reduceat(counts, starts)
    return bins[starts], merged_counts, origin


def _fine_region_values(
    local: np.ndarray, remote: np.ndarray, cfg: CorrelationConfig, origin: int, peak_bin: int
) -> np.ndarray:
    """All in-window differences (relative to origin) in the fine-stage span."""
    span = cfg.refine_span_bins
    fine_lo = (peak_bin - span) * cfg.coarse_bin
    fine_hi = (peak_bin + span + 1) * cfg.coarse_bin
    parts = []
    for diffs in _iter_diff_chunks(local, remote, cfg.search_window):
        rel = diffs - origin
        parts.append(rel[(rel >= fine_lo) & (rel < fine_hi)])
    return np.concatenate(parts) if parts else np.empty(0, dtype=np.int64)


def cross_correlate(local, remote, cfg: CorrelationConfig | None = None) -> CorrelationResult:
    """Locate the coincidence peak of (remote - local) differences.

    Raises NoPeakError when the best coarse bin is not significant against
    the off-peak background, and EmptyOverlapError when the window holds no
    pairs at all.
    """
    cfg = cfg or CorrelationConfig()
    local_ts, remote_ts = _timestamps(local), _timestamps(remote)
    bins, counts, origin = coarse_histogram(local_ts, remote_ts, cfg)

    i_max = int(np.argmax(counts))  # first max: ties break toward smallest offset
    peak_bin = int(bins[i_max])
    peak_counts = int(counts[i_max])

    # Background over every coarse bin the window could populate, including
    # empty ones, excluding the peak neighborhood.
    bin_lo = _floor_div(-cfg.search_window - origin, cfg.coarse_bin)
    bin_hi = _floor_div(cfg.search_window - origin, cfg.coarse_bin)
    n_bins = bin_hi - bin_lo + 1
    excl_lo = max(peak_bin - cfg.refine_span_bins, bin_lo)
    excl_hi = min(peak_bin + cfg.refine_span_bins, bin_hi)
    n_bg_bins = n_bins - (excl_hi - excl_lo + 1)
    bg_mask = (bins < excl_lo) | (bins > excl_hi)
    bg_counts = counts[bg_mask]
    if n_bg_bins <= 0:
        bg_mean, bg_sigma = 0.0, 1.0
    else:
        bg_sum = float(bg_counts.sum())
        bg_sumsq = float((bg_counts.astype(np.float64) ** 2).sum())
        bg_mean = bg_sum / n_bg_bins
        variance = max(bg_sumsq / n_bg_bins - bg_mean**2, 0.0)
        # Sparse histograms can have a deceptively small sample variance;
        # floor at the Poisson value and at one count so that isolated
        # accidental coincidences never register as significant.
        bg_sigma = max(math.sqrt(variance), math.sqrt(bg_mean), 1.0)
    significance = (peak_counts - bg_mean) / bg_sigma
    if significance < cfg.significance_sigma:
        raise NoPeakError(
            f"best bin significance {significance:.2f} below "
            f"threshold {cfg.significance_sigma}",
            significance=significance,
        )

    region = _fine_region_values(local_ts, remote_ts, cfg, origin, peak_bin)
    fine_lo = (peak_bin - cfg.refine_span_bins) * cfg.coarse_bin
    shifted = region - fine_lo
    fine_bins, fine_counts = np.unique(shifted // cfg.fine_bin, return_counts=True)
    f_star = int(fine_bins[int(np.argmax(fine_counts))])
    member_mask = np.abs(shifted // cfg.fine_bin - f_star) <= 1
    members = shifted[member_mask]
    centroid = _round_div(int(members.sum()), len(members))
    peak_offset = origin + fine_lo + centroid
    width = float(np.std(members.astype(np.float64))) if len(members) > 1 else 0.0

    region_counts = [
        int(fine_counts[fine_bins == f_star + k].sum()) for k in (-1, 0, 1)
    ]
    return CorrelationResult(
        peak_offset=peak_offset,
        peak_counts=peak_counts,
        background_mean=bg_mean,
        background_sigma=bg_sigma,
        significance=significance,
        peak_width_fs=width,
        histogram_summary={
            "coarse_bin_fs": cfg.coarse_bin,
            "fine_bin_fs": cfg.fine_bin,
            "span_fs": (2 * cfg.refine_span_bins + 1) * cfg.coarse_bin,
            "peak_region_counts": region_counts,
            "region_total": int(len(members)),
        },
    )


def _floor_div(a: int, b: int) -> int:
    return a // b


def estimate_uncertainty(result: CorrelationResult, n_pairs: int) -> int:
    """1-sigma offset uncertainty: fine-peak width / sqrt(n_pairs), in fs."""
    if n_pairs <= 0:
        raise ValueError("n_pairs must be positive")
    return int(round(result.peak_width_fs / math.sqrt(n_pairs)))


def two_way_offset(d_ab: CorrelationResult, d_ba: CorrelationResult) -> TwoWayResult:
    """Combine the two one-way peaks into clock offset and flight time.

    theta = (d_AB - d_BA)/2 and T_f = (d_AB + d_BA)/2; both halvings round
    toward zero so the algebra is exactly invertible up to that documented
    rounding.
    """
    theta = _halve_toward_zero(d_ab.peak_offset - d_ba.peak_offset)
    flight = _halve_toward_zero(d_ab.peak_offset + d_ba.peak_offset)
    if flight < 0:
        raise UnphysicalFlightTimeError(
            f"flight time {flight} fs is negative; are the directions swapped?"
        )
    u_ab = d_ab.peak_width_fs / math.sqrt(max(d_ab.peak_counts, 1))
    u_ba = d_ba.peak_width_fs / math.sqrt(max(d_ba.peak_counts, 1))
    uncertainty = int(round(0.5 * math.hypot(u_ab, u_ba)))
    return TwoWayResult(
        clock_offset=theta,
        flight_time=flight,
        offset_uncertainty=uncertainty,
        forward=d_ab,
        backward=d_ba,
    )


def _slice_sorted(ts: np.ndarray, lo: int, hi: int) -> np.ndarray:
    i = np.searchsorted(ts, lo, side="left")
    j = np.searchsorted(ts, hi, side="left")
    return ts[i:j]


def frequency_track(
    local_a, remote_ab, local_b, remote_ba, cfg: CorrelationConfig
) -> FrequencyFit:
    """Fractional frequency from the drift of per-block two-way offsets.

    The acquisition is split into cfg.block_count equal spans of clock A's
    local time; each block gets its own two-way offset, and a least-squares
    line of offset versus block midpoint yields the fractional frequency
    (slope) and the offset extrapolated to local time zero (intercept).
    """
    if cfg.block_count < 2:
        raise ValueError("frequency tracking needs block_count >= 2")
    la, rb = _timestamps(local_a), _timestamps(remote_ab)
    lb, ra = _timestamps(local_b), _timestamps(remote_ba)
    if min(len(la), len(rb), len(lb), len(ra)) == 0:
        raise EmptyOverlapError("cannot correlate an empty stream")

    d_ab_global = cross_correlate(la, rb, cfg)
    d_ba_global = cross_correlate(lb, ra, cfg)
    theta_global = _halve_toward_zero(d_ab_global.peak_offset - d_ba_global.peak_offset)

    t0, t1 = int(la[0]), int(la[-1]) + 1
    edges = [t0 + round(k * (t1 - t0) / cfg.block_count) for k in range(cfg.block_count + 1)]
    window = cfg.search_window
    block_length = (t1 - t0) / cfg.block_count

    mids, thetas, failures = [], [], []
    for k in range(cfg.block_count):
        e0, e1 = edges[k], edges[k + 1]
        try:
            res_ab = cross_correlate(
                _slice_sorted(la, e0, e1), _slice_sorted(rb, e0 - window, e1 + window), cfg
            )
            res_ba = cross_correlate(
                _slice_sorted(lb, e0 + theta_global, e1 + theta_global),
                _slice_sorted(ra, e0 + theta_global - window, e1 + theta_global + window),
                cfg,
            )
            pair = two_way_offset(res_ab, res_ba)
        except EstimationError as exc:
            failures.append((k, str(exc)))
            continue
        mids.append((e0 + e1) // 2)
        thetas.append(pair.clock_offset)

    if len(thetas) < 2:
        raise InsufficientBlocksError(
            f"only {len(thetas)} of {cfg.block_count} blocks significant: {failures}"
        )

    x = np.array(mids, dtype=np.float64)
    y = np.array(thetas, dtype=np.float64)
    x_mean = x.mean()
    xc = x - x_mean
    slope = float(np.dot(xc, y) / np.dot(xc, xc))
    intercept = float(y.mean() - slope * x_mean)
    residuals = y - (intercept + slope * x)
    if abs(slope) * block_length >= cfg.fine_bin:
        warnings.warn(
            "within-block offset drift reaches the fine bin width; "
            "increase block_count or fine_bin for a valid piecewise fit",
            stacklevel=2,
        )
    return FrequencyFit(
        fractional_frequency=slope,
        offset_at_epoch=int(round(intercept)),
        residual_rms=int(round(float(np.sqrt(np.mean(residuals**2))))),
        block_offsets=list(zip(mids, thetas)),
    )

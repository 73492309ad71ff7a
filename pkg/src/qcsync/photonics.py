"""SPDC pair generation and the detector/time-tagger chain.

Pair births form a homogeneous Poisson process. Each birth splits into a
local and a remote photon whose times get independent Gaussian spreads of
sigma_pair/sqrt(2), so the observable pair difference has std sigma_pair.
Detection applies, in order: efficiency thinning, Gaussian timing jitter,
dark-count injection, non-paralyzable dead-time filtering, conversion to the
detector clock's local frame, and quantization to the tagger resolution.

Streams are held as sorted int64 femtosecond arrays, which bounds usable
local times to about +-2.5 hours from the epoch; the long-horizon integer
arithmetic lives in timebase and is not needed per tag.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .seeding import SeedSpec, spawn_rng
from .timebase import ClockState, local_times

__all__ = [
    "PairSource",
    "Detector",
    "TimeTagger",
    "TagStream",
    "generate_pair_births",
    "split_pairs",
    "split_pair",
    "detect",
    "MAX_EXPECTED_EVENTS",
]

MAX_EXPECTED_EVENTS = 10**9  # resource guard on Poisson generation

_INT64_MAX = np.iinfo(np.int64).max


@dataclass(frozen=True)
class PairSource:
    """Entangled-pair source: rate, pair correlation width, heralding."""

    pair_rate: float  # pairs per second
    pair_correlation_sigma: int = 50  # fs, std of the pair time difference
    heralding_efficiency_local: float = 1.0

    def __post_init__(self):
        if not self.pair_rate > 0:
            raise ValueError("pair_rate must be > 0")
        if not 0 <= self.pair_correlation_sigma <= 10**6:
            raise ValueError("pair_correlation_sigma must be within [0, 1e6] fs")
        if not 0.0 <= self.heralding_efficiency_local <= 1.0:
            raise ValueError("heralding_efficiency_local must be in [0, 1]")


@dataclass(frozen=True)
class Detector:
    """Single-photon detector: efficiency, jitter, dark counts, dead time."""

    efficiency: float = 1.0
    jitter_sigma: int = 0  # fs
    dark_rate: float = 0.0  # counts per second
    dead_time: int = 0  # fs

    def __post_init__(self):
        if not 0.0 <= self.efficiency <= 1.0:
            raise ValueError("efficiency must be in [0, 1]")
        if self.jitter_sigma < 0:
            raise ValueError("jitter_sigma must be >= 0")
        if self.dark_rate < 0:
            raise ValueError("dark_rate must be >= 0")
        if self.dead_time < 0:
            raise ValueError("dead_time must be >= 0")


@dataclass(frozen=True)
class TimeTagger:
    """Time-tagging back end: quantization resolution and optional range."""

    resolution: int = 1000  # fs
    range_limit: int | None = None  # drop tags with |local time| beyond this

    def __post_init__(self):
        if self.resolution < 1:
            raise ValueError("resolution must be >= 1 fs")
        if self.range_limit is not None and self.range_limit <= 0:
            raise ValueError("range_limit must be positive when set")


@dataclass(frozen=True)
class TagStream:
    """Sorted detection timestamps on one channel, in that channel's clock frame."""

    channel_id: str
    timestamps: np.ndarray  # int64 fs, strictly increasing
    frame: str = ""
    resolution_fs: int = 1
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        ts = np.asarray(self.timestamps, dtype=np.int64)
        object.__setattr__(self, "timestamps", ts)
        if len(ts) > 1 and not np.all(np.diff(ts) > 0):
            raise ValueError(f"channel {self.channel_id}: timestamps must be strictly sorted")
        if self.resolution_fs >= 1 and len(ts) and np.any(ts % self.resolution_fs != 0):
            raise ValueError(
                f"channel {self.channel_id}: timestamps not quantized to {self.resolution_fs} fs"
            )
        if self.resolution_fs < 1:
            raise ValueError("resolution_fs must be >= 1")

    def __len__(self) -> int:
        return len(self.timestamps)


def _poisson_times(rate_per_s: float, horizon_fs: int, rng: np.random.Generator) -> np.ndarray:
    """Sorted event times of a homogeneous Poisson process on [0, horizon)."""
    if horizon_fs < 0:
        raise ValueError("horizon must be >= 0")
    expected = rate_per_s * horizon_fs / 1e15
    if expected > MAX_EXPECTED_EVENTS:
        raise ValueError(f"expected event count {expected:.3g} exceeds {MAX_EXPECTED_EVENTS}")
    if horizon_fs == 0 or rate_per_s == 0.0:
        return np.empty(0, dtype=np.int64)
    count = rng.poisson(expected)
    # Conditioned on the count, event times are iid uniform over the horizon
    # (order-statistics construction of the Poisson process).
    times = rng.uniform(0.0, float(horizon_fs), count)
    times.sort()
    out = times.astype(np.int64)
    return out[out < horizon_fs]


def generate_pair_births(source: PairSource, horizon: int, seed: SeedSpec) -> np.ndarray:
    """Pair birth times (true time, int64 fs) over [0, horizon)."""
    rng = spawn_rng(seed, "pair-births")
    return _poisson_times(source.pair_rate, horizon, rng)


def split_pairs(
    births: np.ndarray, source: PairSource, seed: SeedSpec
) -> tuple[np.ndarray, np.ndarray]:
    """Local and remote photon emission times for each birth.

    Each arm gets an independent Gaussian(0, sigma_pair/sqrt(2)) shift, so
    local - remote has std sigma_pair. Outputs are index-aligned with
    ``births`` (not re-sorted).
    """
    births = np.asarray(births, dtype=np.int64)
    if source.pair_correlation_sigma == 0 or len(births) == 0:
        return births.copy(), births.copy()
    rng = spawn_rng(seed, "pair-split")
    arm_sigma = source.pair_correlation_sigma / np.sqrt(2.0)
    shifts = np.round(rng.normal(0.0, arm_sigma, (2, len(births)))).astype(np.int64)
    return births + shifts[0], births + shifts[1]


def split_pair(birth: int, source: PairSource, seed: SeedSpec) -> tuple[int, int]:
    """Single-pair convenience wrapper over ``split_pairs``."""
    local, remote = split_pairs(np.array([birth], dtype=np.int64), source, seed)
    return int(local[0]), int(remote[0])


def _dead_time_filter(times: np.ndarray, dead_time: int) -> np.ndarray:
    """Non-paralyzable dead time: an accepted event blocks the next dead_time fs."""
    if dead_time == 0 or len(times) == 0:
        return times
    keep = np.empty(len(times), dtype=bool)
    last_accepted = None
    for i, t in enumerate(times.tolist()):
        if last_accepted is None or t - last_accepted >= dead_time:
            keep[i] = True
            last_accepted = t
        else:
            keep[i] = False
    return times[keep]


def detect(
    photon_arrivals_true: np.ndarray,
    detector: Detector,
    clock: ClockState,
    tagger: TimeTagger,
    horizon: int,
    seed: SeedSpec,
    *,
    window_start: int = 0,
    channel_id: str = "",
    frame: str = "",
    metadata: dict | None = None,
) -> TagStream:
    """Turn true-time photon arrivals into a local-frame timetag stream.

    Chain: efficiency thinning, Gaussian jitter, dark counts uniform over
    [window_start, window_start + horizon), merge and sort, non-paralyzable
    dead-time filter (in true time), clock conversion, quantization (floor
    to resolution), and a final dedupe because a tagger cannot emit two
    identical stamps.
    """
    arrivals = np.asarray(photon_arrivals_true, dtype=np.int64)
    if len(arrivals) > 1 and np.any(np.diff(arrivals) < 0):
        raise ValueError("photon arrivals must be sorted")

    if detector.efficiency < 1.0:
        thin_rng = spawn_rng(seed, "detect-thin")
        arrivals = arrivals[thin_rng.random(len(arrivals)) < detector.efficiency]
    if detector.jitter_sigma > 0 and len(arrivals):
        jitter_rng = spawn_rng(seed, "detect-jitter")
        arrivals = arrivals + np.round(
            jitter_rng.normal(0.0, detector.jitter_sigma, len(arrivals))
        ).astype(np.int64)

    darks = _poisson_times(detector.dark_rate, horizon, spawn_rng(seed, "detect-dark"))
    merged = np.concatenate((arrivals, darks + window_start))
    merged.sort(kind="stable")
    merged = _dead_time_filter(merged, detector.dead_time)

    local = local_times(clock, merged, rng=spawn_rng(seed, "detect-readout"))
    local.sort(kind="stable")  # clock noise can reorder near-simultaneous events
    quantized = (local // tagger.resolution) * tagger.resolution
    if tagger.range_limit is not None:
        quantized = quantized[np.abs(quantized) <= tagger.range_limit]
    if len(quantized) > 1:
        quantized = np.unique(quantized)

    return TagStream(
        channel_id=channel_id,
        timestamps=quantized,
        frame=frame,
        resolution_fs=tagger.resolution,
        metadata=dict(metadata or {}),
    )

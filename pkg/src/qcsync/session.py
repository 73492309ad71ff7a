"""One complete two-node acquisition: both sources, both links, four streams.

Node A and node B each run a pair source, detect one photon of every pair
locally, and send the twin across the link. Cross-correlating each remote
stream against the matching local stream gives the two one-way differences
d_AB (A's pairs, detected remotely at B) and d_BA; their two-way
combination yields the clock offset theta = local_B - local_A and the
flight time.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .estimator import CorrelationConfig, TwoWayResult, cross_correlate, two_way_offset
from .linkmodel import (
    DEFAULT_CONSTANTS,
    Direction,
    LinkModel,
    NotVisibleError,
    PhysicalConstants,
    propagate,
    time_of_flight,
)
from .photonics import Detector, PairSource, TagStream, TimeTagger, detect, generate_pair_births, split_pairs
from .seeding import SeedSpec, seed_path, spawn_rng
from .timebase import ClockState, local_time

__all__ = [
    "NodeInstruments",
    "SessionSpec",
    "SessionTruth",
    "SessionStreams",
    "run_session",
    "estimate_session",
]


@dataclass(frozen=True)
class NodeInstruments:
    source: PairSource
    detector: Detector
    tagger: TimeTagger


@dataclass(frozen=True)
class SessionSpec:
    duration: int  # fs, acquisition window length
    instruments_a: NodeInstruments
    instruments_b: NodeInstruments
    link: LinkModel
    start_time: int = 0  # true time of window start

    def __post_init__(self):
        if self.duration <= 0:
            raise ValueError("duration must be positive")


@dataclass(frozen=True)
class SessionTruth:
    """Noiseless ground truth at the acquisition midpoint, for error reporting."""

    theta_fs: int  # local_B - local_A, readout noise excluded
    flight_ab_fs: int
    flight_ba_fs: int
    midpoint_fs: int
    births_a: int
    births_b: int


@dataclass(frozen=True)
class SessionStreams:
    local_a: TagStream  # A's pairs, local detection, clock A frame
    remote_ab: TagStream  # A's pairs, remote detection at B, clock B frame
    local_b: TagStream
    remote_ba: TagStream
    truth: SessionTruth


def _one_source_arm(
    births: np.ndarray,
    instruments_local: NodeInstruments,
    instruments_remote: NodeInstruments,
    clock_local: ClockState,
    clock_remote: ClockState,
    link: LinkModel,
    direction: Direction,
    window_start: int,
    duration: int,
    seed: SeedSpec,
    names: tuple[str, str, str, str],
    constants: PhysicalConstants,
    metadata: dict,
) -> tuple[TagStream, TagStream]:
    source = instruments_local.source
    local_arm, remote_arm = split_pairs(births, source, seed_path(seed) + ("split",))
    if source.heralding_efficiency_local < 1.0:
        herald_rng = spawn_rng(seed, "herald")
        local_arm = local_arm[herald_rng.random(len(local_arm)) < source.heralding_efficiency_local]
    local_arm = np.sort(local_arm, kind="stable")
    remote_arm = np.sort(remote_arm, kind="stable")

    channel_local, frame_local, channel_remote, frame_remote = names
    local_stream = detect(
        local_arm,
        instruments_local.detector,
        clock_local,
        instruments_local.tagger,
        duration,
        seed_path(seed) + ("det-local",),
        window_start=window_start,
        channel_id=channel_local,
        frame=frame_local,
        metadata=metadata,
    )
    arrivals = propagate(remote_arm, link, direction, seed_path(seed) + ("link",), constants)
    # The remote acquisition gate covers the arrival band, one flight time
    # after the emission window; with the link occluded the gate position is
    # moot (no signal), so fall back to the emission window.
    try:
        remote_gate = window_start + time_of_flight(link, window_start, direction, constants)
    except NotVisibleError:
        remote_gate = window_start
    remote_stream = detect(
        arrivals,
        instruments_remote.detector,
        clock_remote,
        instruments_remote.tagger,
        duration,
        seed_path(seed) + ("det-remote",),
        window_start=remote_gate,
        channel_id=channel_remote,
        frame=frame_remote,
        metadata=metadata,
    )
    return local_stream, remote_stream


def run_session(
    spec: SessionSpec,
    clock_a: ClockState,
    clock_b: ClockState,
    seed: SeedSpec,
    constants: PhysicalConstants = DEFAULT_CONSTANTS,
    metadata: dict | None = None,
) -> SessionStreams:
    """Simulate the four timetag streams of one acquisition window."""
    metadata = dict(metadata or {})
    start, duration = spec.start_time, spec.duration

    births_a = generate_pair_births(spec.instruments_a.source, duration, seed_path(seed) + ("births-a",))
    births_b = generate_pair_births(spec.instruments_b.source, duration, seed_path(seed) + ("births-b",))
    births_a = births_a + start
    births_b = births_b + start

    local_a, remote_ab = _one_source_arm(
        births_a,
        spec.instruments_a,
        spec.instruments_b,
        clock_a,
        clock_b,
        spec.link,
        Direction.A_TO_B,
        start,
        duration,
        seed_path(seed) + ("arm-a",),
        ("a_local", "a", "b_from_a", "b"),
        constants,
        metadata,
    )
    local_b, remote_ba = _one_source_arm(
        births_b,
        spec.instruments_b,
        spec.instruments_a,
        clock_b,
        clock_a,
        spec.link,
        Direction.B_TO_A,
        start,
        duration,
        seed_path(seed) + ("arm-b",),
        ("b_local", "b", "a_from_b", "a"),
        constants,
        metadata,
    )

    midpoint = start + duration // 2
    theta_true = local_time(clock_b, midpoint, readout_noise=False) - local_time(
        clock_a, midpoint, readout_noise=False
    )
    truth = SessionTruth(
        theta_fs=theta_true,
        flight_ab_fs=time_of_flight(spec.link, midpoint, Direction.A_TO_B, constants),
        flight_ba_fs=time_of_flight(spec.link, midpoint, Direction.B_TO_A, constants),
        midpoint_fs=midpoint,
        births_a=len(births_a),
        births_b=len(births_b),
    )
    return SessionStreams(
        local_a=local_a,
        remote_ab=remote_ab,
        local_b=local_b,
        remote_ba=remote_ba,
        truth=truth,
    )


def estimate_session(streams: SessionStreams, cfg: CorrelationConfig | None = None) -> TwoWayResult:
    """Full two-way estimate from a session's four streams."""
    cfg = cfg or CorrelationConfig()
    d_ab = cross_correlate(streams.local_a, streams.remote_ab, cfg)
    d_ba = cross_correlate(streams.local_b, streams.remote_ba, cfg)
    return two_way_offset(d_ab, d_ba)

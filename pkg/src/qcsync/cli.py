"""Command-line entry point: simulate, estimate, relativity, bell, net.

Exit codes: 0 success, 2 configuration error, 3 estimation/simulation
failure (no significant peak, link not visible, insufficient data),
4 file I/O or parse error. All artifact files are written atomically and
JSON output is key-sorted so fixed seeds give byte-identical files.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bellauth import authenticate, chsh_value, simulate_coincidences
from .estimator import (
    CorrelationConfig,
    EstimationError,
    TwoWayResult,
    cross_correlate,
    frequency_track,
    two_way_offset,
)
from .linkmodel import (
    Direction,
    GeometryError,
    LightTimeConvergenceError,
    NotVisibleError,
    StaticRange,
    orbital_period,
    relativistic_rate_offset,
    sample_geometry,
    shapiro_delay,
    time_of_flight,
    visibility_windows,
)
from .netsync import TopologyError, gps_baseline_comparison, run_network
from .scenario import (
    ConfigError,
    build_bell,
    build_clock_model,
    build_correlation,
    build_link,
    build_tagger,
    build_topology,
    build_detector,
    build_source,
    load_scenario,
)
from .session import NodeInstruments, SessionSpec, run_session
from .tagfiles import TagFileError, atomic_write_text, read_timetag_file, write_timetag_file
from .timebase import ClockState
from .netsync import FS_PER_SECOND

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ESTIMATION = 3
EXIT_IO = 4

_ESTIMATION_ERRORS = (EstimationError, NotVisibleError, LightTimeConvergenceError)
_CONFIG_ERRORS = (ConfigError, TopologyError, GeometryError, ValueError, KeyError)


def _stable_json(payload) -> str:
    return json.dumps(_jsonable(payload), sort_keys=True, indent=2) + "\n"


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    return value


def _two_way_dict(result: TwoWayResult) -> dict:
    payload = dataclasses.asdict(result)
    payload.pop("forward")
    payload.pop("backward")
    payload["forward"] = dataclasses.asdict(result.forward)
    payload["backward"] = dataclasses.asdict(result.backward)
    return payload


def _require(config: dict, *keys: str) -> None:
    missing = [k for k in keys if k not in config]
    if missing:
        raise ConfigError(f"config is missing required section(s) for this command: {missing}")


def _scenario_hash(config: dict) -> str:
    canonical = json.dumps(config, sort_keys=True).encode()
    return hashlib.sha256(canonical).hexdigest()[:16]


def _out_dir(args, config: dict) -> Path:
    if args.out:
        return Path(args.out)
    return Path((config.get("output") or {}).get("dir", "."))


def _load_config(args) -> dict:
    if not args.config:
        raise ConfigError("this command requires --config PATH")
    config = load_scenario(args.config)
    if args.seed is not None:
        config["seed"] = args.seed
    return config


def cmd_simulate(args) -> int:
    config = _load_config(args)
    _require(config, "duration_s", "clocks", "sources", "detectors", "link")
    for side in ("a", "b"):
        if side not in config["clocks"] or side not in config["sources"]:
            raise ConfigError(f"simulate needs clocks.{side} and sources.{side}")
    seed = config["seed"]
    tagger = build_tagger(config.get("tagger"))
    instruments = {
        side: NodeInstruments(
            source=build_source(config["sources"][side]),
            detector=build_detector((config.get("detectors") or {}).get(side)),
            tagger=tagger,
        )
        for side in ("a", "b")
    }
    spec = SessionSpec(
        duration=round(config["duration_s"] * FS_PER_SECOND),
        instruments_a=instruments["a"],
        instruments_b=instruments["b"],
        link=build_link(config["link"]),
    )
    clocks = {
        side: ClockState(build_clock_model(config["clocks"][side]), rng_stream=(seed, "clock", side))
        for side in ("a", "b")
    }
    metadata = {"scenario": _scenario_hash(config)}
    streams = run_session(
        spec, clocks["a"], clocks["b"], (seed, "session"), metadata=metadata
    )

    out_dir = _out_dir(args, config)
    files = {
        "a_local": out_dir / "a_local.tags",
        "b_from_a": out_dir / "b_from_a.tags",
        "b_local": out_dir / "b_local.tags",
        "a_from_b": out_dir / "a_from_b.tags",
    }
    write_timetag_file(files["a_local"], streams.local_a)
    write_timetag_file(files["b_from_a"], streams.remote_ab)
    write_timetag_file(files["b_local"], streams.local_b)
    write_timetag_file(files["a_from_b"], streams.remote_ba)
    for path in files.values():
        read_timetag_file(path)  # zero exit promises artifacts that validate

    cfg = build_correlation(config.get("correlation"))
    d_ab = cross_correlate(streams.local_a, streams.remote_ab, cfg)
    d_ba = cross_correlate(streams.local_b, streams.remote_ba, cfg)
    result = two_way_offset(d_ab, d_ba)
    payload = _two_way_dict(result)
    payload["truth"] = dataclasses.asdict(streams.truth)
    # basenames keep the artifact byte-identical across output directories
    payload["files"] = {k: v.name for k, v in files.items()}
    if cfg.block_count >= 2:
        fit = frequency_track(
            streams.local_a, streams.remote_ab, streams.local_b, streams.remote_ba, cfg
        )
        payload["frequency"] = dataclasses.asdict(fit)
    atomic_write_text(out_dir / "twoway_result.json", _stable_json(payload))
    print(
        f"theta_fs={result.clock_offset} flight_fs={result.flight_time} "
        f"uncertainty_fs={result.offset_uncertainty}"
    )
    return EXIT_OK


def cmd_estimate(args) -> int:
    streams = [read_timetag_file(p) for p in args.tagfiles]
    config = load_scenario(args.config) if args.config else {}
    cfg = build_correlation(config.get("correlation")) if config else CorrelationConfig()
    local_a, remote_ab, local_b, remote_ba = streams
    d_ab = cross_correlate(local_a, remote_ab, cfg)
    d_ba = cross_correlate(local_b, remote_ba, cfg)
    result = two_way_offset(d_ab, d_ba)
    payload = _two_way_dict(result)
    if cfg.block_count >= 2:
        fit = frequency_track(local_a, remote_ab, local_b, remote_ba, cfg)
        payload["frequency"] = dataclasses.asdict(fit)
    text = _stable_json(payload)
    sys.stdout.write(text)
    if args.out:
        atomic_write_text(Path(args.out) / "estimate_result.json", text)
    return EXIT_OK


def cmd_relativity(args) -> int:
    config = _load_config(args)
    _require(config, "link")
    link = build_link(config["link"])
    geometry = link.geometry
    rel_cfg = config.get("relativity") or {}
    if isinstance(geometry, StaticRange):
        default_horizon = 1.0
    else:
        default_horizon = orbital_period(geometry)
    horizon_s = rel_cfg.get("horizon_s", default_horizon)
    n_samples = rel_cfg.get("samples", 100)
    horizon_fs = round(horizon_s * FS_PER_SECOND)
    step_fs = max(horizon_fs // (n_samples - 1), 1)

    samples = []
    for i in range(n_samples):
        t = min(i * step_fs, horizon_fs)
        geo = sample_geometry(geometry, t)
        entry = {
            "t_s": t / FS_PER_SECOND,
            "range_m": geo.range_m,
            "elevation_deg": math.degrees(geo.elevation),
            "visible": geo.visible,
            "shapiro_fs": shapiro_delay(geo.r_station_m, geo.r_sat_m, geo.range_m),
        }
        if geo.visible:
            entry["flight_ab_fs"] = time_of_flight(link, t, Direction.A_TO_B)
            entry["flight_ba_fs"] = time_of_flight(link, t, Direction.B_TO_A)
        else:
            entry["flight_ab_fs"] = None
            entry["flight_ba_fs"] = None
        samples.append(entry)

    payload = {
        "samples": samples,
        "visibility_windows": visibility_windows(geometry, 0, horizon_fs, step_fs),
    }
    if isinstance(geometry, StaticRange):
        payload["orbital_period_s"] = None
        payload["rate_offset"] = None
    else:
        payload["orbital_period_s"] = orbital_period(geometry)
        payload["rate_offset"] = relativistic_rate_offset(geometry)

    out_dir = _out_dir(args, config)
    if args.format == "csv":
        header = "t_s,range_m,elevation_deg,visible,flight_ab_fs,flight_ba_fs,shapiro_fs"
        rows = [
            f"{s['t_s']},{s['range_m']},{s['elevation_deg']},{int(s['visible'])},"
            f"{'' if s['flight_ab_fs'] is None else s['flight_ab_fs']},"
            f"{'' if s['flight_ba_fs'] is None else s['flight_ba_fs']},{s['shapiro_fs']}"
            for s in samples
        ]
        atomic_write_text(out_dir / "relativity_samples.csv", "\n".join([header] + rows) + "\n")
    atomic_write_text(out_dir / "relativity_report.json", _stable_json(payload))
    sys.stdout.write(_stable_json(payload))
    return EXIT_OK


def cmd_bell(args) -> int:
    config = _load_config(args)
    _require(config, "bell")
    model, settings, pairs, policy = build_bell(config["bell"])
    counts = simulate_coincidences(model, settings, pairs, (config["seed"], "bell"))
    estimate = chsh_value(counts)
    decision = authenticate(estimate, policy)
    payload = {
        "S": estimate.S,
        "standard_error": estimate.standard_error,
        "counts_per_setting": estimate.counts_per_setting,
        "decision": decision,
        "policy": dataclasses.asdict(policy),
        "visibility": model.visibility,
        "pairs_per_setting": pairs,
    }
    text = _stable_json(payload)
    sys.stdout.write(text)
    out_dir = _out_dir(args, config)
    atomic_write_text(out_dir / "bell_report.json", text)
    return EXIT_OK


def cmd_net(args) -> int:
    config = _load_config(args)
    _require(config, "topology")
    topology, horizon_fs, report_interval_fs = build_topology(config["topology"])
    report = run_network(topology, horizon_fs, config["seed"], report_interval_fs)
    payload = report.to_dict()
    payload["baseline"] = gps_baseline_comparison(report)
    out_dir = _out_dir(args, config)
    atomic_write_text(out_dir / "network_report.json", _stable_json(payload))
    for node_id in report.node_ids:
        rows = ["epoch_s,error_fs"] + [
            f"{t / FS_PER_SECOND},{err}"
            for t, err in zip(report.epochs_fs, report.errors_fs[node_id])
        ]
        atomic_write_text(out_dir / f"node_{node_id}.csv", "\n".join(rows) + "\n")
    worst = payload["summary"]["max_abs_error_fs"]
    print(f"nodes={len(report.node_ids)} epochs={len(report.epochs_fs)} max_abs_error_fs={worst}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qcsync",
        description="Entangled-photon clock synchronization simulator and estimator",
    )
    parser.add_argument("--version", action="version", version=f"qcsync {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, config_required=True):
        p.add_argument("--config", help="scenario config JSON path", required=False)
        p.add_argument("--seed", type=int, help="override the config master seed")
        p.add_argument("--out", help="output directory (default: config output.dir or .)")
        p.add_argument("--format", choices=["json", "csv"], default="json")

    p = sub.add_parser("simulate", help="run one two-node session end to end")
    add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="two-way estimation on recorded timetag files")
    p.add_argument(
        "tagfiles",
        nargs=4,
        metavar=("A_LOCAL", "B_FROM_A", "B_LOCAL", "A_FROM_B"),
        help="four timetag files: A local, A's pairs at B, B local, B's pairs at A",
    )
    add_common(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("relativity", help="geometry, flight time, and rate report")
    add_common(p)
    p.set_defaults(func=cmd_relativity)

    p = sub.add_parser("bell", help="CHSH simulation and authentication decision")
    add_common(p)
    p.set_defaults(func=cmd_bell)

    p = sub.add_parser("net", help="hierarchical network synchronization simulation")
    add_common(p)
    p.set_defaults(func=cmd_net)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _ESTIMATION_ERRORS as exc:
        print(f"estimation failed: {exc}", file=sys.stderr)
        return EXIT_ESTIMATION
    except TagFileError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except _CONFIG_ERRORS as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()

"""Command-line entry point.

Subcommands: calibrate (fit a path-loss model from a calibration CSV),
distance (replicate the distance-estimation experiment), proximity
(replicate the identification grid), and serve (run the parking lot
line-protocol server). Every result directory gets a run manifest before
any result file, and result files are written atomically.

Exit codes: 0 success, 1 runtime error, 2 input error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace

import numpy
import scipy

from . import __version__
from .parking import service_from_files
from .pathloss import (
    RankDeficientError,
    fit_model,
    fit_result_to_json_dict,
    read_calibration_csv,
)
from .server import ParkingTCPServer, SimulatedClock, SystemClock, parse_bind_address
from .simulate import (
    ExperimentSpec,
    scenario_from_dict,
    run_distance_experiment,
    run_proximity_experiment,
    write_distance_csv,
    write_proximity_csv,
)

PARTICLE_SWEEP = tuple(range(200, 2001, 200))
DEFAULT_DISTANCES = (0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0)
DEFAULT_PROXIMITY_GRID = tuple(
    (x, y) for x in (1.0, 1.5, 2.0, 2.5, 3.0) for y in (0.5, 1.0, 1.5, 2.0, 2.5)
)


class InputError(Exception):
    """Bad user input (malformed file, invalid values): exit code 2."""


def atomic_write_text(path: str, text: str) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def write_manifest(out_dir: str, command: str, seed: int, scenario_path: str | None) -> None:
    manifest = {
        "command": command,
        "scenario_path": scenario_path,
        "seed": seed,
        "output_dir": os.path.abspath(out_dir),
        "versions": {
            "beaconpark": __version__,
            "python": sys.version.split()[0],
            "numpy": numpy.__version__,
            "scipy": scipy.__version__,
        },
    }
    atomic_write_text(os.path.join(out_dir, "manifest.json"), json.dumps(manifest, indent=2) + "\n")


def _load_scenario_file(path: str, seed_override: int | None):
    try:
        with open(path) as fh:
            obj = json.load(fh)
    except FileNotFoundError as exc:
        raise InputError(f"scenario file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"scenario file is not valid JSON: {exc}") from exc
    if seed_override is not None:
        obj["seed"] = seed_override
        obj.setdefault("filter", {}).pop("seed", None)
    try:
        return scenario_from_dict(obj)
    except (KeyError, ValueError) as exc:
        raise InputError(f"invalid scenario: {exc}") from exc


def cmd_calibrate(args) -> int:
    try:
        dataset = read_calibration_csv(args.input)
    except FileNotFoundError as exc:
        raise InputError(f"calibration CSV not found: {args.input}") from exc
    except RankDeficientError as exc:
        raise InputError(f"rank-deficient: {exc}") from exc
    except ValueError as exc:
        raise InputError(f"invalid calibration CSV: {exc}") from exc
    counts = set(dataset.sample_counts().values())
    if len(counts) > 1:
        print("warning: unequal sample counts per distance", file=sys.stderr)

    os.makedirs(args.out_dir, exist_ok=True)
    write_manifest(args.out_dir, "calibrate", args.seed or 0, None)
    try:
        fit = fit_model(dataset)
    except RankDeficientError as exc:
        raise InputError(f"rank-deficient: {exc}") from exc
    atomic_write_text(args.out, json.dumps(fit_result_to_json_dict(fit), indent=2) + "\n")
    print(
        f"n={fit.model.exponent:.6f} ci95=({fit.exponent_ci95[0]:.6f}, {fit.exponent_ci95[1]:.6f})"
    )
    print(
        f"C={fit.model.ref_rssi_dbm:.6f} ci95=({fit.ref_rssi_ci95[0]:.6f}, {fit.ref_rssi_ci95[1]:.6f})"
    )
    print(f"residual_std={fit.residual_std_db:.6f}")
    print(f"wrote {args.out}")
    return 0


def _experiment_or_default(experiment, kind: str, default_grid, default_reps: int):
    if experiment is None:
        return ExperimentSpec(kind=kind, grid=default_grid, repetitions=default_reps)
    if experiment.kind != kind:
        raise InputError(f"scenario experiment kind is {experiment.kind!r}, expected {kind!r}")
    return experiment


def cmd_distance(args) -> int:
    scenario, experiment, config = _load_scenario_file(args.scenario, args.seed)
    experiment = _experiment_or_default(experiment, "distance", DEFAULT_DISTANCES, 3)
    try:
        distances = [float(d) for d in experiment.grid]
    except TypeError as exc:
        raise InputError(f"distance experiment grid must be a list of distances: {exc}") from exc
    os.makedirs(args.out_dir, exist_ok=True)
    write_manifest(args.out_dir, "distance", scenario.seed, args.scenario)

    rows = []
    sweep = PARTICLE_SWEEP if args.sweep else (config.particle_count,)
    for n_particles in sweep:
        result = run_distance_experiment(
            scenario,
            distances,
            replace(config, particle_count=n_particles),
            repetitions=experiment.repetitions,
        )
        rows.extend(result.rows)
    out_path = os.path.join(args.out_dir, "distance_results.csv")
    _write_csv_atomically(out_path, write_distance_csv, rows)
    print(f"wrote {out_path} ({len(rows)} rows)")
    return 0


def cmd_proximity(args) -> int:
    scenario, experiment, config = _load_scenario_file(args.scenario, args.seed)
    experiment = _experiment_or_default(experiment, "proximity", DEFAULT_PROXIMITY_GRID, 1)
    try:
        pairs = [(float(x), float(y)) for x, y in experiment.grid]
    except (TypeError, ValueError) as exc:
        raise InputError(f"proximity experiment grid must be [X, Y] pairs: {exc}") from exc
    os.makedirs(args.out_dir, exist_ok=True)
    write_manifest(args.out_dir, "proximity", scenario.seed, args.scenario)

    results = run_proximity_experiment(scenario, pairs, config)
    out_path = os.path.join(args.out_dir, "proximity_results.csv")
    _write_csv_atomically(out_path, write_proximity_csv, results)
    print(f"wrote {out_path} ({2 * len(results)} rows)")
    return 0


def cmd_serve(args) -> int:
    os.makedirs(args.out_dir, exist_ok=True)
    write_manifest(args.out_dir, "serve", args.seed or 0, None)
    journal_path = args.journal or os.path.join(args.out_dir, "parking.journal")
    try:
        service = service_from_files(args.lot, journal_path)
    except FileNotFoundError as exc:
        raise InputError(f"lot config not found: {args.lot}") from exc
    except (json.JSONDecodeError, KeyError, ValueError) as exc:
        raise InputError(f"invalid lot config: {exc}") from exc
    clock = SimulatedClock() if args.clock == "simulated" else SystemClock()
    host, port = parse_bind_address(args.bind)
    server = ParkingTCPServer((host, port), service, clock)
    actual_host, actual_port = server.server_address[:2]
    print(f"serving on {actual_host}:{actual_port} (journal: {journal_path})", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


def _write_csv_atomically(path: str, writer_fn, payload) -> None:
    tmp = f"{path}.tmp"
    writer_fn(tmp, payload)
    os.replace(tmp, path)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="beaconpark",
        description="BLE-beacon smart parking toolkit",
    )
    parser.add_argument("--seed", type=int, default=None, help="override the master seed")
    parser.add_argument("--out-dir", default=".", help="directory for result files")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("calibrate", help="fit a path-loss model from a calibration CSV")
    p.add_argument("--input", required=True, help="CSV with distance_m,rssi_dbm rows")
    p.add_argument("--out", required=True, help="output JSON path for the fit result")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("distance", help="run the distance-estimation experiment")
    p.add_argument("--scenario", required=True, help="scenario JSON path")
    p.add_argument(
        "--sweep",
        action="store_true",
        help="sweep particle counts 200..2000 instead of the configured count",
    )
    p.set_defaults(func=cmd_distance)

    p = sub.add_parser("proximity", help="run the proximity-identification experiment")
    p.add_argument("--scenario", required=True, help="scenario JSON path")
    p.set_defaults(func=cmd_proximity)

    p = sub.add_parser("serve", help="serve the parking lot line protocol")
    p.add_argument("--lot", required=True, help="lot definition JSON path")
    p.add_argument("--bind", default="127.0.0.1:7810", help="host:port to listen on")
    p.add_argument(
        "--clock",
        choices=("system", "simulated"),
        default="system",
        help="simulated accepts TICK commands for deterministic billing",
    )
    p.add_argument("--journal", default=None, help="journal path (default: out-dir/parking.journal)")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"ERR {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"ERR {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - the CLI boundary reports and exits
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

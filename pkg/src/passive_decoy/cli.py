"""Command-line front end.

Subcommands: distribution, keyrate, simulate, ingest, optimize, scan.

Exit codes: 0 success (for ``keyrate``: a positive rate), 2 validation
failure, 3 parse failure, 4 no key (rate is zero), 1 unexpected error.
Outputs are identical regardless of the PASSIVE_DECOY_THREADS environment
variable, which is reserved for internal worker counts.
"""

from __future__ import annotations

import argparse
import json
import sys

from .bounds import key_rate
from .config import RunConfig, load_run_config
from .errors import (ConfigError, DegenerateSourceError, IngestError,
                     ParameterError, TruncationError)
from .optimize import AxisSpec, SearchSpace, optimize, scan_rate_vs_distance
from .records import ingest_records, write_records_csv
from .reports import (distribution_csv, distribution_report, dump_json,
                      keyrate_report_payload, observed_from_payload,
                      optimization_csv, optimization_payload, scan_csv,
                      scan_payload, stats_payload)
from .simulate import monte_carlo_run
from .statistics import branch_distributions

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_VALIDATION = 2
EXIT_PARSE = 3
EXIT_NO_KEY = 4


def _write_text(text: str, out_path: str | None) -> None:
    if out_path is None or out_path == "-":
        sys.stdout.write(text)
    else:
        with open(out_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _dists_from_config(config: RunConfig):
    num = config.numerics
    return branch_distributions(config.source, config.alice_detector,
                                num.n_max, nodes=num.theta_nodes,
                                tail_tol=num.tail_tol)


def _load_stats_file(path: str):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise IngestError(f"cannot read stats file {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise IngestError(
            f"stats file {path} is not valid JSON "
            f"(line {exc.lineno}, column {exc.colno}): {exc.msg}") from None
    return observed_from_payload(doc)


def cmd_distribution(args: argparse.Namespace) -> int:
    config = load_run_config(args.config)
    dists = _dists_from_config(config)
    if args.format == "csv":
        _write_text(distribution_csv(dists), args.out)
    else:
        _write_text(dump_json(distribution_report(config, dists)), args.out)
    return EXIT_OK


def cmd_keyrate(args: argparse.Namespace) -> int:
    config = load_run_config(args.config)
    stats = _load_stats_file(args.stats)
    dists = _dists_from_config(config)
    report = key_rate(dists, stats, config.key_params)
    payload = keyrate_report_payload(report, stats, config.key_params)
    _write_text(dump_json(payload), args.out)
    return EXIT_OK if report.r_total > 0.0 else EXIT_NO_KEY


def cmd_simulate(args: argparse.Namespace) -> int:
    config = load_run_config(args.config)
    if config.channel is None:
        raise ConfigError("simulate requires a channel section in the config")
    seed = args.seed if args.seed is not None else config.seed
    if seed is None:
        raise ConfigError("simulate requires a seed (flag --seed or config)")
    if args.pulses < 1:
        raise ParameterError(f"--pulses must be >= 1 (got {args.pulses})")

    batches = []
    result = monte_carlo_run(config.source, config.alice_detector,
                             config.channel, args.pulses, seed,
                             record_sink=batches.append)
    write_records_csv(args.out, batches)
    provenance = {
        "source_path": args.out,
        "records": result.tallies.pulses,
        "sifted": result.tallies.sifted,
        "sifted_clicks": result.tallies.sifted_clicks,
        "detections_click": result.tallies.det_click,
        "detections_noclick": result.tallies.det_noclick,
        "errors_click": result.tallies.err_click,
        "errors_noclick": result.tallies.err_noclick,
        "seed": seed,
        "pulses": result.n_pulses,
    }
    _write_text(dump_json(stats_payload(result.stats, provenance)),
                args.stats_out)
    return EXIT_OK


def cmd_ingest(args: argparse.Namespace) -> int:
    try:
        ingested = ingest_records(args.records)
    except OSError as exc:
        raise IngestError(f"cannot read records file: {exc}") from None
    payload = stats_payload(ingested.stats, ingested.provenance())
    _write_text(dump_json(payload), args.out)
    return EXIT_OK


def cmd_optimize(args: argparse.Namespace) -> int:
    config = load_run_config(args.config)
    if config.channel is None:
        raise ConfigError("optimize requires a channel section in the config")
    if config.search is None:
        raise ConfigError("optimize requires a search section in the config")
    s = config.search
    space = SearchSpace(
        mu1=AxisSpec(*s.mu1), mu2=AxisSpec(*s.mu2), t=AxisSpec(*s.t),
        channel=config.channel, alice_detector=config.alice_detector,
        refinement_levels=s.refinement_levels, key_params=config.key_params,
        overlap=config.source.overlap, n_max=config.numerics.n_max,
        theta_nodes=config.numerics.theta_nodes)
    result = optimize(space)
    if args.format == "json":
        _write_text(dump_json(optimization_payload(result)), args.out)
    else:
        _write_text(optimization_csv(result), args.out)
    return EXIT_OK


def cmd_scan(args: argparse.Namespace) -> int:
    config = load_run_config(args.config)
    if config.channel is None:
        raise ConfigError("scan requires a channel section in the config")
    try:
        lengths = [float(part) for part in args.lengths.split(",") if part.strip()]
    except ValueError:
        raise ParameterError(f"--lengths must be comma-separated numbers "
                             f"(got {args.lengths!r})") from None
    src = config.source
    rows = scan_rate_vs_distance(
        (src.mu1, src.mu2, src.t), config.alice_detector, config.channel,
        lengths, config.key_params, overlap=src.overlap,
        n_max=config.numerics.n_max, theta_nodes=config.numerics.theta_nodes)
    if args.format == "json":
        _write_text(dump_json(scan_payload(rows)), args.out)
    else:
        _write_text(scan_csv(rows), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="passive-decoy",
        description="Passive decoy-state QKD: photon statistics, security "
                    "bounds, key rates, and pulse-level simulation.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("distribution",
                       help="branch photon-number distributions and g2")
    p.add_argument("--config", required=True, help="run configuration JSON")
    p.add_argument("--out", default=None, help="output path (default stdout)")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.set_defaults(handler=cmd_distribution)

    p = sub.add_parser("keyrate", help="secret key rate from observed statistics")
    p.add_argument("stats", help="observed statistics JSON file")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(handler=cmd_keyrate)

    p = sub.add_parser("simulate", help="pulse-level Monte Carlo run")
    p.add_argument("--config", required=True)
    p.add_argument("--pulses", type=int, required=True)
    p.add_argument("--seed", type=int, default=None,
                   help="overrides the config seed")
    p.add_argument("--out", required=True, help="click-record CSV path")
    p.add_argument("--stats-out", default=None,
                   help="aggregated statistics JSON path (default stdout)")
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("ingest", help="aggregate a click-record CSV")
    p.add_argument("records", help="click-record CSV file")
    p.add_argument("--out", default=None)
    p.set_defaults(handler=cmd_ingest)

    p = sub.add_parser("optimize", help="grid search for the best source point")
    p.add_argument("--config", required=True,
                   help="config with channel and search sections")
    p.add_argument("--out", default=None)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(handler=cmd_optimize)

    p = sub.add_parser("scan", help="key rate versus fiber length")
    p.add_argument("--config", required=True)
    p.add_argument("--lengths", required=True,
                   help="comma-separated fiber lengths in km")
    p.add_argument("--out", default=None)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(handler=cmd_scan)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except (ConfigError, TruncationError, DegenerateSourceError,
            ParameterError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except IngestError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE


def entry_point() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry_point()

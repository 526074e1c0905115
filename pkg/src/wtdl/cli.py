"""Command line interface.

Three subcommands:

* ``simulate`` runs a Monte Carlo study from a JSON config and writes
  records.csv plus summary.json into the output directory.
* ``estimate`` fits the pipeline on one CSV of observations and emits
  the coefficient estimates as JSON.
* ``report`` recomputes per-coefficient summary statistics from a
  records.csv produced by ``simulate``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace

from .errors import DataError, NumericalError
from .simulation import (
    StudyConfig,
    estimate_from_csv,
    read_records,
    run_study,
    summarize_records,
    write_report,
)

__all__ = ["main", "build_parser"]

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3


class _Parser(argparse.ArgumentParser):
    """argparse parser that reports usage problems with exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(message)


class _UsageError(Exception):
    pass


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="wtdl", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sim = sub.add_parser("simulate", help="run a Monte Carlo study")
    sim.add_argument("--config", required=True, help="path to a study config JSON")
    sim.add_argument("--reps", type=int, default=None, help="override replication count")
    sim.add_argument("--seed", type=int, default=None, help="override master seed")
    sim.add_argument("--parallelism", type=int, default=None, help="worker processes")
    sim.add_argument("--out", required=True, help="output directory")

    est = sub.add_parser("estimate", help="estimate from a CSV")
    est.add_argument("--data", required=True, help="observations CSV (y,d,x1,...,xp)")
    est.add_argument("--m", type=int, default=2, help="cross-fitting folds")
    est.add_argument(
        "--lambda", dest="lambda_method", choices=("theory", "cv"), default="theory",
        help="penalty selection rule",
    )
    est.add_argument(
        "--weights", choices=("constant", "covariate"), default="constant",
        help="noise scale model",
    )
    est.add_argument("--alpha", type=float, default=0.05, help="interval miscoverage")
    est.add_argument("--seed", type=int, default=0, help="fold assignment seed")
    est.add_argument("--out", default=None, help="output JSON path (default stdout)")

    rep = sub.add_parser("report", help="summarize a records.csv")
    rep.add_argument("--records", required=True, help="records.csv from simulate")
    rep.add_argument("--out", required=True, help="output JSON path")
    return parser


def _cmd_simulate(args) -> int:
    try:
        with open(args.config, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
        config = StudyConfig.from_dict(raw)
    except (OSError, json.JSONDecodeError, ValueError, TypeError) as exc:
        print(f"wtdl simulate: bad config: {exc}", file=sys.stderr)
        return EXIT_USAGE
    overrides = {}
    if args.reps is not None:
        overrides["replications"] = args.reps
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if args.parallelism is not None:
        overrides["parallelism"] = args.parallelism
    if overrides:
        try:
            config = replace(config, **overrides)
        except ValueError as exc:
            print(f"wtdl simulate: {exc}", file=sys.stderr)
            return EXIT_USAGE
    report = run_study(config)
    write_report(report, args.out)
    failures = sum(
        block["replication_level"]["failures"]
        for block in report.summary["estimators"].values()
    )
    print(
        f"wrote {args.out}/records.csv and {args.out}/summary.json "
        f"({config.replications} replications, {failures} failures)"
    )
    return EXIT_OK


def _cmd_estimate(args) -> int:
    weight_mode = {
        "constant": "constant_per_arm",
        "covariate": "covariate_dependent",
    }[args.weights]
    if not 0.0 < args.alpha < 1.0:
        print(f"wtdl estimate: alpha must lie in (0, 1), got {args.alpha}", file=sys.stderr)
        return EXIT_USAGE
    if args.m < 2:
        print(f"wtdl estimate: m must be at least 2, got {args.m}", file=sys.stderr)
        return EXIT_USAGE
    try:
        result = estimate_from_csv(
            args.data, m=args.m, lambda_method=args.lambda_method,
            weight_mode=weight_mode, alpha=args.alpha, seed=args.seed,
        )
    except OSError as exc:
        print(f"wtdl estimate: cannot read data: {exc}", file=sys.stderr)
        return EXIT_DATA
    text = json.dumps(result, indent=2, sort_keys=True) + "\n"
    if args.out is None:
        sys.stdout.write(text)
    else:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    return EXIT_OK


def _cmd_report(args) -> int:
    try:
        rows = read_records(args.records)
    except OSError as exc:
        print(f"wtdl report: cannot read records: {exc}", file=sys.stderr)
        return EXIT_DATA
    summary = {"estimators": {}}
    per_coef = summarize_records(rows)
    for name, block in per_coef.items():
        summary["estimators"][name] = {"per_coefficient": block}
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"wtdl: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        if args.command == "simulate":
            return _cmd_simulate(args)
        if args.command == "estimate":
            return _cmd_estimate(args)
        return _cmd_report(args)
    except DataError as exc:
        print(f"wtdl: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"wtdl: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())

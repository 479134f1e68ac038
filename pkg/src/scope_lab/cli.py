"""Command line entry point.

Three subcommands:

    scope-lab run <config> [--jobs N] [--out DIR]
    scope-lab verify
    scope-lab plot <csv> --column <name> --out <svg>

Exit codes: 0 success, 1 configuration or I/O error, 2 verification failure.
The SCOPE_LAB_SEED environment variable (comma-separated integers) overrides
the seed list of `run`, which keeps batch scripts from having to rewrite
config files.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

from .exceptions import ConfigError
from .experiment import parse_config_file, run_experiment
from .svgplot import emit_plot
from .verification import run_all_checks


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="scope-lab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment from a config file")
    run.add_argument("config", help="path to a key = value config file")
    run.add_argument("--jobs", type=int, default=1, help="worker processes (default 1)")
    run.add_argument("--out", default=None, help="override the config's output_dir")

    sub.add_parser("verify", help="run the analytic self-checks")

    plot = sub.add_parser("plot", help="render one metrics column as an SVG")
    plot.add_argument("csv", help="metrics CSV produced by `run`")
    plot.add_argument("--column", required=True, help="column to plot against step")
    plot.add_argument("--out", required=True, help="output SVG path")
    return parser


def _cmd_run(args) -> int:
    config = parse_config_file(args.config)
    if args.out is not None:
        config = replace(config, output_dir=args.out)
    seed_env = os.environ.get("SCOPE_LAB_SEED")
    if seed_env is not None:
        try:
            seeds = tuple(int(part.strip()) for part in seed_env.split(","))
        except ValueError:
            raise ConfigError(f"SCOPE_LAB_SEED must be comma-separated integers, got {seed_env!r}")
        config = replace(config, seeds=seeds)
    result = run_experiment(config, jobs=args.jobs)
    if result.checks is not None:
        for check in result.checks:
            print(f"{'PASS' if check.passed else 'FAIL'} {check.name}: {check.detail}")
        if not result.checks_passed:
            return 2
    print(f"wrote {result.summary_path}")
    return 0


def _cmd_verify() -> int:
    checks = run_all_checks()
    failed = 0
    for check in checks:
        print(f"{'PASS' if check.passed else 'FAIL'} {check.name}: {check.detail}")
        failed += not check.passed
    print(f"{len(checks) - failed}/{len(checks)} checks passed")
    return 2 if failed else 0


def _cmd_plot(args) -> int:
    out = emit_plot(args.csv, args.column, args.out)
    print(f"wrote {out}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "verify":
            return _cmd_verify()
        return _cmd_plot(args)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

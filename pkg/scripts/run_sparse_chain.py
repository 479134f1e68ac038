#!/usr/bin/env python3
"""Compare clipped-ratio training with and without probability weighting on
the sparse corridor, where only sustained exploration ever sees the goal."""

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from scope_lab.experiment import default_config, run_experiment


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--seeds", default=None, help="comma-separated seed list")
    parser.add_argument("--jobs", type=int, default=1)
    parser.add_argument("--total-steps", type=int, default=None,
                        help="shorten the run (default 50000 env steps per trial)")
    args = parser.parse_args()

    config = default_config("sparse_chain")
    if args.out is not None:
        config = replace(config, output_dir=args.out)
    if args.seeds is not None:
        config = replace(config, seeds=tuple(int(s) for s in args.seeds.split(",")))
    if args.total_steps is not None:
        config = replace(config, train=replace(config.train, total_steps=args.total_steps))

    result = run_experiment(config, jobs=args.jobs)
    print(Path(result.summary_path).read_text(), end="")
    print(f"# wrote {result.summary_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

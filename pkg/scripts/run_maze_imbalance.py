#!/usr/bin/env python3
"""Run the binary-maze imbalance comparison and print the summary table.

Trains the plain policy loss, the entropy-bias loss, and the probability-
weighted loss on the one-step maze, then reports per-seed exploitation
measures (final high-reward-arm probability, buffer fraction) and the mean
policy entropy over the first quarter of training.
"""

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
    args = parser.parse_args()

    config = default_config("maze_imbalance")
    if args.out is not None:
        config = replace(config, output_dir=args.out)
    if args.seeds is not None:
        config = replace(config, seeds=tuple(int(s) for s in args.seeds.split(",")))

    result = run_experiment(config, jobs=args.jobs)
    print(Path(result.summary_path).read_text(), end="")
    print(f"# wrote {result.summary_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

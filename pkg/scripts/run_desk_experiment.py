#!/usr/bin/env python3
"""Desk-scale bias curves (128 x 32, 100 replicates) with an SVG plot.

Usage: python3 scripts/run_desk_experiment.py [OUT_DIR] [--reps R] [--threads T]
"""

import argparse
import sys

from robustfit.cli import main as cli_main


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("out", nargs="?", default="desk_run")
    ap.add_argument("--reps", type=int, default=100)
    ap.add_argument("--threads", type=int)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    argv = ["experiment", "--n", "128", "--p", "32", "--reps", str(args.reps),
            "--seed", str(args.seed), "--out", args.out, "--svg"]
    if args.threads:
        argv += ["--threads", str(args.threads)]
    return cli_main(argv)


if __name__ == "__main__":
    sys.exit(main())

#!/usr/bin/env python3
"""Leverage constants, m(X) and kappa(X) for a few random Gaussian designs."""

import argparse

import numpy as np

from robustfit.breakdown import breakdown_report
from robustfit.linalg import build_design


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=12)
    ap.add_argument("--p", type=int, default=2)
    ap.add_argument("--designs", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    print("design,m,kappa,uniqueness_threshold,c_1,c_2,c_3")
    for i in range(args.designs):
        rep = breakdown_report(build_design(rng.standard_normal((args.n, args.p))))
        c = [f"{v:.15g}" for v in rep.c[1:4]]
        print(f"{i},{rep.m},{rep.kappa},{rep.uniqueness_threshold:g}," + ",".join(c))


if __name__ == "__main__":
    main()

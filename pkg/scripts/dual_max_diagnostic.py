#!/usr/bin/env python3
"""Compare the sampled and exact (LP) maxima of d^T (e + b) over sigma P*
against the bound checked by ``check_tecnico``, on the audit instances.

The exact maximum exceeds the bound on most instances; this script prints
how often, for general ``b`` and for ``b`` restricted to ker(X^T).
"""

import numpy as np

from robustfit.bounds import check_tecnico, tecnico_exact_max
from robustfit.breakdown import breakdown_report
from robustfit.linalg import build_design, residual_project


def main(instances=200, samples=500, seed=0):
    rng = np.random.default_rng(seed)
    tally = {"general": [0, 0], "kernel": [0, 0]}
    for _ in range(instances):
        n, p = int(rng.integers(8, 13)), int(rng.integers(1, 3))
        D = build_design(rng.standard_normal((n, p)))
        rep = breakdown_report(D)
        k = int(rng.integers(0, rep.m + 1))
        e = np.zeros(n)
        e[rng.choice(n, k, replace=False)] = rng.uniform(1, 20, k)
        sigma = float(rng.uniform(0.1, 3.0))
        b = rng.standard_normal(n)
        for name, bb in (("general", b), ("kernel", residual_project(D, b))):
            chk = check_tecnico(D, bb, e, sigma, samples, rng, rep)
            tally[name][0] += not chk.satisfied
            tally[name][1] += tecnico_exact_max(D, e + bb, sigma) > chk.rhs * (1 + 1e-9)
    for name, (sampled, exact) in tally.items():
        print(f"{name:8s} b: sampled violations {sampled}/{instances}, "
              f"exact-LP violations {exact}/{instances}")


if __name__ == "__main__":
    main()

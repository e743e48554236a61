"""Command-line entry point: ``robustfit {fit,breakdown,experiment,verify}``."""

import argparse
import csv
import sys
import time

import numpy as np

from . import bounds, breakdown, experiment
from .contamination import KINDS
from .errors import RobustFitError
from .estimators import fit_l1, fit_l1l2, fit_lse
from .linalg import build_design


def read_matrix(path):
    """CSV without header, one row per line, comma-separated decimals."""
    X = np.loadtxt(path, delimiter=",", ndmin=2)
    return X


def read_vector(path):
    return np.loadtxt(path, delimiter=",", ndmin=1).ravel()


def _g(v):
    return f"{v:.15g}"


def cmd_fit(args, out):
    D = build_design(read_matrix(args.design))
    y = read_vector(args.obs)
    if len(y) != D.n:
        raise RobustFitError(f"observations have length {len(y)}, design has {D.n} rows")
    if args.method == "lse":
        fit = fit_lse(D, y)
    elif args.method == "l1":
        fit = fit_l1(D, y)
    else:
        sigma = args.sigma if args.sigma is not None else experiment.sigma_default()
        fit = fit_l1l2(D, y, sigma)
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["j", "g_hat"])
    for j, v in enumerate(fit.g_hat):
        w.writerow([j, _g(v)])
    out.write(f"# method={fit.method} objective={_g(fit.objective)} "
              f"iterations={fit.iterations} converged={int(fit.converged)}\n")
    return 0


def cmd_breakdown(args, out):
    D = build_design(read_matrix(args.design))
    rep = breakdown.breakdown_report(D, args.kmax)
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["k", "c_k", "witness_indices"])
    for k, (c, (M, _)) in enumerate(zip(rep.c, rep.witnesses)):
        w.writerow([k, _g(c), " ".join(str(i) for i in M)])
    out.write(f"# m={rep.m} kappa={rep.kappa} "
              f"uniqueness_threshold={_g(rep.uniqueness_threshold)}"
              + (f" boundary_k={','.join(map(str, rep.boundary))}" if rep.boundary else "")
              + "\n")
    return 0


def cmd_experiment(args, out):
    kinds = tuple(k.strip() for k in args.kinds.split(",") if k.strip())
    grid = None
    if args.kmax is not None or args.kmin is not None:
        top = args.kmax if args.kmax is not None else experiment.max_k(args.n, args.p)
        grid = tuple(range(args.kmin or 1, top + 1, args.kstep))
    cfg = experiment.ExperimentConfig(n=args.n, p=args.p, kinds=kinds, k_grid=grid,
                                      replicates=args.reps, sigma=args.sigma,
                                      master_seed=args.seed)
    if cfg.long_running:
        print("warning: full-scale configuration, expect a long run",
              file=sys.stderr)
    t0 = time.perf_counter()
    records = experiment.run_records(cfg, args.threads)
    curves = {kind: experiment.aggregate(kind, cfg.n,
                                         [r for r in records if r.kind == kind])
              for kind in cfg.kinds}
    paths = experiment.summarize(curves, args.out, cfg, svg=args.svg)
    if args.records:
        rpath = experiment.Path(args.out) / "trials.csv"
        rpath.write_text(experiment.records_to_csv(records))
        paths.append(rpath)
    failed = sum(not r.ok for r in records)
    out.write(f"# wrote {len(paths)} files to {args.out} in "
              f"{time.perf_counter() - t0:.1f}s; failed trials: {failed}\n")
    return 0


def cmd_verify(args, out):
    results = bounds.run_audit(args.seed, args.instances, args.samples)
    w = csv.writer(out, lineterminator="\n")
    w.writerow(bounds.AUDIT_COLUMNS)
    for row in bounds.audit_to_rows(results):
        w.writerow(row)
    failed = sum(not c.satisfied for _, _, c in results)
    print(f"{len(results) - failed}/{len(results)} checks satisfied",
          file=sys.stderr)
    return 1 if failed else 0


def build_parser():
    ap = argparse.ArgumentParser(prog="robustfit", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit one estimator to CSV data")
    p.add_argument("--design", required=True)
    p.add_argument("--obs", required=True)
    p.add_argument("--method", choices=("lse", "l1", "l1l2"), default="l1l2")
    p.add_argument("--sigma", type=float)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("breakdown", help="leverage constants, m(X) and kappa(X)")
    p.add_argument("--design", required=True)
    p.add_argument("--kmax", type=int)
    p.set_defaults(func=cmd_breakdown)

    p = sub.add_parser("experiment", help="Monte Carlo bias curves")
    p.add_argument("--n", type=int, default=128)
    p.add_argument("--p", type=int, default=32)
    p.add_argument("--kinds", default=",".join(KINDS))
    p.add_argument("--reps", type=int, default=100)
    p.add_argument("--sigma", type=float)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--kmin", type=int)
    p.add_argument("--kmax", type=int)
    p.add_argument("--kstep", type=int, default=1)
    p.add_argument("--threads", type=int,
                   help=f"worker processes (capped by ${experiment.THREADS_ENV})")
    p.add_argument("--svg", action="store_true", help="also write bias_curves.svg")
    p.add_argument("--records", action="store_true", help="also write trials.csv")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("verify", help="audit the error bounds, CSV to stdout")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--instances", type=int, default=200)
    p.add_argument("--samples", type=int, default=500)
    p.set_defaults(func=cmd_verify)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args, sys.stdout)
    except (RobustFitError, OSError, ValueError) as exc:
        print(f"robustfit: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""Monte Carlo bias curves for LSE, l1 and the robust estimator.

One Gaussian design is drawn per experiment. For every contamination kind,
outlier count ``k`` and replicate, fresh noise ``z`` and outliers ``e`` are
drawn from sub-seeds of the master seed, ``y = z + e`` (true coefficients
zero) is fitted by the three estimators, and the bias of each fit is
``||g_hat - f_n|| / ||f_n||`` with ``f_n`` the least-squares fit on ``z``.
"""

import csv
import io
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.special import erfinv

from .contamination import (
    KINDS,
    RNG_METADATA,
    ContaminationSpec,
    derive_seed,
    gen_design,
    gen_noise,
    gen_outliers,
)
from .errors import IoError, NotConverged, RobustFitError
from .estimators import SolverOptions, fit_l1, fit_l1l2, fit_lse
from .linalg import build_design, lse_solve

CURVE_COLUMNS = ("kind", "k", "pct", "mean_lse", "sd_lse", "mean_l1", "sd_l1",
                 "mean_l1l2", "sd_l1l2", "n_ok")
FULL_SCALE_WORK = 512 * 128 * 1000
THREADS_ENV = "ROBUSTFIT_THREADS"


def sigma_default(q=0.95) -> float:
    """Square root of the ``q`` quantile of chi-square with one degree of freedom."""
    # chi2_1 is Z^2, so P(Z^2 <= t^2) = erf(t / sqrt 2)
    return float(np.sqrt(2.0) * erfinv(q))


def max_k(n, p):
    return (n - p - 1) // 2


@dataclass(frozen=True)
class ExperimentConfig:
    n: int = 128
    p: int = 32
    kinds: tuple = KINDS
    k_grid: tuple = None
    replicates: int = 100
    sigma: float = None
    master_seed: int = 0

    def __post_init__(self):
        if not 1 <= self.p < self.n:
            raise ValueError(f"need 1 <= p < n, got n={self.n}, p={self.p}")
        kinds = tuple(self.kinds)
        bad = [k for k in kinds if k not in KINDS]
        if bad:
            raise ValueError(f"unknown kinds {bad}")
        object.__setattr__(self, "kinds", kinds)
        top = max_k(self.n, self.p)
        grid = tuple(range(1, top + 1)) if self.k_grid is None else \
            tuple(int(k) for k in self.k_grid)
        if grid and (max(grid) > top or min(grid) < 0):
            raise ValueError(f"k_grid must lie in [0, (n-p-1)/2 = {top}]")
        object.__setattr__(self, "k_grid", grid)
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        sigma = sigma_default() if self.sigma is None else float(self.sigma)
        if not sigma > 0:
            raise ValueError("sigma must be positive")
        object.__setattr__(self, "sigma", sigma)

    @property
    def long_running(self) -> bool:
        work = self.n * self.p * self.replicates * len(self.k_grid) * len(self.kinds)
        return work >= FULL_SCALE_WORK


@dataclass
class TrialRecord:
    kind: str
    k: int
    replicate: int
    seed: int
    bias_lse: float
    bias_l1: float
    bias_l1l2: float
    iters_l1l2: int
    error: str = ""

    @property
    def ok(self) -> bool:
        return not self.error


@dataclass
class BiasCurve:
    kind: str
    n: int
    rows: list = field(default_factory=list)


@lru_cache(maxsize=8)
def _design(n, p, master_seed):
    return build_design(gen_design(n, p, derive_seed(master_seed, 0)))


def design_for(cfg: ExperimentConfig):
    """The single design shared by every trial of ``cfg``."""
    return _design(cfg.n, cfg.p, cfg.master_seed)


def trial_seed(cfg: ExperimentConfig, kind, k, replicate_index) -> int:
    return derive_seed(cfg.master_seed, 1, KINDS.index(kind), k, replicate_index)


def run_trial(cfg: ExperimentConfig, kind, k, replicate_index,
              opts: SolverOptions | None = None) -> TrialRecord:
    """Fit all three estimators on one contaminated replicate.

    ``k`` may be any value in ``[0, n]``; the configured grid only limits
    what :func:`run_curve` sweeps. Solver failures are recorded in
    ``error`` with NaN biases.
    """
    D = design_for(cfg)
    seed = trial_seed(cfg, kind, k, replicate_index)
    z = gen_noise(cfg.n, derive_seed(seed, 0))
    e, _ = gen_outliers(ContaminationSpec(kind, k, derive_seed(seed, 1)), D.X)
    y = z + e
    f_n = lse_solve(D, z)
    ref = float(np.linalg.norm(f_n))

    def bias(g):
        return float(np.linalg.norm(g - f_n)) / ref

    nan = float("nan")
    try:
        lse = fit_lse(D, y)
        l1 = fit_l1(D, y, opts)
        rob = fit_l1l2(D, y, cfg.sigma, opts)
    except (NotConverged, RobustFitError, np.linalg.LinAlgError) as exc:
        return TrialRecord(kind, k, replicate_index, seed, nan, nan, nan, 0,
                           error=f"{type(exc).__name__}: {exc}")
    return TrialRecord(kind, k, replicate_index, seed, bias(lse.g_hat),
                       bias(l1.g_hat), bias(rob.g_hat), rob.iterations)


def _run_block(args):
    cfg, kind, k = args
    return [run_trial(cfg, kind, k, r) for r in range(cfg.replicates)]


def worker_count(requested=None) -> int:
    """Requested workers, capped by ``ROBUSTFIT_THREADS`` when set."""
    n = requested or os.cpu_count() or 1
    cap = os.environ.get(THREADS_ENV)
    if cap:
        n = min(n, max(1, int(cap)))
    return max(1, n)


def aggregate(kind, n, records) -> BiasCurve:
    """Ordered reduction of trial records into per-``k`` means and sds."""
    by_k = {}
    for rec in sorted(records, key=lambda r: (r.k, r.replicate)):
        by_k.setdefault(rec.k, []).append(rec)
    curve = BiasCurve(kind, n)
    for k, recs in by_k.items():
        good = [r for r in recs if r.ok]
        row = {"kind": kind, "k": k, "pct": 100.0 * k / n, "n_ok": len(good)}
        for name in ("lse", "l1", "l1l2"):
            vals = np.array([getattr(r, f"bias_{name}") for r in good])
            row[f"mean_{name}"] = float(vals.mean()) if len(vals) else float("nan")
            row[f"sd_{name}"] = float(vals.std(ddof=1)) if len(vals) > 1 else 0.0
        curve.rows.append(row)
    return curve


def run_records(cfg: ExperimentConfig, workers=None):
    """All trial records of ``cfg``, ordered by ``(kind, k, replicate)``."""
    tasks = [(cfg, kind, k) for kind in cfg.kinds for k in cfg.k_grid]
    workers = worker_count(workers)
    if workers == 1 or len(tasks) == 1:
        blocks = [_run_block(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            blocks = list(pool.map(_run_block, tasks))
    return [rec for block in blocks for rec in block]


def run_curve(cfg: ExperimentConfig, workers=None) -> dict:
    """Bias curves keyed by contamination kind."""
    records = run_records(cfg, workers)
    return {kind: aggregate(kind, cfg.n, [r for r in records if r.kind == kind])
            for kind in cfg.kinds}


def _fmt(v):
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{v:.15g}"


def curve_to_csv(curve: BiasCurve) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CURVE_COLUMNS)
    for row in curve.rows:
        w.writerow([_fmt(row[c]) for c in CURVE_COLUMNS])
    return buf.getvalue()


def curve_from_csv(text, n=None) -> BiasCurve:
    rows = list(csv.DictReader(io.StringIO(text)))
    if not rows:
        raise IoError("curve CSV has no rows")
    parsed = []
    for row in rows:
        out = {"kind": row["kind"], "k": int(row["k"]), "n_ok": int(row["n_ok"])}
        for c in CURVE_COLUMNS[2:-1]:
            out[c] = float(row[c])
        parsed.append(out)
    kind = parsed[0]["kind"]
    if n is None:
        informative = [r for r in parsed if r["pct"] > 0]
        n = round(100.0 * informative[0]["k"] / informative[0]["pct"]) \
            if informative else 0
    return BiasCurve(kind, n, parsed)


def records_to_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    cols = ("kind", "k", "replicate", "seed", "bias_lse", "bias_l1", "bias_l1l2",
            "iters_l1l2", "error")
    w.writerow(cols)
    for r in records:
        d = asdict(r)
        w.writerow([_fmt(d[c]) for c in cols])
    return buf.getvalue()


def summarize(curves, out_dir, cfg: ExperimentConfig | None = None, svg=False):
    """Write ``curve_<kind>.csv``, a plot-ready ``bias_curves.dat`` and metadata.

    Returns the list of written paths.
    """
    if not curves:
        raise IoError("no bias curves to summarize")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for kind, curve in curves.items():
        path = out / f"curve_{kind}.csv"
        path.write_text(curve_to_csv(curve))
        written.append(path)

    lines = ["# kind\tk\tpct\tmean_lse\tmean_l1\tmean_l1l2"]
    for kind, curve in curves.items():
        for row in curve.rows:
            lines.append("\t".join(_fmt(row[c]) for c in
                                   ("kind", "k", "pct", "mean_lse", "mean_l1",
                                    "mean_l1l2")))
    dat = out / "bias_curves.dat"
    dat.write_text("\n".join(lines) + "\n")
    written.append(dat)

    if cfg is not None:
        meta = {"config": {**asdict(cfg), "kinds": list(cfg.kinds),
                           "k_grid": list(cfg.k_grid)},
                "rng": RNG_METADATA}
        mpath = out / "metadata.json"
        mpath.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
        written.append(mpath)
    if svg:
        written.append(plot_curves(curves, out / "bias_curves.svg"))
    return written


def plot_curves(curves, path):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(1, len(curves), figsize=(5 * len(curves), 4),
                             squeeze=False)
    styles = {"l1l2": ("tab:red", "-"), "l1": ("tab:green", "--"),
              "lse": ("tab:blue", "-.")}
    for ax, (kind, curve) in zip(axes[0], curves.items()):
        pct = [r["pct"] for r in curve.rows]
        for name, (color, ls) in styles.items():
            ax.plot(pct, [r[f"mean_{name}"] for r in curve.rows], color=color,
                    linestyle=ls, label=name)
        ax.set_title(kind)
        ax.set_xlabel("percentage of contamination")
        ax.set_ylim(bottom=0)
    axes[0][0].set_ylabel("mean relative error")
    axes[0][0].legend()
    fig.tight_layout()
    # fixed metadata keeps the SVG byte-stable between runs
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return Path(path)

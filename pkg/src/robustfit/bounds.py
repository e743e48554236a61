"""Numerical audits of the error bounds for the l1 and robust estimators.

Each check returns a :class:`BoundCheck` whose ``lhs`` must not exceed its
``rhs`` (up to a relative slack of 1e-8). All bounds are measured against
``f_n``, the least-squares fit on the outlier-free data ``y - e``.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .breakdown import BreakdownReport, breakdown_report
from .errors import DegenerateB, KExceedsM
from .linalg import DesignFactor, lse_solve, noise_decompose

SLACK_RTOL = 1e-8
DEGENERATE_TOL = 1e-6


@dataclass
class BoundCheck:
    name: str
    lhs: float
    rhs: float
    context: dict = field(default_factory=dict)

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    @property
    def satisfied(self) -> bool:
        return self.slack >= -SLACK_RTOL * (1.0 + abs(self.rhs))


def _report(D, report):
    return breakdown_report(D) if report is None else report


def _support(e, n):
    e = np.asarray(e, dtype=float)
    inside = e != 0
    return inside, int(inside.sum())


def _require_k(k, report: BreakdownReport):
    if k > report.m:
        raise KExceedsM(f"|supp(e)| = {k} exceeds m(X) = {report.m}")


def _restricted_terms(v):
    """``(||v||_1, ||v||_2^2, ||v||_inf)`` with the Hölder chain asserted."""
    a = np.abs(v)
    l1, l2sq, linf = float(a.sum()), float(a @ a), float(a.max(initial=0.0))
    if l2sq > l1 * linf * (1 + 1e-12) + 1e-300:
        raise AssertionError("Hölder inequality violated: numerical bug")
    return l1, l2sq, linf


def _noise_bound(d_rest, c_k, zero_tol):
    """``(||d||_1 + ||d||_2^2 / ||d||_inf) / (2 c_k - 1)`` on ``N \\ M``.

    Returns ``None`` in the degenerate case ``||d||_inf = 0``.
    """
    l1, l2sq, linf = _restricted_terms(d_rest)
    if linf <= zero_tol:
        return None, l1
    return (l1 + l2sq / linf) / (2 * c_k - 1), l1


def check_l1_bound(D: DesignFactor, f, z, e, fit_l1_result, report=None) -> BoundCheck:
    """l1 error relative to ``f_n`` versus the noise-only bound.

    ``lhs = ||X (f_1 - f_n)||_1``. When ``b_bar`` vanishes off the support
    of ``e`` the bound is exact recovery, checked as
    ``||f_1 - f_n||_2 <= 1e-6``.
    """
    report = _report(D, report)
    n = D.n
    inside, k = _support(e, n)
    _require_k(k, report)
    c_k = float(report.c[k])
    y = D.X @ np.asarray(f, dtype=float) + z + e
    f_n = lse_solve(D, y - e)
    _, b_bar = noise_decompose(D, z)
    f1 = fit_l1_result.g_hat
    zero_tol = 1e-12 * (1.0 + float(np.abs(b_bar).max()))
    rhs, l1_rest = _noise_bound(b_bar[~inside], c_k, zero_tol)
    ctx = {"k": k, "c_k": c_k, "b_bar_l1": float(np.abs(b_bar).sum())}
    if rhs is None:
        ctx["degenerate"] = True
        return BoundCheck("l1_bound", float(np.linalg.norm(f1 - f_n)),
                          DEGENERATE_TOL, ctx)
    ctx["relaxed_rhs"] = 2 * ctx["b_bar_l1"] / (2 * c_k - 1)
    ctx["relaxed_ok"] = rhs <= ctx["relaxed_rhs"] * (1 + 1e-12)
    lhs = float(np.abs(D.X @ (f1 - f_n)).sum())
    return BoundCheck("l1_bound", lhs, rhs, ctx)


def check_l1l2_bound(D: DesignFactor, f, z, e, sigma, fit_l1l2_result,
                     report=None) -> BoundCheck:
    """Robust-fit error relative to ``f_n`` with ``b_bar - b_hat`` as noise.

    The context also carries the coarser breakdown bound
    ``(n sigma + ||b_bar||_1) / (c_k - 1/2)`` and whether it holds.
    """
    report = _report(D, report)
    n = D.n
    inside, k = _support(e, n)
    _require_k(k, report)
    c_k = float(report.c[k])
    y = D.X @ np.asarray(f, dtype=float) + z + e
    f_n = lse_solve(D, y - e)
    _, b_bar = noise_decompose(D, z)
    g_hat, b_hat = fit_l1l2_result.g_hat, fit_l1l2_result.b_hat
    diff = b_bar - b_hat
    lhs = float(np.abs(D.X @ (g_hat - f_n)).sum())
    zero_tol = 1e-12 * (1.0 + float(np.abs(b_bar).max()))
    rhs, _ = _noise_bound(diff[~inside], c_k, zero_tol)
    rbp = (n * sigma + float(np.abs(b_bar).sum())) / (c_k - 0.5)
    ctx = {"k": k, "c_k": c_k, "sigma": sigma, "rbp_rhs": rbp,
           "rbp_ok": lhs <= rbp * (1 + SLACK_RTOL)}
    if rhs is None:
        ctx["degenerate"] = True
        return BoundCheck("l1l2_bound", lhs, DEGENERATE_TOL, ctx)
    return BoundCheck("l1l2_bound", lhs, rhs, ctx)


def check_fundamental_inequality(D: DesignFactor, y, b_star, g_star, g, M,
                                 report=None, b=None) -> BoundCheck:
    """Lower bound on the l1 objective increase when moving ``g*`` to ``g``.

    With ``|M| = k``:

        ||y - X g - b*||_1 - ||y - X g* - b*||_1
            >= (2 c_k - 1) ||X (g - g*)||_1 - 2 sum_{N \\ M} |y_i - x_i^T g* - b*_i|.

    If ``M`` is empty and ``b`` is given, the triangle-inequality variant
    with ``b`` in place of ``b*`` in the first term is checked instead.
    The returned check has the bound as ``lhs`` and the actual increase as
    ``rhs``.
    """
    X = D.X
    y = np.asarray(y, dtype=float)
    M = sorted(set(int(i) for i in M))
    k = len(M)
    rest = np.ones(D.n, dtype=bool)
    rest[M] = False
    base = y - X @ g_star - b_star
    if k == 0 and b is not None:
        increase = float(np.abs(y - X @ g - b).sum() - np.abs(base).sum())
        bound = float(np.abs(X @ (g - g_star) + b - b_star).sum()
                      - 2 * np.abs(base).sum())
        return BoundCheck("fundamental_ii", bound, increase, {"k": 0})
    report = _report(D, report)
    _require_k(k, report)
    c_k = float(report.c[k])
    increase = float(np.abs(y - X @ g - b_star).sum() - np.abs(base).sum())
    bound = float((2 * c_k - 1) * np.abs(X @ (g - g_star)).sum()
                  - 2 * np.abs(base[rest]).sum())
    return BoundCheck("fundamental_i", bound, increase, {"k": k, "c_k": c_k})


def sample_dual_feasible(D: DesignFactor, sigma, num, rng) -> np.ndarray:
    """``num`` points of ``sigma P*`` as rows: projected Gaussians shrunk into the box."""
    W = rng.standard_normal((num, D.n))
    P = W - (W @ D.Q) @ D.Q.T
    scale = np.maximum(1.0, np.abs(P).max(axis=1))
    return sigma * P / scale[:, None]


def tecnico_exact_max(D: DesignFactor, v, sigma) -> float:
    """``max {d^T v : X^T d = 0, ||d||_inf <= sigma}`` by linear programming."""
    res = linprog(-np.asarray(v, dtype=float), A_eq=D.X.T, b_eq=np.zeros(D.p),
                  bounds=[(-sigma, sigma)] * D.n, method="highs")
    if not res.success:
        raise RuntimeError(res.message)
    return float(-res.fun)


def check_tecnico(D: DesignFactor, b, e, sigma, num_samples, rng,
                  report=None) -> BoundCheck:
    """Sampled lower bound of ``max_{d in sigma P*} d^T (e + b)`` versus

        sigma ||e + b||_{1,M} + sigma ||b||_{2,N\\M}^2 / ||b||_{inf,N\\M}.

    Sampling under-estimates the maximum, so a pass is only a necessary
    condition; :func:`tecnico_exact_max` gives the true value.
    """
    b = np.asarray(b, dtype=float)
    e = np.asarray(e, dtype=float)
    inside, k = _support(e, D.n)
    report = _report(D, report)
    _require_k(k, report)
    b_rest = b[~inside]
    _, l2sq, linf = _restricted_terms(b_rest)
    if linf == 0:
        raise DegenerateB("b vanishes outside the support of e")
    v = e + b
    rhs = sigma * float(np.abs(v[inside]).sum()) + sigma * l2sq / linf
    d = sample_dual_feasible(D, sigma, num_samples, rng)
    lhs = max(0.0, float((d @ v).max(initial=0.0)))
    return BoundCheck("tecnico", lhs, rhs, {"k": k, "sigma": sigma,
                                            "samples": num_samples})


AUDIT_COLUMNS = ("check", "instance", "lhs", "rhs", "slack", "satisfied")


def _audit_design(rng):
    n = int(rng.integers(8, 13))
    p = int(rng.integers(1, 3))
    from .linalg import build_design

    return build_design(rng.standard_normal((n, p)))


def run_audit(seed=0, instances=200, tecnico_samples=500):
    """Run every bound check on ``instances`` random in-hypothesis instances.

    Designs are small Gaussian matrices (``n`` in 8..12, ``p`` in 1..2) so
    that ``c_k`` and ``m(X)`` are exact. Returns a list of
    ``(name, instance, BoundCheck)``.
    """
    from .estimators import fit_l1, fit_l1l2

    rng = np.random.default_rng(seed)
    out = []
    for i in range(instances):
        D = _audit_design(rng)
        rep = breakdown_report(D)
        n, p = D.n, D.p
        k = int(rng.integers(0, rep.m + 1))
        M = np.sort(rng.choice(n, size=k, replace=False))
        e = np.zeros(n)
        e[M] = rng.uniform(-20, 20, size=k)
        e[M] += np.where(e[M] >= 0, 1.0, -1.0)  # keep entries away from 0
        z = rng.standard_normal(n) * rng.uniform(0.05, 2.0)
        f = rng.standard_normal(p)
        y = D.X @ f + z + e
        sigma = float(rng.uniform(0.1, 3.0))

        out.append(("l1_bound", i, check_l1_bound(D, f, z, e, fit_l1(D, y), rep)))
        out.append(("l1l2_bound", i, check_l1l2_bound(
            D, f, z, e, sigma, fit_l1l2(D, y, sigma), rep)))
        g_star, g = rng.standard_normal(p), rng.standard_normal(p)
        b_star = rng.standard_normal(n)
        out.append(("fundamental", i, check_fundamental_inequality(
            D, y, b_star, g_star, g, M, rep)))
        b = rng.standard_normal(n)
        out.append(("tecnico", i, check_tecnico(D, b, e, sigma, tecnico_samples,
                                                rng, rep)))
    return out


def audit_to_rows(results):
    rows = []
    for name, inst, chk in results:
        rows.append((name, inst, f"{chk.lhs:.15g}", f"{chk.rhs:.15g}",
                     f"{chk.slack:.15g}", int(chk.satisfied)))
    return rows

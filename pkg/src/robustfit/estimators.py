"""Least squares, least absolute deviations and the l1-inf-convolution-l2 fit.

The robust estimator solves

    min_{g, b, s}  sigma ||s||_1 + ||b||_2^2 / 2   s.t.  y = X g + b + s,

which, after eliminating ``g`` and ``b``, is a problem in ``s`` alone:

    min_s  sigma ||s||_1 + ||(I - H)(y - s)||_2^2 / 2.

That reduced problem is solved with relaxed forward-backward splitting
(:func:`fb_step`), ``g`` is recovered by least squares on ``y - s`` and ``b``
by clipping the residuals to ``[-sigma, sigma]``. Minimizing over ``b`` in
closed form gives the Huber M-estimator with knee ``sigma``, which the tests
use as an independent oracle.
"""

import warnings
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from scipy import linalg as sla
from scipy.optimize import lsq_linear

from .errors import (
    Degenerate,
    DualInfeasible,
    NonPositiveSigma,
    NotConverged,
    ParameterError,
    TooLarge,
)
from .linalg import DesignFactor, lse_solve, residual_project
from .prox import clip_box, huber_penalty, soft_threshold

ORACLE_MAX_N = 14
_EMPTY = np.zeros(0)


@dataclass(frozen=True)
class SolverOptions:
    """Parameters of the forward-backward iteration and its stopping tests.

    ``gamma`` and ``lam`` are the (constant) step size and relaxation. Since
    ``I - H`` is an orthogonal projector with norm 1, any ``gamma`` in
    ``(0, 2)`` is admissible. ``polish_every`` controls how often the active
    set of the current iterate is used for an exact Newton solve of the
    piecewise quadratic problem (0 disables it).
    """

    gamma: float = 1.0
    lam: float = 1.0
    max_iters: int = 200_000
    fp_tol: float = 1e-10
    gap_tol: float = 1e-8
    cert_tol: float = 1e-6
    polish_every: int = 50
    gap_every: int = 10

    def __post_init__(self):
        if not 0 < self.gamma < 2:
            raise ParameterError(f"gamma must lie in (0, 2), got {self.gamma}")
        if not 0 < self.lam <= 1:
            raise ParameterError(f"lam must lie in (0, 1], got {self.lam}")
        if self.max_iters < 0:
            raise ParameterError("max_iters must be non-negative")
        for name in ("fp_tol", "gap_tol", "cert_tol"):
            if not getattr(self, name) > 0:
                raise ParameterError(f"{name} must be positive")
        if self.polish_every < 0 or self.gap_every < 1:
            raise ParameterError("polish_every >= 0 and gap_every >= 1 required")


@dataclass
class FitResult:
    method: str
    g_hat: np.ndarray
    residuals: np.ndarray
    objective: float
    b_hat: np.ndarray = field(default_factory=lambda: _EMPTY)
    s_hat: np.ndarray = field(default_factory=lambda: _EMPTY)
    iterations: int = 0
    converged: bool = True
    fixed_point_residual: float = 0.0
    sigma: float | None = None
    gap: float | None = None


def _check_sigma(sigma):
    if not sigma > 0:
        raise NonPositiveSigma(f"sigma must be positive, got {sigma}")


# ---------------------------------------------------------------------------
# least squares

def fit_lse(D: DesignFactor, y) -> FitResult:
    y = np.asarray(y, dtype=float)
    g = lse_solve(D, y)
    r = y - D.X @ g
    return FitResult("lse", g, r, 0.5 * float(r @ r))


# ---------------------------------------------------------------------------
# robust estimator

def fb_step(s, D: DesignFactor, y, sigma, gamma=1.0, lam=1.0) -> np.ndarray:
    """One relaxed forward-backward update of the reduced problem in ``s``."""
    _check_sigma(sigma)
    if not 0 < gamma < 2:
        raise ParameterError(f"gamma must lie in (0, 2), got {gamma}")
    if not 0 < lam <= 1:
        raise ParameterError(f"lam must lie in (0, 1], got {lam}")
    forward = s - gamma * residual_project(D, s - y)
    return s + lam * (soft_threshold(forward, sigma * gamma) - s)


def reduced_objective(D: DesignFactor, y, sigma, s) -> float:
    """``sigma ||s||_1 + ||(I - H)(y - s)||^2 / 2``."""
    v = residual_project(D, np.asarray(y) - s)
    return sigma * float(np.abs(s).sum()) + 0.5 * float(v @ v)


def primal_objective(D: DesignFactor, y, sigma, g, b) -> float:
    """``psi(g, b) = sigma ||y - X g - b||_1 + ||b||^2 / 2``."""
    y = np.asarray(y, dtype=float)
    b = np.asarray(b, dtype=float)
    return sigma * float(np.abs(y - D.X @ g - b).sum()) + 0.5 * float(b @ b)


def dual_value(D: DesignFactor, y, sigma, u, cert_tol=1e-6) -> float:
    """``u^T y - ||u||^2 / 2`` for ``u`` in ``sigma P*``.

    ``sigma P*`` is ``{u : X^T u = 0, ||u||_inf <= sigma}``; both constraints
    are checked to ``cert_tol``.
    """
    u = np.asarray(u, dtype=float)
    viol = float(np.abs(D.X.T @ u).max(initial=0.0))
    if viol > cert_tol:
        raise DualInfeasible(f"||X^T u||_inf = {viol:.3e} exceeds {cert_tol:.1e}")
    over = float(np.abs(u).max(initial=0.0)) - sigma
    if over > cert_tol:
        raise DualInfeasible(f"||u||_inf exceeds sigma by {over:.3e}")
    return float(u @ np.asarray(y, dtype=float)) - 0.5 * float(u @ u)


def dual_point(D: DesignFactor, b, sigma) -> np.ndarray:
    """Map ``b`` to a dual-feasible point: project onto ``ker(X^T)``, then
    shrink into the box. Leaves an optimal ``b_hat`` unchanged."""
    u = residual_project(D, b)
    top = float(np.abs(u).max(initial=0.0))
    if top > sigma:
        u *= sigma / top
    return u


def _gap(D, y, sigma, g, b):
    primal = primal_objective(D, y, sigma, g, b)
    u = dual_point(D, b, sigma)
    dual = float(u @ y) - 0.5 * float(u @ u)
    return primal - dual, primal


def duality_gap(D: DesignFactor, y, sigma, fit: FitResult) -> float:
    """Primal minus dual value at the fitted ``(g_hat, b_hat)``."""
    y = np.asarray(y, dtype=float)
    u = dual_point(D, fit.b_hat, sigma)
    primal = primal_objective(D, y, sigma, fit.g_hat, fit.b_hat)
    return primal - dual_value(D, y, sigma, u)


def _huber_slope(r, a, sigma, t):
    """Derivative of ``t -> sum huber(r - t a)``."""
    return -float(a @ clip_box(r - t * a, sigma))


def _exact_line_search(r, a, sigma, slope0):
    """Minimize the convex piecewise quadratic ``t -> sum huber(r - t a)``.

    Works on the derivative, which is piecewise linear and nondecreasing in
    ``t``; the breakpoints are where some ``r_i - t a_i`` crosses ``+-sigma``.
    """
    nz = a != 0
    bp = np.concatenate([(r[nz] - sigma) / a[nz], (r[nz] + sigma) / a[nz]])
    bp = np.unique(bp[bp > 0])
    lo, dlo = 0.0, slope0
    # binary search for the first breakpoint with a nonnegative derivative
    i, j = 0, len(bp)
    while i < j:
        mid = (i + j) // 2
        if _huber_slope(r, a, sigma, bp[mid]) < 0:
            i = mid + 1
        else:
            j = mid
    if i > 0:
        lo = bp[i - 1]
        dlo = _huber_slope(r, a, sigma, lo)
    hi = bp[i] if i < len(bp) else lo + 1.0
    dhi = _huber_slope(r, a, sigma, hi)
    if i == len(bp):
        # beyond the last breakpoint the derivative is linear in t
        while dhi < 0:
            hi = lo + 2.0 * (hi - lo)
            dhi = _huber_slope(r, a, sigma, hi)
    if dhi == dlo:
        return hi
    return lo + (hi - lo) * (-dlo) / (dhi - dlo)


def _huber_newton(D, y, sigma, g, max_steps=200):
    """Semismooth Newton with exact line search on ``g -> sum huber(y - X g)``.

    The objective is convex and piecewise quadratic; once the inlier set
    ``{|r_i| <= sigma}`` stops changing, a unit step lands on the exact
    minimizer of that piece.
    """
    X = D.X
    gram = X.T @ X
    ridge = 1e-10 * float(np.trace(gram)) / D.p
    for _ in range(max_steps):
        r = y - X @ g
        inl = np.abs(r) <= sigma
        grad = -(X.T @ clip_box(r, sigma))
        XI = X[inl]
        hess = XI.T @ XI
        try:
            if inl.sum() < D.p:
                raise sla.LinAlgError("fewer inliers than coefficients")
            with warnings.catch_warnings():
                warnings.simplefilter("error", sla.LinAlgWarning)
                step = sla.solve(hess, -grad, assume_a="pos")
        except (sla.LinAlgError, sla.LinAlgWarning, ValueError):
            step = sla.solve(hess + ridge * np.eye(D.p) + 1e-8 * gram, -grad,
                             assume_a="pos")
        slope = float(grad @ step)
        if not np.isfinite(slope) or slope >= 0:
            break
        a = X @ step
        t = _exact_line_search(r, a, sigma, slope)
        g = g + t * step
        if np.array_equal(np.abs(y - X @ g) <= sigma, inl) and abs(t - 1.0) < 1e-12:
            break
        if np.max(np.abs(t * step)) <= 1e-15 * (1.0 + np.max(np.abs(g))):
            break
    return g


def _l1l2_result(D, y, sigma, s, iterations, converged, fp):
    g = lse_solve(D, y - s)
    r = y - D.X @ g
    b = clip_box(r, sigma)
    s_hat = r - b
    obj = sigma * float(np.abs(s_hat).sum()) + 0.5 * float(b @ b)
    gap, primal = _gap(D, y, sigma, g, b)
    return FitResult(
        "l1l2", g, r, obj, b_hat=b, s_hat=s_hat, iterations=iterations,
        converged=converged, fixed_point_residual=fp, sigma=sigma,
        gap=gap / (1.0 + abs(primal)),
    )


def fit_l1l2(D: DesignFactor, y, sigma, opts: SolverOptions | None = None,
             s0=None) -> FitResult:
    """Robust fit by forward-backward splitting on the reduced problem.

    Iterates :func:`fb_step` from ``s0`` (zero by default) until the
    fixed-point residual ``||s_{k+1} - s_k||_inf`` drops to ``fp_tol`` or the
    relative duality gap drops to ``gap_tol`` with ``||X^T b||_inf`` at most
    ``cert_tol``. Every ``polish_every``
    iterations the current active set seeds an exact Newton solve; its
    output is accepted only if it passes the duality-gap test, and otherwise
    replaces the iterate when it has lower objective.

    Raises
    ------
    NotConverged
        If ``max_iters`` is exhausted; the last iterate is on ``exc.fit``.
    """
    _check_sigma(sigma)
    opts = opts or SolverOptions()
    y = np.asarray(y, dtype=float)
    s = np.zeros(D.n) if s0 is None else np.array(s0, dtype=float)
    gamma, lam = opts.gamma, opts.lam
    fp = np.inf

    def optimal(fit):
        # the gap is quadratic in the stationarity error, so check both
        return (fit.gap <= opts.gap_tol
                and float(np.abs(D.X.T @ fit.b_hat).max()) <= opts.cert_tol)

    for it in range(opts.max_iters):
        s_new = fb_step(s, D, y, sigma, gamma, lam)
        fp = float(np.abs(s_new - s).max())
        s = s_new
        k = it + 1
        if fp <= opts.fp_tol:
            return _l1l2_result(D, y, sigma, s, k, True, fp)
        if k % opts.gap_every == 0:
            fit = _l1l2_result(D, y, sigma, s, k, True, fp)
            if optimal(fit):
                return fit
        if opts.polish_every and k % opts.polish_every == 0:
            g = _huber_newton(D, y, sigma, lse_solve(D, y - s))
            r = y - D.X @ g
            s_pol = r - clip_box(r, sigma)
            fit = _l1l2_result(D, y, sigma, s_pol, k, True, fp)
            if optimal(fit):
                fit.fixed_point_residual = float(
                    np.abs(fb_step(s_pol, D, y, sigma, gamma, lam) - s_pol).max())
                return fit
            if reduced_objective(D, y, sigma, s_pol) < reduced_objective(D, y, sigma, s):
                s = s_pol

    fit = _l1l2_result(D, y, sigma, s, opts.max_iters, False, fp)
    raise NotConverged(
        f"forward-backward did not converge in {opts.max_iters} iterations "
        f"(fp residual {fp:.3e}, relative gap {fit.gap:.3e})", fit=fit)


# ---------------------------------------------------------------------------
# least absolute deviations

def l1_certificate(D: DesignFactor, y, g, zero_tol, cert_tol=1e-6):
    """Subgradient certificate for ``g`` minimizing ``||y - X g||_1``.

    Looks for ``w`` with ``|w| <= 1``, ``w_i = sign(r_i)`` where
    ``|r_i| > zero_tol`` and ``X^T w = 0``. The free entries (zero residuals)
    are found by a box-constrained least-squares solve. Returns
    ``(ok, w, ||X^T w||_inf)``.
    """
    X = D.X
    r = np.asarray(y, dtype=float) - X @ g
    zero = np.abs(r) <= zero_tol
    w = np.sign(r)
    w[zero] = 0.0
    target = -(X[~zero].T @ w[~zero])
    if zero.any():
        sol = lsq_linear(X[zero].T, target, bounds=(-1.0, 1.0), method="bvls",
                         tol=1e-14)
        w[zero] = np.clip(sol.x, -1.0, 1.0)
    viol = float(np.abs(X.T @ w).max())
    return viol <= cert_tol, w, viol


def _basic_solution(D, y, r):
    """Interpolate exactly on the ``p`` rows with smallest ``|r_i|``."""
    idx = np.sort(np.argsort(np.abs(r), kind="stable")[: D.p])
    XB = D.X[idx]
    if np.linalg.cond(XB) > 1e12:
        return None
    return np.linalg.solve(XB, y[idx])


def fit_l1(D: DesignFactor, y, opts: SolverOptions | None = None,
           sigma0=None, max_stages=20) -> FitResult:
    """Least absolute deviations by continuation of the robust fit.

    Solves the robust problem for ``sigma_j = sigma0 * 10**-j`` with warm
    starts. After each stage the ``p`` smallest residuals define a basic
    solution, which is kept if it does not increase the l1 objective. The
    fit returns as soon as :func:`l1_certificate` holds.
    """
    opts = opts or SolverOptions()
    y = np.asarray(y, dtype=float)
    zero_tol = 1e-7 * (1.0 + float(np.abs(y).max(initial=0.0)))
    cert_tol = opts.cert_tol * max(1.0, float(np.abs(D.X).max()))

    def l1obj(g):
        return float(np.abs(y - D.X @ g).sum())

    def certified(g, iters, sigma):
        ok, _, viol = l1_certificate(D, y, g, zero_tol, cert_tol)
        if not ok:
            return None
        r = y - D.X @ g
        return FitResult("l1", g, r, float(np.abs(r).sum()), iterations=iters,
                         converged=True, fixed_point_residual=viol, sigma=sigma)

    g = lse_solve(D, y)
    r = y - D.X @ g
    done = certified(g, 0, None)
    if done is not None:
        return done
    if sigma0 is None:
        sigma0 = max(float(np.median(np.abs(r))), zero_tol)
    _check_sigma(sigma0)

    sigma, s, total = sigma0, None, 0
    best = g
    for _ in range(max_stages):
        try:
            fit = fit_l1l2(D, y, sigma, opts, s0=s)
        except NotConverged as exc:
            fit = exc.fit
        total += fit.iterations
        s = fit.s_hat
        cands = [fit.g_hat]
        basic = _basic_solution(D, y, fit.residuals)
        if basic is not None and l1obj(basic) <= l1obj(fit.g_hat):
            cands.insert(0, basic)
        for cand in cands:
            if l1obj(cand) < l1obj(best):
                best = cand
            done = certified(cand, total, sigma)
            if done is not None:
                return done
        sigma *= 0.1

    r = y - D.X @ best
    partial = FitResult("l1", best, r, float(np.abs(r).sum()), iterations=total,
                        converged=False, sigma=sigma)
    raise NotConverged(f"l1 certificate not reached after {max_stages} stages",
                       fit=partial)


def l1_oracle_small(D: DesignFactor, y) -> FitResult:
    """Exhaustive l1 fit over all basic solutions (``n <= 14``).

    Every ``p``-row subset with an invertible submatrix yields an exact
    interpolant; for full-rank designs an l1 minimizer is among them.
    """
    n, p = D.n, D.p
    if n > ORACLE_MAX_N:
        raise TooLarge(f"n = {n} exceeds the oracle limit {ORACLE_MAX_N}")
    y = np.asarray(y, dtype=float)
    X = D.X
    scale = float(np.abs(X).max())
    best_g, best_obj, count = None, np.inf, 0
    for rows in combinations(range(n), p):
        XB = X[list(rows)]
        # reject singular subsets relative to the design's own scale
        sv = np.linalg.svd(XB, compute_uv=False)
        if sv[-1] <= 1e-12 * max(scale, sv[0]):
            continue
        count += 1
        g = np.linalg.solve(XB, y[list(rows)])
        obj = float(np.abs(y - X @ g).sum())
        if obj < best_obj:
            best_g, best_obj = g, obj
    if best_g is None:
        raise Degenerate("no invertible p-row submatrix")
    r = y - X @ best_g
    return FitResult("l1-oracle", best_g, r, best_obj, iterations=count)

"""Leverage constants, breakdown point and identifiability of a design.

For a fixed direction ``g`` the worst subset ``M`` of size ``k`` simply
removes the ``k`` largest ``|x_i^T g|``. Over directions, the ratio

    sum_{i not in M} |x_i^T g| / sum_i |x_i^T g|

is linear-fractional on every cell of the arrangement ``{x_i^T g = 0}``,
so its minimum sits on an extreme ray of some cell, i.e. on a direction
orthogonal to ``p - 1`` linearly independent rows. Enumerating those rays is
exact but only feasible for small designs; for ``p >= 3`` the tests also
sandwich the result by random direction sampling.

``c_k(X) = 1 - gamma_k(F)`` for any ``F`` with ``ker F = ran X``, where
``gamma_k`` is the classical sparse-recovery (nullspace) constant; that
quantity is not computed here.
"""

from dataclasses import dataclass, field
from itertools import combinations
from math import comb

import numpy as np

from .errors import InvalidK, TooLarge
from .linalg import DesignFactor

MAX_CANDIDATE_SUBSETS = 200_000
MAX_WORK = 10_000_000
TIE_TOL = 1e-12
ZERO_RTOL = 1e-9


@dataclass
class BreakdownReport:
    """``c[k]`` for ``k = 0..k_max``, ``m(X)``, ``kappa(X)`` and witnesses.

    ``witnesses[k]`` is ``(M, g)``; ``boundary`` lists the ``k`` whose
    ``c_k`` equals 1/2 to within 1e-12 (these do not count toward ``m``).
    """

    n: int
    c: np.ndarray
    m: int
    kappa: int
    witnesses: list = field(default_factory=list)
    boundary: list = field(default_factory=list)

    @property
    def uniqueness_threshold(self) -> float:
        return uniqueness_threshold(self.n, self.kappa)


def candidate_directions(D: DesignFactor) -> np.ndarray:
    """Unit directions orthogonal to every rank-``(p-1)`` set of ``p-1`` rows.

    Returned as the rows of an array of shape ``(m, p)``, each with its first
    nonzero entry positive and duplicates (to ~1e-9) removed.
    """
    n, p = D.n, D.p
    if p == 1:
        return np.ones((1, 1))
    count = comb(n, p - 1)
    if count > MAX_CANDIDATE_SUBSETS:
        raise TooLarge(f"C({n}, {p - 1}) = {count} row subsets exceeds "
                       f"{MAX_CANDIDATE_SUBSETS}")
    subsets = np.array(list(combinations(range(n), p - 1)))
    blocks = D.X[subsets]  # (count, p-1, p)
    _, sv, vt = np.linalg.svd(blocks, full_matrices=True)
    keep = sv[:, -1] > 1e-10 * sv[:, 0]
    dirs = vt[keep, -1, :]
    # canonical sign: first entry with non-negligible magnitude is positive
    lead = np.argmax(np.abs(dirs) > 1e-12, axis=1)
    sgn = np.sign(dirs[np.arange(len(dirs)), lead])
    dirs = dirs * sgn[:, None]
    _, first = np.unique(np.round(dirs, 9), axis=0, return_index=True)
    return dirs[np.sort(first)]


def _ratio_table(D, dirs):
    """Per direction: descending |x_i^T g|, the row order, and c_k for all k."""
    V = np.abs(D.X @ dirs.T)  # (n, m)
    total = V.sum(axis=0)
    ok = total > 0
    V, dirs = V[:, ok], dirs[ok]
    idx = np.arange(D.n)
    # ties broken by smallest row index so witnesses are deterministic
    order = np.stack([np.lexsort((idx, -V[:, j])) for j in range(V.shape[1])],
                     axis=1)
    Vs = np.take_along_axis(V, order, axis=0)
    # kept mass summed from the smallest entries up: no cancellation, and
    # exactly 0 once every nonzero entry has been removed
    kept = np.cumsum(Vs[::-1], axis=0)[::-1]
    kept = np.vstack([kept, np.zeros((1, V.shape[1]))])
    ratios = kept / kept[0]  # (n+1, m)
    return ratios, order, dirs


def _check_work(D, dirs):
    work = len(dirs) * D.n
    if work > MAX_WORK:
        raise TooLarge(f"{len(dirs)} candidate directions x n={D.n} exceeds "
                       f"{MAX_WORK}")


def _witness(ratios, order, dirs, k):
    row = ratios[k]
    best = row.min()
    tied = np.flatnonzero(row <= best + TIE_TOL)
    Ms = [tuple(sorted(order[:k, j].tolist())) for j in tied]
    pick = min(range(len(tied)), key=lambda i: Ms[i])
    return float(best), Ms[pick], dirs[tied[pick]]


def leverage_constant(D: DesignFactor, k: int, dirs=None):
    """Exact ``c_k(X)`` with a witness ``(M, g)`` attaining it.

    Among tied minimizers the lexicographically smallest ``M`` is returned.
    """
    if not 0 <= k <= D.n:
        raise InvalidK(f"k must lie in [0, {D.n}], got {k}")
    if dirs is None:
        dirs = candidate_directions(D)
    _check_work(D, dirs)
    ratios, order, dirs = _ratio_table(D, dirs)
    c, M, g = _witness(ratios, order, dirs, k)
    return c, (M, g)


def leverage_table(D: DesignFactor, k_max=None):
    """``c_k`` for ``k = 0..k_max`` plus witnesses, from one candidate sweep."""
    k_max = D.n if k_max is None else min(int(k_max), D.n)
    dirs = candidate_directions(D)
    _check_work(D, dirs)
    ratios, order, dirs = _ratio_table(D, dirs)
    c = np.empty(k_max + 1)
    witnesses = []
    for k in range(k_max + 1):
        c[k], M, g = _witness(ratios, order, dirs, k)
        witnesses.append((M, g))
    c[0] = 1.0
    return c, witnesses


def leverage_sampled(D: DesignFactor, k: int, num: int, rng) -> float:
    """Upper bound on ``c_k`` from ``num`` random unit directions."""
    dirs = rng.standard_normal((num, D.p))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    ratios, _, _ = _ratio_table(D, dirs)
    return float(ratios[k].min())


def _m_from_table(c):
    m = 0
    for k in range(1, len(c)):
        if c[k] > 0.5 + TIE_TOL:
            m = k
        else:
            break
    return m


def breakdown_m(D: DesignFactor) -> int:
    """``m(X) = max{k >= 1 : c_k > 1/2}`` (0 if ``c_1 <= 1/2``).

    Values within 1e-12 of 1/2 do not count. Stops at the first failure,
    which is final because ``c_k`` is nonincreasing in ``k``.
    """
    dirs = candidate_directions(D)
    _check_work(D, dirs)
    ratios, _, _ = _ratio_table(D, dirs)
    c = ratios.min(axis=1)
    c[0] = 1.0
    return _m_from_table(c)


def kappa(D: DesignFactor) -> int:
    """Largest number of rows annihilated by a direction ``theta`` with ``X theta != 0``."""
    X = D.X
    tol = ZERO_RTOL * float(np.abs(X).max())
    if D.p == 1:
        return int(np.sum(np.abs(X[:, 0]) <= tol))
    dirs = candidate_directions(D)
    zeros = np.abs(X @ dirs.T) <= tol  # unit theta, so no extra norm factor
    return int(zeros.sum(axis=0).max())


def uniqueness_threshold(n: int, kap: int) -> float:
    """Sparsity ``(n - kappa - 1) / 2`` below which the sparse error is identifiable."""
    return (n - kap - 1) / 2


def breakdown_report(D: DesignFactor, k_max=None) -> BreakdownReport:
    c, witnesses = leverage_table(D, k_max)
    boundary = [k for k in range(len(c)) if abs(c[k] - 0.5) <= TIE_TOL]
    return BreakdownReport(n=D.n, c=c, m=_m_from_table(c), kappa=kappa(D),
                           witnesses=witnesses, boundary=boundary)


def adversarial_instance(D: DesignFactor, f, k: int, alpha: float, dirs=None):
    """Outliers aligned with the worst direction for ``k`` corrupted rows.

    With ``(M, g_k)`` the witness of ``c_k``, sets ``e_i = alpha x_i^T g_k``
    on ``M``. When ``c_k <= 1/2`` the shifted coefficients ``f + alpha g_k``
    fit ``y = X f + e`` at least as well in l1 as ``f`` itself.

    Returns ``(y, e, g_k)``.
    """
    if not 0 <= k <= D.n:
        raise InvalidK(f"k must lie in [0, {D.n}], got {k}")
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    f = np.asarray(f, dtype=float)
    _, (M, g) = leverage_constant(D, k, dirs)
    e = np.zeros(D.n)
    idx = list(M)
    e[idx] = alpha * (D.X[idx] @ g)
    return D.X @ f + e, e, g

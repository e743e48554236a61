"""Dense kernels built on a thin QR factorization of the design matrix.

The hat matrix ``H = X (X^T X)^{-1} X^T`` is never formed: ``H v`` is
computed as ``Q (Q^T v)``, so every projector application costs O(np).
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .errors import RankDeficient, ShapeError

RANK_RTOL = 1e-10


@dataclass(frozen=True)
class DesignFactor:
    """Full-rank ``n x p`` design together with ``X = Q R``.

    ``Q`` has orthonormal columns spanning ``ran(X)``; ``R`` is upper
    triangular with a positive diagonal.
    """

    X: np.ndarray
    Q: np.ndarray
    R: np.ndarray

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]


def build_design(X) -> DesignFactor:
    """Factor ``X`` (Householder thin QR) after validating shape and rank."""
    X = np.array(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise ShapeError(f"design must be 2-D, got shape {X.shape}")
    n, p = X.shape
    if p < 1 or p >= n:
        raise ShapeError(f"need 1 <= p < n, got n={n}, p={p}")
    if not np.all(np.isfinite(X)):
        raise ValueError("design contains non-finite entries")

    Q, R = np.linalg.qr(X, mode="reduced")
    # sign-normalize so that diag(R) > 0 (the factorization is then unique)
    signs = np.where(np.diag(R) < 0, -1.0, 1.0)
    Q = Q * signs
    R = R * signs[:, None]

    diag = np.abs(np.diag(R))
    if diag.max() == 0 or diag.min() <= RANK_RTOL * diag.max():
        raise RankDeficient(
            f"numerical rank < {p}: min |R_ii| = {diag.min():.3e}, "
            f"max |R_ii| = {diag.max():.3e}"
        )
    X.setflags(write=False)
    Q.setflags(write=False)
    R.setflags(write=False)
    return DesignFactor(X=X, Q=Q, R=R)


def lse_solve(D: DesignFactor, v) -> np.ndarray:
    """Return ``argmin_g ||v - X g||_2`` as ``R^{-1} Q^T v``."""
    v = np.asarray(v, dtype=float)
    return solve_triangular(D.R, D.Q.T @ v, lower=False)


def residual_project(D: DesignFactor, v) -> np.ndarray:
    """Apply ``I - H``: ``v - Q Q^T v``, the projection onto ``ker(X^T)``."""
    v = np.asarray(v, dtype=float)
    return v - D.Q @ (D.Q.T @ v)


def noise_decompose(D: DesignFactor, z):
    """Split ``z = X g_bar + b_bar`` with ``X^T b_bar = 0``."""
    z = np.asarray(z, dtype=float)
    return lse_solve(D, z), residual_project(D, z)

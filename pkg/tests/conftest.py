import numpy as np
import pytest
from scipy.optimize import linprog

from robustfit.linalg import build_design


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def random_design(rng, n, p):
    return build_design(rng.standard_normal((n, p)))


def lad_by_lp(X, y):
    """Independent LAD oracle: min 1^T(u+v) s.t. Xg + u - v = y, u, v >= 0."""
    n, p = X.shape
    c = np.concatenate([np.zeros(p), np.ones(2 * n)])
    A = np.hstack([X, np.eye(n), -np.eye(n)])
    bounds = [(None, None)] * p + [(0, None)] * (2 * n)
    res = linprog(c, A_eq=A, b_eq=y, bounds=bounds, method="highs")
    assert res.success
    return res.x[:p], float(res.fun)

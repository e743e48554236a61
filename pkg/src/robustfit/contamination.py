"""Seeded generation of designs, noise and sparse outliers.

Every draw comes from a Philox4x64-10 counter-based generator keyed by a
``numpy.random.SeedSequence``; sub-seeds are derived by hashing integer keys,
so a replicate can be regenerated in isolation and in any order. Normals use
numpy's ziggurat sampler; uniforms are 53-bit doubles mapped to the open
interval ``(0, 1)``; Laplace draws use the inverse CDF.
"""

import csv
from dataclasses import dataclass

import numpy as np

from .errors import KTooLarge, ShapeError

KINDS = ("normal5", "laplace5", "adversarial50")
OUTLIER_SD = 5.0
ADVERSARIAL_SCALE = 50.0

RNG_METADATA = {
    "bit_generator": "Philox4x64-10",
    "seeding": "numpy.random.SeedSequence(key)",
    "normal": "numpy ziggurat (Generator.standard_normal)",
    "uniform": "(integers(0, 2**53) + 0.5) / 2**53",
    "laplace": "inverse CDF, scale = sd / sqrt(2)",
    "numpy_version": np.__version__,
}


def derive_seed(*key) -> int:
    """Hash non-negative integers into a 64-bit seed."""
    ss = np.random.SeedSequence([int(k) for k in key])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def make_rng(seed) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))


def _open_uniform(rng, size):
    return (rng.integers(0, 2**53, size=size, dtype=np.int64) + 0.5) / 2.0**53


@dataclass(frozen=True)
class ContaminationSpec:
    kind: str
    k: int
    seed: int

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown contamination kind {self.kind!r}; "
                             f"expected one of {KINDS}")
        if self.k < 0:
            raise KTooLarge(f"k must be non-negative, got {self.k}")


@dataclass
class RegressionData:
    """``y = X f + z + e`` with the support ``M`` of ``e``."""

    y: np.ndarray
    f: np.ndarray
    z: np.ndarray
    e: np.ndarray
    M: np.ndarray


def gen_design(n, p, seed) -> np.ndarray:
    """``n x p`` matrix of i.i.d. standard normals."""
    if not 1 <= p < n:
        raise ShapeError(f"need 1 <= p < n, got n={n}, p={p}")
    return make_rng(seed).standard_normal((n, p))


def gen_noise(n, seed) -> np.ndarray:
    return make_rng(seed).standard_normal(n)


def laplace_from_uniform(u, sd=OUTLIER_SD):
    """Inverse-CDF Laplace(0, sd / sqrt 2) transform of uniforms in (0, 1)."""
    scale = sd / np.sqrt(2.0)
    c = u - 0.5
    return -scale * np.sign(c) * np.log1p(-2.0 * np.abs(c))


def gen_outliers(spec: ContaminationSpec, X, seed=None):
    """Sparse outlier vector ``e`` and its support ``M`` (sorted indices).

    ``M`` is a uniformly random ``k``-subset. On ``M``: ``normal5`` draws
    N(0, 5^2), ``laplace5`` draws Laplace with standard deviation 5, and
    ``adversarial50`` copies ``50 * (X 1_p)_i``.
    """
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    if spec.k > n:
        raise KTooLarge(f"k = {spec.k} exceeds n = {n}")
    rng = make_rng(spec.seed if seed is None else seed)
    M = np.sort(rng.choice(n, size=spec.k, replace=False)) if spec.k else \
        np.zeros(0, dtype=int)
    e = np.zeros(n)
    if spec.kind == "normal5":
        e[M] = OUTLIER_SD * rng.standard_normal(spec.k)
    elif spec.kind == "laplace5":
        e[M] = laplace_from_uniform(_open_uniform(rng, spec.k))
    else:
        e[M] = ADVERSARIAL_SCALE * (X @ np.ones(X.shape[1]))[M]
    return e, M


def assemble(X, f, z, e) -> RegressionData:
    X = np.asarray(X, dtype=float)
    f, z, e = (np.asarray(a, dtype=float) for a in (f, z, e))
    n, p = X.shape
    if f.shape != (p,) or z.shape != (n,) or e.shape != (n,):
        raise ShapeError(f"shapes X{X.shape}, f{f.shape}, z{z.shape}, e{e.shape} "
                         "do not conform")
    return RegressionData(y=X @ f + z + e, f=f, z=z, e=e, M=np.flatnonzero(e))


def dump_instance_csv(path, data: RegressionData):
    inM = np.zeros(len(data.y), dtype=bool)
    inM[data.M] = True
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["i", "y_i", "z_i", "e_i", "in_M"])
        for i in range(len(data.y)):
            w.writerow([i, f"{data.y[i]:.15g}", f"{data.z[i]:.15g}",
                        f"{data.e[i]:.15g}", int(inM[i])])

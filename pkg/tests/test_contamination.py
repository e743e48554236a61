import numpy as np
import pytest
from scipy import stats

from robustfit.contamination import (
    ContaminationSpec,
    assemble,
    derive_seed,
    dump_instance_csv,
    gen_design,
    gen_noise,
    gen_outliers,
    laplace_from_uniform,
)
from robustfit.errors import KTooLarge, ShapeError


def test_design_deterministic_and_centered():
    a = gen_design(512, 128, 7)
    assert np.array_equal(a, gen_design(512, 128, 7))
    assert not np.array_equal(a, gen_design(512, 128, 8))
    assert abs(a.mean()) <= 4 / np.sqrt(a.size)


def test_design_shape_error():
    with pytest.raises(ShapeError):
        gen_design(4, 4, 0)


def test_noise_moments_and_independence():
    z = gen_noise(512, 1)
    assert 0.8 <= z.var() <= 1.2
    assert np.array_equal(z, gen_noise(512, 1))
    w = gen_noise(512, 2)
    assert abs(np.corrcoef(z, w)[0, 1]) <= 0.2


def test_derive_seed_is_stable_and_distinct():
    assert derive_seed(0, 1, 2) == derive_seed(0, 1, 2)
    seeds = {derive_seed(0, 1, k, r) for k in range(20) for r in range(20)}
    assert len(seeds) == 400


def test_zero_outliers():
    e, M = gen_outliers(ContaminationSpec("normal5", 0, 3), np.ones((5, 1)))
    assert not e.any() and len(M) == 0


def test_adversarial_entries():
    X = np.ones((3, 1))
    for seed in range(20):
        e, M = gen_outliers(ContaminationSpec("adversarial50", 1, seed), X)
        assert np.count_nonzero(e) == 1 and e[M[0]] == 50.0
    X = np.array([[1.0, 2.0], [0.5, -3.0], [2.0, 2.0]])
    e, M = gen_outliers(ContaminationSpec("adversarial50", 3, 0), X)
    assert np.array_equal(e, [150.0, -125.0, 200.0])


def test_support_is_uniform():
    counts = np.zeros(6)
    for seed in range(3000):
        _, M = gen_outliers(ContaminationSpec("normal5", 2, seed), np.ones((6, 1)))
        counts[M] += 1
    # each index appears with probability 1/3
    assert stats.chisquare(counts).pvalue > 1e-3


def test_normal5_sd():
    e, _ = gen_outliers(ContaminationSpec("normal5", 10_000, 11), np.ones((10_000, 1)))
    assert 4.8 <= e.std() <= 5.2


def test_laplace5_moments():
    n = 100_000
    e, _ = gen_outliers(ContaminationSpec("laplace5", n, 12), np.ones((n, 1)))
    assert 4.8 <= e.std() <= 5.2
    assert 2.5 <= stats.kurtosis(e) <= 3.5
    e_norm, _ = gen_outliers(ContaminationSpec("normal5", n, 12), np.ones((n, 1)))
    assert abs(stats.kurtosis(e_norm)) < 0.2


def test_laplace_inverse_cdf_matches_scipy():
    u = np.array([1e-9, 0.1, 0.5, 0.8, 1 - 1e-9])
    ref = stats.laplace(scale=5 / np.sqrt(2)).ppf(u)
    assert np.allclose(laplace_from_uniform(u), ref, rtol=1e-7, atol=1e-12)


def test_spec_validation():
    with pytest.raises(ValueError):
        ContaminationSpec("cauchy", 1, 0)
    with pytest.raises(KTooLarge):
        gen_outliers(ContaminationSpec("normal5", 4, 0), np.ones((3, 1)))


def test_assemble(tmp_path):
    X = gen_design(10, 3, 0)
    z = gen_noise(10, 1)
    e, M = gen_outliers(ContaminationSpec("laplace5", 3, 2), X)
    data = assemble(X, np.zeros(3), z, e)
    assert np.array_equal(data.y, z + e)
    assert np.array_equal(data.M, M)
    f = np.arange(3.0)
    assert np.array_equal(assemble(X, f, np.zeros(10), np.zeros(10)).y, X @ f)
    with pytest.raises(ShapeError):
        assemble(X, np.zeros(2), z, e)
    path = tmp_path / "inst.csv"
    dump_instance_csv(path, data)
    lines = path.read_text().splitlines()
    assert lines[0] == "i,y_i,z_i,e_i,in_M" and len(lines) == 11
    assert sum(int(l.split(",")[-1]) for l in lines[1:]) == 3

import numpy as np
import pytest
from scipy.optimize import minimize

from robustfit.errors import (
    DualInfeasible,
    NonPositiveSigma,
    NotConverged,
    ParameterError,
    TooLarge,
)
from robustfit.estimators import (
    SolverOptions,
    dual_value,
    duality_gap,
    fb_step,
    fit_l1,
    fit_l1l2,
    fit_lse,
    l1_certificate,
    l1_oracle_small,
    primal_objective,
    reduced_objective,
)
from robustfit.linalg import build_design, noise_decompose, residual_project
from robustfit.prox import huber_penalty

from conftest import lad_by_lp, random_design


def contaminated(rng, n, p, k, scale=20.0):
    D = random_design(rng, n, p)
    y = D.X @ rng.standard_normal(p) + rng.standard_normal(n)
    idx = rng.choice(n, k, replace=False)
    y[idx] += scale * rng.standard_normal(k)
    return D, y


def huber_oracle(D, y, sigma):
    """Minimize the Huber objective with a generic quasi-Newton method."""
    def f(g):
        r = y - D.X @ g
        return huber_penalty(r, sigma).sum()

    def grad(g):
        r = y - D.X @ g
        return -D.X.T @ np.clip(r, -sigma, sigma)

    g0 = np.linalg.lstsq(D.X, y, rcond=None)[0]
    res = minimize(f, g0, jac=grad, method="L-BFGS-B",
                   options={"ftol": 1e-15, "gtol": 1e-12, "maxiter": 10000})
    return res.x, float(res.fun)


# ---------------------------------------------------------------- options

def test_solver_options_validation():
    with pytest.raises(ParameterError):
        SolverOptions(gamma=2.0)
    with pytest.raises(ParameterError):
        SolverOptions(lam=0.0)
    with pytest.raises(ParameterError):
        SolverOptions(gap_tol=0.0)
    with pytest.raises(NonPositiveSigma):
        fit_l1l2(build_design([[1.0], [1.0]]), [1.0, 2.0], 0.0)


# ---------------------------------------------------------------- LSE

def test_lse_gradient_vanishes(rng):
    D = random_design(rng, 30, 6)
    y = rng.standard_normal(30)
    fit = fit_lse(D, y)
    assert np.abs(D.X.T @ (y - D.X @ fit.g_hat)).max() < 1e-9


def test_lse_exact_line():
    D = build_design(np.column_stack([np.ones(4), np.arange(4.0)]))
    fit = fit_lse(D, 2.0 + 3.0 * np.arange(4.0))
    assert np.allclose(fit.g_hat, [2.0, 3.0])


# ---------------------------------------------------------------- forward-backward

def test_fb_step_by_hand():
    D = build_design([[1.0], [1.0]])
    s1 = fb_step(np.zeros(2), D, np.array([1.0, 3.0]), 1.0)
    # forward point (-1, 1) lies on the threshold; only rounding survives
    assert np.allclose(s1, 0.0, atol=1e-12)


def test_fb_step_rejects_gamma():
    D = build_design([[1.0], [1.0]])
    with pytest.raises(ParameterError):
        fb_step(np.zeros(2), D, np.ones(2), 1.0, gamma=2.5)


def test_optimum_is_fixed_point(rng):
    D, y = contaminated(rng, 40, 6, 5)
    fit = fit_l1l2(D, y, 1.5)
    s_next = fb_step(fit.s_hat, D, y, 1.5)
    assert np.abs(s_next - fit.s_hat).max() < 1e-7


def test_objective_monotone_without_polish(rng):
    D, y = contaminated(rng, 30, 5, 4)
    sigma = 1.0
    s = np.zeros(30)
    prev = reduced_objective(D, y, sigma, s)
    for _ in range(300):
        s = fb_step(s, D, y, sigma, gamma=1.0, lam=1.0)
        cur = reduced_objective(D, y, sigma, s)
        assert cur <= prev + 1e-12
        prev = cur


def test_pure_forward_backward_converges(rng):
    D, y = contaminated(rng, 30, 5, 3)
    opts = SolverOptions(polish_every=0)
    pure = fit_l1l2(D, y, 1.0, opts)
    polished = fit_l1l2(D, y, 1.0)
    assert pure.converged
    assert pure.objective == pytest.approx(polished.objective, rel=1e-8, abs=1e-10)


def test_not_converged_carries_iterate(rng):
    D, y = contaminated(rng, 40, 6, 8)
    opts = SolverOptions(max_iters=3, polish_every=0, fp_tol=1e-15, gap_tol=1e-15)
    with pytest.raises(NotConverged) as info:
        fit_l1l2(D, y, 0.5, opts)
    assert info.value.fit is not None
    assert not info.value.fit.converged
    assert info.value.fit.iterations == 3


# ---------------------------------------------------------------- robust fit

def test_two_points_large_sigma():
    D = build_design([[1.0], [1.0]])
    fit = fit_l1l2(D, [1.0, 3.0], 2.0)
    assert fit.g_hat[0] == pytest.approx(2.0)
    assert np.allclose(fit.s_hat, 0.0)
    assert np.allclose(fit.b_hat, [-1.0, 1.0])


def test_scalar_huber_location():
    D = build_design(np.ones((3, 1)))
    y = np.array([0.0, 0.0, 10.0])
    fit = fit_l1l2(D, y, 1.0)
    grid = np.linspace(-2, 5, 700001)
    vals = huber_penalty(y[None, :] - grid[:, None], 1.0).sum(axis=1)
    assert fit.g_hat[0] == pytest.approx(grid[vals.argmin()], abs=1e-4)
    assert fit.g_hat[0] == pytest.approx(0.5)


@pytest.mark.parametrize("sigma", [0.3, 1.0, 1.959964])
def test_matches_huber_oracle(rng, sigma):
    for _ in range(5):
        D, y = contaminated(rng, 25, 3, 5)
        fit = fit_l1l2(D, y, sigma)
        _, ref = huber_oracle(D, y, sigma)
        assert fit.objective <= ref + 1e-9 * (1 + ref)
        assert fit.objective == pytest.approx(ref, rel=1e-6)


def test_objective_forms_agree(rng):
    D, y = contaminated(rng, 40, 8, 6)
    fit = fit_l1l2(D, y, 1.2)
    psi = primal_objective(D, y, 1.2, fit.g_hat, fit.b_hat)
    assert psi == pytest.approx(fit.objective, abs=1e-8)
    assert huber_penalty(fit.residuals, 1.2).sum() == pytest.approx(fit.objective, abs=1e-8)
    assert reduced_objective(D, y, 1.2, fit.s_hat) == pytest.approx(fit.objective, abs=1e-8)


def test_optimality_conditions(rng):
    D, y = contaminated(rng, 64, 16, 10)
    sigma = 1.0
    fit = fit_l1l2(D, y, sigma)
    b, s = fit.b_hat, fit.s_hat
    assert np.abs(D.X.T @ b).max() < 1e-6
    assert np.abs(b).max() <= sigma
    on = np.abs(s) > 1e-10
    assert np.allclose(b[on], sigma * np.sign(s[on]), atol=1e-6)


def test_noise_only_regime_returns_lse(rng):
    D = random_design(rng, 40, 8)
    z = rng.standard_normal(40)
    _, b_bar = noise_decompose(D, z)
    sigma = 1.01 * np.abs(b_bar).max()
    fit = fit_l1l2(D, z, sigma)
    assert np.allclose(fit.g_hat, fit_lse(D, z).g_hat, atol=1e-10)
    assert fit.iterations == 1
    assert abs(duality_gap(D, z, sigma, fit)) < 1e-10


# ---------------------------------------------------------------- duality

def test_gap_vanishes_at_optimum(rng):
    D, y = contaminated(rng, 50, 10, 8)
    fit = fit_l1l2(D, y, 1.5)
    gap = duality_gap(D, y, 1.5, fit)
    assert 0 <= gap + 1e-12
    assert gap <= 1e-8 * (1 + fit.objective)
    assert dual_value(D, y, 1.5, fit.b_hat) == pytest.approx(fit.objective, abs=1e-7)


def test_gap_positive_from_zero_start(rng):
    D, y = contaminated(rng, 50, 10, 8)
    opts = SolverOptions(max_iters=1, polish_every=0, fp_tol=1e-15, gap_tol=1e-15)
    with pytest.raises(NotConverged) as info:
        fit_l1l2(D, y, 1.0, opts)
    assert duality_gap(D, y, 1.0, info.value.fit) > 0


def test_weak_duality_sampling(rng):
    D, y = contaminated(rng, 20, 3, 4)
    sigma = 0.8
    for _ in range(200):
        w = residual_project(D, rng.standard_normal(20))
        u = sigma * w / max(1.0, np.abs(w).max())
        g, b = rng.standard_normal(3), rng.standard_normal(20)
        assert dual_value(D, y, sigma, u) <= primal_objective(D, y, sigma, g, b) + 1e-12


def test_dual_infeasible():
    D = build_design([[1.0], [1.0]])
    with pytest.raises(DualInfeasible):
        dual_value(D, [1.0, 2.0], 1.0, [1.0, 1.0])
    with pytest.raises(DualInfeasible):
        dual_value(D, [1.0, 2.0], 1.0, [2.0, -2.0])


# ---------------------------------------------------------------- l1

def test_oracle_three_points():
    D = build_design(np.ones((3, 1)))
    fit = l1_oracle_small(D, [0.0, 0.0, 10.0])
    assert fit.g_hat[0] == 0.0
    assert fit.objective == 10.0
    assert fit.iterations == 3


def test_oracle_too_large(rng):
    with pytest.raises(TooLarge):
        l1_oracle_small(random_design(rng, 15, 2), np.zeros(15))


def test_l1_matches_oracle_and_lp(rng):
    for _ in range(10):
        D, y = contaminated(rng, 12, 2, 3)
        fit = fit_l1(D, y)
        ref = l1_oracle_small(D, y)
        _, lp = lad_by_lp(D.X, y)
        assert fit.objective == pytest.approx(ref.objective, rel=1e-6)
        assert ref.objective == pytest.approx(lp, rel=1e-9)


def test_l1_larger_against_lp(rng):
    for _ in range(5):
        D, y = contaminated(rng, 128, 32, 20)
        fit = fit_l1(D, y)
        _, lp = lad_by_lp(D.X, y)
        assert fit.converged
        assert fit.objective == pytest.approx(lp, rel=1e-7)


def test_l1_certificate_holds(rng):
    D, y = contaminated(rng, 40, 5, 6)
    fit = fit_l1(D, y)
    zero_tol = 1e-7 * (1 + np.abs(y).max())
    ok, w, viol = l1_certificate(D, y, fit.g_hat, zero_tol)
    assert ok and viol <= 1e-6
    assert np.abs(w).max() <= 1.0
    big = np.abs(fit.residuals) > zero_tol
    assert np.array_equal(w[big], np.sign(fit.residuals[big]))


def test_l1l2_objective_tends_to_l1(rng):
    """sigma * ||s||_1 + ||b||^2/2 divided by sigma approaches the l1 optimum."""
    D, y = contaminated(rng, 30, 4, 5)
    target = fit_l1(D, y).objective
    errs = []
    for sigma in (1e-1, 1e-2, 1e-3, 1e-4):
        fit = fit_l1l2(D, y, sigma)
        errs.append(abs(fit.objective / sigma - target))
    assert all(b <= a + 1e-9 for a, b in zip(errs, errs[1:]))
    assert errs[-1] < 1e-2 * (1 + target)

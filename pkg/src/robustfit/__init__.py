"""Robust linear regression: LSE, least absolute deviations and the
l1-inf-convolution-l2 estimator, with breakdown analysis of designs."""

from .breakdown import (
    BreakdownReport,
    adversarial_instance,
    breakdown_m,
    breakdown_report,
    candidate_directions,
    kappa,
    leverage_constant,
)
from .estimators import (
    FitResult,
    SolverOptions,
    dual_value,
    duality_gap,
    fb_step,
    fit_l1,
    fit_l1l2,
    fit_lse,
    l1_oracle_small,
    primal_objective,
)
from .linalg import DesignFactor, build_design, lse_solve, noise_decompose, residual_project
from .prox import clip_box, huber_penalty, soft_threshold

__version__ = "0.1.0"

"""Split-sample estimates of the target noise variance."""

from __future__ import annotations

import numpy as np

from .core import CoefficientMatrix, Dataset, SimplexWeight, SplitPlan
from .errors import TooFewLabels
from .lasso import LassoConfig, lasso_fit
from .qp import least_squares_weights


def _halves(target: Dataset, plan: SplitPlan):
    if plan.indices_s2.size < 2:
        raise TooFewLabels(f"split s2 has {plan.indices_s2.size} rows; need at least 2")
    return target.subset(plan.indices_s1), target.subset(plan.indices_s2)


def sigma2_target(target: Dataset, plan: SplitPlan, cfg: LassoConfig = LassoConfig()):
    """Fit the Lasso on s1 and return ``(mean squared s2 residual, beta_s1)``."""
    s1, s2 = _halves(target, plan)
    beta_s1 = lasso_fit(s1, cfg).coef
    r = s2.y - s2.x @ beta_s1
    return float(r @ r / r.shape[0]), beta_s1


def sigma2_source(target: Dataset, plan: SplitPlan, b_hat: CoefficientMatrix):
    """Fit simplex weights over the source columns on s1, plug in on s2.

    Returns ``(sigma2_source, gamma_s1)``.
    """
    if b_hat.augmented:
        raise ValueError("expected the unaugmented source coefficient matrix")
    s1, s2 = _halves(target, plan)
    B = b_hat.columns
    gamma, _ = least_squares_weights(s1.x @ B, s1.y, "convex")
    r = s2.y - s2.x @ (B @ gamma)
    return float(r @ r / r.shape[0]), SimplexWeight(gamma, "convex")


def sigma2_combined(sigma2_q: float, sigma2_src: float) -> float:
    if sigma2_q < 0 or sigma2_src < 0:
        raise ValueError("variance estimates must be nonnegative")
    return min(sigma2_q, sigma2_src)

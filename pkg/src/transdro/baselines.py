"""Baseline coefficients that anchor the robust loss."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from .core import CoefficientMatrix, Dataset, SplitPlan
from .lasso import LassoConfig, lasso_fit
from .qp import least_squares_weights


class BaselineKind(str, Enum):
    ZERO = "zero"
    TARGET_LASSO = "target_lasso"
    CONVEX_COMBO = "convex_combo"
    BOUNDED_COMBO = "bounded_combo"

    @classmethod
    def parse(cls, value) -> "BaselineKind":
        if isinstance(value, cls):
            return value
        aliases = {"target": cls.TARGET_LASSO, "convex": cls.CONVEX_COMBO, "bounded": cls.BOUNDED_COMBO}
        if value in aliases:
            return aliases[value]
        return cls(value)

    @property
    def candidate_set(self) -> str:
        return {"convex_combo": "convex", "bounded_combo": "bounded"}[self.value]


@dataclass(frozen=True)
class Baseline:
    beta: np.ndarray
    kind: BaselineKind
    # mean of the two cross-fitted weight vectors (combination baselines only)
    weights: Optional[np.ndarray] = None
    split_weights: tuple = ()


def baseline_zero(p: int) -> np.ndarray:
    if p < 1:
        raise ValueError("p must be >= 1")
    return np.zeros(p)


def baseline_target_lasso(target: Dataset, cfg: LassoConfig = LassoConfig()) -> np.ndarray:
    return lasso_fit(target, cfg).coef


def _one_direction(fit_rows: Dataset, weight_rows: Dataset, B: np.ndarray, candidate_set: str,
                   cfg: LassoConfig, beta_fit=None):
    if beta_fit is None:
        beta_fit = lasso_fit(fit_rows, cfg).coef
    B0 = np.column_stack([beta_fit, B])
    w, _ = least_squares_weights(weight_rows.x @ B0, weight_rows.y, candidate_set)
    return B0 @ w, w


def baseline_weighted_full(target: Dataset, plan: SplitPlan, b_hat_sources: CoefficientMatrix,
                           kind, cfg: LassoConfig = LassoConfig(), beta_s1=None,
                           beta_s2=None) -> Baseline:
    """Cross-fitted weighted average of the target split fit and the source fits.

    ``beta_s1``/``beta_s2`` let callers reuse split Lasso fits they already
    hold; they are refit from ``cfg`` when omitted.
    """
    kind = BaselineKind.parse(kind)
    if kind not in (BaselineKind.CONVEX_COMBO, BaselineKind.BOUNDED_COMBO):
        raise ValueError(f"{kind.value} is not a weighted baseline")
    s1, s2 = target.subset(plan.indices_s1), target.subset(plan.indices_s2)
    B = b_hat_sources.sources().columns
    cs = kind.candidate_set
    est1, w1 = _one_direction(s1, s2, B, cs, cfg, beta_s1)
    est2, w2 = _one_direction(s2, s1, B, cs, cfg, beta_s2)
    return Baseline((est1 + est2) / 2.0, kind, (w1 + w2) / 2.0, (w1, w2))


def baseline_weighted(target: Dataset, plan: SplitPlan, b_hat_sources: CoefficientMatrix,
                      kind, cfg: LassoConfig = LassoConfig()) -> np.ndarray:
    return baseline_weighted_full(target, plan, b_hat_sources, kind, cfg).beta


def make_baseline(kind, target: Dataset, plan: SplitPlan, b_hat_sources: CoefficientMatrix,
                  cfg: LassoConfig = LassoConfig(), beta_s1=None) -> Baseline:
    kind = BaselineKind.parse(kind)
    if kind is BaselineKind.ZERO:
        return Baseline(baseline_zero(target.p), kind)
    if kind is BaselineKind.TARGET_LASSO:
        return Baseline(baseline_target_lasso(target, cfg), kind)
    return baseline_weighted_full(target, plan, b_hat_sources, kind, cfg, beta_s1=beta_s1)

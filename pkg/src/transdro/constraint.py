"""The estimated uncertainty set over augmented mixture weights.

A weight vector ``g0`` over the columns of ``B0 = (b_0, b_1, ..., b_L)``
is feasible when its mean squared prediction error on the target split s2
is at most ``min(sigma2_q, sigma2_source) + tau``.

The target column ``b_0`` is the Lasso fit on all labeled target rows
(``target_column="full"``), mirroring how each source column uses all of
its site's data. It is kept only when its s2 loss does not exceed
``sigma2_q``; otherwise, and always with ``target_column="split"``, the
split-s1 fit is used, whose s2 loss is ``sigma2_q`` exactly. Either way
the first vertex has loss at most ``sigma2_q``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import CoefficientMatrix, Dataset, SimplexWeight, SplitPlan
from .errors import DimensionMismatch
from .lasso import LassoConfig, lasso_fit
from .qp import minimize_quadratic
from .variance import sigma2_combined, sigma2_source, sigma2_target


@dataclass(frozen=True)
class FeasibleSet:
    b0_hat: CoefficientMatrix
    x_s2: np.ndarray
    y_s2: np.ndarray
    bound: float
    tau: float
    sigma2_q: float
    sigma2_source: float
    gamma_s1: np.ndarray
    # loss(g0) = g0' H g0 - 2 h' g0 + yy, with M = x_s2 @ B0
    H: np.ndarray
    h: np.ndarray
    yy: float
    beta_s1: Optional[np.ndarray] = None  # split-s1 target fit, reused by the baselines
    target_column: str = "split"

    @classmethod
    def from_parts(cls, b0_hat: CoefficientMatrix, x_s2, y_s2, tau: float, sigma2_q: float,
                   sigma2_src: float, gamma_s1=None, beta_s1=None,
                   target_column: str = "split") -> "FeasibleSet":
        if tau < 0:
            raise ValueError("tau must be nonnegative")
        x_s2 = np.asarray(x_s2, dtype=np.float64)
        y_s2 = np.asarray(y_s2, dtype=np.float64)
        n2 = y_s2.shape[0]
        M = x_s2 @ b0_hat.columns
        H = M.T @ M / n2
        h = M.T @ y_s2 / n2
        bound = sigma2_combined(sigma2_q, sigma2_src) + tau
        if gamma_s1 is None:
            gamma_s1 = np.full(b0_hat.n_sources, 1.0 / max(b0_hat.n_sources, 1))
        if beta_s1 is None:
            beta_s1 = b0_hat.columns[:, 0]
        return cls(b0_hat, x_s2, y_s2, float(bound), float(tau), float(sigma2_q),
                   float(sigma2_src), np.asarray(gamma_s1, dtype=np.float64),
                   H, h, float(y_s2 @ y_s2 / n2), np.asarray(beta_s1, dtype=np.float64), target_column)

    @property
    def n_weights(self) -> int:
        return self.b0_hat.n_columns

    @property
    def unconstrained(self) -> bool:
        return math.isinf(self.bound)

    def witness(self) -> np.ndarray:
        """A weight vector that is feasible for every tau >= 0.

        ``e_1`` has loss at most ``sigma2_q``; ``(0, gamma_s1)`` attains
        ``sigma2_source``. The one matching the smaller estimate is feasible
        at tau=0.
        """
        w = np.zeros(self.n_weights)
        if self.sigma2_q <= self.sigma2_source:
            w[0] = 1.0
        else:
            w[1:] = self.gamma_s1
        return w

    def with_tau(self, tau: float) -> "FeasibleSet":
        return FeasibleSet.from_parts(self.b0_hat, self.x_s2, self.y_s2, tau, self.sigma2_q,
                                      self.sigma2_source, self.gamma_s1, self.beta_s1,
                                      self.target_column)

    def quad_loss(self, g0) -> float:
        g0 = np.asarray(g0, dtype=np.float64)
        return float(g0 @ self.H @ g0 - 2.0 * self.h @ g0 + self.yy)

    def is_feasible(self, g0, rtol: float = 0.0) -> bool:
        g0 = np.asarray(g0, dtype=np.float64)
        in_simplex = np.all(g0 >= 0) and abs(g0.sum() - 1.0) <= 1e-9
        return bool(in_simplex and loss_at(self, g0) <= self.bound * (1.0 + rtol))


def build_feasible_set(target: Dataset, plan: SplitPlan, b_hat_sources: CoefficientMatrix,
                       tau: float, cfg: LassoConfig = LassoConfig(), target_column: str = "full",
                       beta_full=None) -> FeasibleSet:
    """``target_column`` is "full" or "split"; ``beta_full`` reuses a full-data target fit."""
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    if target_column not in ("full", "split"):
        raise ValueError(f"target_column must be 'full' or 'split', got {target_column!r}")
    s2q, beta_s1 = sigma2_target(target, plan, cfg)
    s2src, gamma_s1 = sigma2_source(target, plan, b_hat_sources)
    s2 = target.subset(plan.indices_s2)
    col, used = beta_s1, "split"
    if target_column == "full":
        if beta_full is None:
            beta_full = lasso_fit(target, cfg).coef
        r = s2.y - s2.x @ beta_full
        if r @ r / r.shape[0] <= s2q:
            col, used = np.asarray(beta_full, dtype=np.float64), "full"
    b0 = b_hat_sources.augment(col)
    return FeasibleSet.from_parts(b0, s2.x, s2.y, tau, s2q, s2src, gamma_s1.w, beta_s1, used)


def loss_at(fs: FeasibleSet, gamma0) -> float:
    """Mean squared prediction error of ``B0 @ gamma0`` on split s2."""
    w = gamma0.w if isinstance(gamma0, SimplexWeight) else np.asarray(gamma0, dtype=np.float64)
    if w.shape != (fs.n_weights,):
        raise DimensionMismatch(f"weight length {w.shape} does not match {fs.n_weights} columns")
    r = fs.y_s2 - fs.x_s2 @ (fs.b0_hat.columns @ w)
    return float(r @ r / r.shape[0])


def alpha_hat(fs: FeasibleSet) -> float:
    """Smallest tau for which the pure-source face of the set is non-empty."""
    H = fs.H[1:, 1:]
    h = fs.h[1:]
    if h.size == 0:
        return math.inf
    w, _ = minimize_quadratic(H, h, "convex")
    g0 = np.concatenate([[0.0], w])
    return max(0.0, loss_at(fs, g0) - sigma2_combined(fs.sigma2_q, fs.sigma2_source))

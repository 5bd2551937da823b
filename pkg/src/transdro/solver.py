"""Robust mixture weights: minimize ``g' Gamma g`` over the estimated set.

The feasible set is the simplex intersected with one convex quadratic
constraint. The solver first minimizes over the simplex alone; if that
point violates the constraint it bisects the Lagrange multiplier ``mu`` of
the penalized problem ``g' Gamma g + mu * (loss(g) - bound)``, solving each
penalized problem with projected gradient. Only iterates with
``loss <= bound`` are accepted; bisection stops once the accepted one is
within ``mu_bisect_tol * bound`` of the boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .constraint import FeasibleSet, loss_at
from .core import CoefficientMatrix, SimplexWeight
from .errors import BisectionBracketExhausted, DimensionMismatch
from .qp import minimize_quadratic, project_simplex  # noqa: F401  (re-exported)

_MAX_BISECT = 200


@dataclass(frozen=True)
class GammaMatrix:
    g: np.ndarray

    def __post_init__(self):
        g = np.array(self.g, dtype=np.float64)
        if g.ndim != 2 or g.shape[0] != g.shape[1]:
            raise DimensionMismatch(f"Gamma must be square, got {g.shape}")
        g = 0.5 * (g + g.T)
        g.setflags(write=False)
        object.__setattr__(self, "g", g)

    def tangent_min_eigenvalue(self) -> float:
        """Smallest eigenvalue of Gamma restricted to directions summing to zero."""
        m = self.g.shape[0]
        if m < 2:
            return math.inf
        basis = np.linalg.qr(np.eye(m) - 1.0 / m)[0][:, : m - 1]
        return float(np.linalg.eigvalsh(basis.T @ self.g @ basis).min())


@dataclass(frozen=True)
class SolverConfig:
    pg_tol: float = 1e-8
    pg_max_iter: int = 20000
    mu_bisect_tol: float = 1e-6
    mu_max: float = 1e12

    def __post_init__(self):
        for name in ("pg_tol", "pg_max_iter", "mu_bisect_tol", "mu_max"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class SolveDiagnostics:
    mu: float = 0.0
    pg_iterations: int = 0
    bisection_steps: int = 0
    objective: float = math.nan
    loss: float = math.nan
    bound: float = math.nan
    constraint_slack: float = math.nan
    constraint_active: bool = False
    nonunique: bool = False
    fallback: str = ""
    extra: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        d = {k: v for k, v in self.__dict__.items() if k != "extra"}
        d.update(self.extra)
        return d


def gamma_matrix(b0_hat: CoefficientMatrix, beta_init, x_pool) -> GammaMatrix:
    """``G[l, k] = (b_l - beta_init)' S (b_k - beta_init)`` with ``S = X'X / rows``."""
    x_pool = np.asarray(x_pool, dtype=np.float64)
    beta_init = np.asarray(beta_init, dtype=np.float64)
    if x_pool.ndim != 2 or x_pool.shape[1] != b0_hat.p or beta_init.shape != (b0_hat.p,):
        raise DimensionMismatch("x_pool, beta_init and the coefficient matrix disagree on p")
    # (X D)'(X D) / rows avoids forming the p x p second-moment matrix
    XD = x_pool @ (b0_hat.columns - beta_init[:, None])
    return GammaMatrix(XD.T @ XD / x_pool.shape[0])


def _penalized(g, fs, mu, x0, cfg):
    Q = g + mu * fs.H
    c = mu * fs.h
    return minimize_quadratic(Q, c, "convex", x0=x0, max_iter=cfg.pg_max_iter, tol=cfg.pg_tol)


def solve_weights(g: GammaMatrix, fs: FeasibleSet, cfg: SolverConfig = SolverConfig()):
    """Return ``(SimplexWeight, SolveDiagnostics)`` for the robust weight problem.

    Raises BisectionBracketExhausted when no multiplier up to
    ``cfg.mu_max`` yields a feasible iterate.
    """
    G = g.g
    m = G.shape[0]
    if m != fs.n_weights:
        raise DimensionMismatch(f"Gamma is {m}x{m} but the set has {fs.n_weights} weights")
    diag = SolveDiagnostics(bound=fs.bound)
    diag.nonunique = g.tangent_min_eigenvalue() < 1e-8

    x, it = minimize_quadratic(G, np.zeros(m), "convex", max_iter=cfg.pg_max_iter, tol=cfg.pg_tol)
    diag.pg_iterations += it
    loss = fs.quad_loss(x)
    tol_abs = cfg.mu_bisect_tol * abs(fs.bound)

    if fs.unconstrained or loss <= fs.bound:
        return _finish(x, 0.0, G, fs, diag)

    # bracket: mu_lo infeasible, mu_hi feasible
    scale = np.trace(G) / np.trace(fs.H) if np.trace(fs.H) > 0 else 1.0
    mu_lo, mu_hi = 0.0, max(scale, 1e-12)
    x_hi = None
    x_warm = x
    while True:
        x_mu, it = _penalized(G, fs, mu_hi, x_warm, cfg)
        diag.pg_iterations += it
        diag.bisection_steps += 1
        loss = fs.quad_loss(x_mu)
        if loss <= fs.bound:
            x_hi = x_mu
            break
        mu_lo, x_warm = mu_hi, x_mu
        mu_hi *= 4.0
        if mu_hi > cfg.mu_max:
            raise BisectionBracketExhausted(
                f"no feasible iterate for mu <= {cfg.mu_max:g} (bound {fs.bound:.6g}, loss {loss:.6g})"
            )

    for _ in range(_MAX_BISECT):
        if fs.bound - fs.quad_loss(x_hi) <= tol_abs:
            break
        if mu_lo > 0 and mu_hi / mu_lo > 4.0:
            mid = math.sqrt(mu_lo * mu_hi)
        else:
            mid = 0.5 * (mu_lo + mu_hi)
        if not mu_lo < mid < mu_hi:
            break
        x_mu, it = _penalized(G, fs, mid, x_hi, cfg)
        diag.pg_iterations += it
        diag.bisection_steps += 1
        if fs.quad_loss(x_mu) <= fs.bound:
            mu_hi, x_hi = mid, x_mu
        else:
            mu_lo = mid
    diag.constraint_active = True
    return _finish(x_hi, mu_hi, G, fs, diag)


def _finish(x, mu, G, fs, diag):
    diag.mu = float(mu)
    diag.objective = float(x @ G @ x)
    diag.loss = loss_at(fs, x)
    diag.constraint_slack = fs.bound - diag.loss
    return SimplexWeight(x, "convex"), diag


def solve_or_fallback(g: GammaMatrix, fs: FeasibleSet, cfg: SolverConfig = SolverConfig()):
    """``solve_weights``, returning the witness point if the bracket is exhausted."""
    try:
        return solve_weights(g, fs, cfg)
    except BisectionBracketExhausted:
        diag = SolveDiagnostics(bound=fs.bound, fallback="witness")
        return _finish(fs.witness(), math.inf, g.g, fs, diag)

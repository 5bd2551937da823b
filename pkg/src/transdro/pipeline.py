"""End-to-end TransDRO fit and the maximin special case."""

from __future__ import annotations

import math
from typing import Optional, Sequence

import numpy as np

from .baselines import Baseline, BaselineKind, make_baseline
from .constraint import FeasibleSet, alpha_hat, build_feasible_set
from .core import (CoefficientMatrix, Dataset, FitReport, SimplexWeight, SplitPlan, check_same_p,
                   make_split)
from .errors import DimensionMismatch
from .lasso import LassoConfig, lasso_fit
from .qp import minimize_quadratic
from .solver import SolverConfig, gamma_matrix, solve_or_fallback, solve_weights


def fit_source_models(sources: Sequence[Dataset], cfg: LassoConfig = LassoConfig()) -> CoefficientMatrix:
    """Per-source Lasso fits stacked as columns (intercepts are discarded)."""
    if not sources:
        raise ValueError("need at least one source dataset")
    return CoefficientMatrix.from_vectors([lasso_fit(s, cfg).coef for s in sources])


def target_pool(target: Dataset, x_unlabeled: Optional[np.ndarray] = None) -> np.ndarray:
    if x_unlabeled is None or len(x_unlabeled) == 0:
        return target.x
    return np.vstack([target.x, np.asarray(x_unlabeled, dtype=np.float64)])


def default_tau(n_labeled: int) -> float:
    return 1.0 / n_labeled


def fit_transdro(target: Dataset, sources: Sequence[Dataset] = (), kind="convex_combo",
                 tau: Optional[float] = None, lasso_cfg: LassoConfig = LassoConfig(),
                 solver_cfg: SolverConfig = SolverConfig(), seed=0,
                 x_unlabeled: Optional[np.ndarray] = None,
                 b_hat: Optional[CoefficientMatrix] = None,
                 plan: Optional[SplitPlan] = None,
                 feasible_set: Optional[FeasibleSet] = None,
                 baseline: Optional[Baseline] = None, fallback: bool = True,
                 target_column: str = "full") -> FitReport:
    """Fit the robust transfer estimator ``B0 @ gamma``.

    ``sources`` may be omitted when ``b_hat`` (unaugmented source fits) is
    supplied. ``seed`` drives the target split; Lasso folds use
    ``lasso_cfg.cv_seed``. ``tau`` defaults to ``1/n``. A prebuilt
    ``feasible_set`` (same plan and source fits) is re-targeted to ``tau``
    instead of refitting the split Lasso; likewise a prebuilt ``baseline``
    of the requested kind is used as is. With ``fallback=False`` an
    exhausted multiplier bracket raises instead of returning the witness.
    ``target_column`` picks the target fit in ``B0`` ("full" or "split",
    see ``build_feasible_set``).
    """
    kind = BaselineKind.parse(kind)
    if b_hat is None:
        check_same_p([target, *sources])
        b_hat = fit_source_models(sources, lasso_cfg)
    elif b_hat.p != target.p:
        raise DimensionMismatch(f"source fits have p={b_hat.p} but the target has p={target.p}")
    if plan is None:
        plan = make_split(target, seed)
    if tau is None:
        tau = default_tau(target.n_obs)
    if tau < 0:
        raise ValueError("tau must be nonnegative")

    if feasible_set is None:
        fs = build_feasible_set(target, plan, b_hat, tau, lasso_cfg, target_column)
    else:
        fs = feasible_set if feasible_set.tau == tau else feasible_set.with_tau(tau)
    if baseline is None:
        base = make_baseline(kind, target, plan, b_hat, lasso_cfg, beta_s1=fs.beta_s1)
    elif baseline.kind is not kind:
        raise ValueError(f"baseline kind {baseline.kind.value} does not match {kind.value}")
    else:
        base = baseline
    G = gamma_matrix(fs.b0_hat, base.beta, target_pool(target, x_unlabeled))
    solve = solve_or_fallback if fallback else solve_weights
    gamma, diag = solve(G, fs, solver_cfg)

    diagnostics = diag.as_dict()
    diagnostics.update(
        baseline=kind.value,
        sigma2_q=fs.sigma2_q,
        sigma2_source=fs.sigma2_source,
        alpha_hat=alpha_hat(fs),
        target_column=fs.target_column,
        n_s1=int(plan.indices_s1.size),
        n_s2=int(plan.indices_s2.size),
    )
    if base.weights is not None:
        diagnostics["baseline_weights"] = base.weights.tolist()
    return FitReport(
        beta=fs.b0_hat @ gamma,
        gamma=gamma,
        baseline_beta=base.beta,
        tau=float(tau),
        sigma2_hat=min(fs.sigma2_q, fs.sigma2_source),
        b0_hat=fs.b0_hat,
        diagnostics=diagnostics,
    )


def fit_maximin(x_pool: np.ndarray, b_hat: CoefficientMatrix,
                solver_cfg: SolverConfig = SolverConfig()) -> FitReport:
    """Zero baseline, no loss constraint, source columns only.

    Uses the target covariates solely through their second moment.
    """
    b_hat = b_hat.sources()
    G = gamma_matrix(b_hat, np.zeros(b_hat.p), x_pool)
    w, it = minimize_quadratic(G.g, np.zeros(b_hat.n_columns), "convex",
                               max_iter=solver_cfg.pg_max_iter, tol=solver_cfg.pg_tol)
    gamma = SimplexWeight(w, "convex")
    return FitReport(
        beta=b_hat @ gamma,
        gamma=gamma,
        baseline_beta=np.zeros(b_hat.p),
        tau=math.inf,
        sigma2_hat=math.nan,
        b0_hat=b_hat,
        diagnostics={"pg_iterations": it, "objective": float(w @ G.g @ w), "baseline": "zero",
                     "nonunique": G.tangent_min_eigenvalue() < 1e-8},
    )

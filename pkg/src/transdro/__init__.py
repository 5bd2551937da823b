"""Distributionally robust transfer learning for linear models."""

from ._backend import BACKEND
from .baselines import Baseline, BaselineKind, make_baseline
from .constraint import FeasibleSet, alpha_hat, build_feasible_set, loss_at
from .core import CoefficientMatrix, Dataset, FitReport, SimplexWeight, SplitPlan, make_split
from .errors import (BadSpec, BisectionBracketExhausted, DimensionMismatch, NonFinite, TooFewLabels,
                     TooFewRows, TransDROError)
from .evaluation import MetricTable, comb_source, evaluate, run_benchmark
from .lasso import LassoConfig, LassoFit, lasso_cv, lasso_fit
from .pipeline import fit_maximin, fit_source_models, fit_transdro
from .simulation import GroundTruth, Scenario, ScenarioSpec, generate
from .solver import GammaMatrix, SolverConfig, gamma_matrix, project_simplex, solve_weights

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "Baseline", "BaselineKind", "make_baseline", "FeasibleSet", "alpha_hat",
    "build_feasible_set", "loss_at", "CoefficientMatrix", "Dataset", "FitReport", "SimplexWeight",
    "SplitPlan", "make_split", "BadSpec", "BisectionBracketExhausted", "DimensionMismatch",
    "NonFinite", "TooFewLabels", "TooFewRows", "TransDROError", "MetricTable", "comb_source",
    "evaluate", "run_benchmark", "LassoConfig", "LassoFit", "lasso_cv", "lasso_fit", "fit_maximin",
    "fit_source_models", "fit_transdro", "GroundTruth", "Scenario", "ScenarioSpec", "generate",
    "GammaMatrix", "SolverConfig", "gamma_matrix", "project_simplex", "solve_weights",
]

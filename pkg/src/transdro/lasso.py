"""l1-penalized least squares by cyclic coordinate descent.

The objective is ``(1/n)||y - X b||^2 + lam * ||b||_1``. With
``standardize=True`` the fit runs on centered ``y`` and centered,
unit-variance columns of ``X`` (the penalty acts on the standardized
scale); coefficients are mapped back and the intercept is recovered from
the means.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Union

import numpy as np

from ._backend import kernels
from .core import Dataset
from .errors import NonFinite, TooFewRows


@dataclass(frozen=True)
class LassoConfig:
    lam: Union[float, str] = "auto"
    max_iter: int = 10000
    tol: float = 1e-7
    standardize: bool = True
    n_folds: int = 5
    n_lambdas: int = 100
    lambda_min_ratio: float = 1e-4
    cv_seed: int = 0
    shuffle: bool = True

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.lam == "auto":
            if self.n_folds < 2:
                raise ValueError("n_folds must be >= 2 for cross-validated lambda")
        elif not (isinstance(self.lam, (int, float)) and self.lam >= 0):
            raise ValueError(f"lam must be a nonnegative number or 'auto', got {self.lam!r}")

    @property
    def auto(self) -> bool:
        return self.lam == "auto"


@dataclass(frozen=True)
class LassoFit:
    coef: np.ndarray
    intercept: float
    lam: float
    n_sweeps: int
    converged: bool
    objective_path: np.ndarray

    def predict(self, x: np.ndarray) -> np.ndarray:
        return x @ self.coef + self.intercept


@dataclass
class _Prepared:
    """Sufficient statistics of one design for the covariance-form solver."""

    G: np.ndarray
    c: np.ndarray
    yy: float
    x_mean: np.ndarray
    x_scale: np.ndarray
    y_mean: float

    @classmethod
    def build(cls, x: np.ndarray, y: np.ndarray, standardize: bool) -> "_Prepared":
        n, p = x.shape
        if standardize:
            x_mean = x.mean(axis=0)
            y_mean = float(y.mean())
            xc = x - x_mean
            yc = y - y_mean
            scale = np.sqrt((xc * xc).mean(axis=0))
            scale[scale == 0] = 1.0
            xc = xc / scale
        else:
            x_mean = np.zeros(p)
            y_mean = 0.0
            scale = np.ones(p)
            xc, yc = x, y
        G = np.ascontiguousarray(xc.T @ xc / n)
        c = np.ascontiguousarray(xc.T @ yc / n)
        return cls(G, c, float(yc @ yc / n), x_mean, scale, y_mean)

    def lambda_max(self) -> float:
        return float(np.max(np.abs(2.0 * self.c), initial=0.0))

    def solve(self, lam: float, cfg: LassoConfig, warm: np.ndarray | None = None):
        beta = np.zeros(self.G.shape[0]) if warm is None else np.array(warm, dtype=np.float64)
        obj = np.empty(cfg.max_iter)
        sweeps = kernels.cd_gram(self.G, self.c, beta, float(lam), cfg.tol, cfg.max_iter, obj)
        path = obj[:sweeps] + self.yy
        if not np.all(np.isfinite(path)):
            raise NonFinite("coordinate descent objective diverged")
        return beta, sweeps, path

    def unscale(self, beta_std: np.ndarray):
        coef = beta_std / self.x_scale
        intercept = self.y_mean - float(self.x_mean @ coef)
        return coef, intercept


def _labeled(data: Dataset):
    if not data.labeled:
        raise ValueError(f"site {data.site_id} has no responses")
    if data.n_obs == 0:
        raise TooFewRows("cannot fit a Lasso on zero rows")
    return data.x, data.y


def lasso_fit(data: Dataset, cfg: LassoConfig = LassoConfig()) -> LassoFit:
    """Fit the Lasso at ``cfg.lam``, or at the cross-validated lambda if 'auto'."""
    if cfg.auto:
        return lasso_cv(data, cfg)[1]
    x, y = _labeled(data)
    prep = _Prepared.build(x, y, cfg.standardize)
    beta, sweeps, path = prep.solve(cfg.lam, cfg)
    coef, intercept = prep.unscale(beta)
    return LassoFit(coef, intercept, float(cfg.lam), sweeps, sweeps < cfg.max_iter, path)


def lambda_grid(lam_max: float, n_lambdas: int = 100, min_ratio: float = 1e-4) -> np.ndarray:
    if lam_max <= 0:
        return np.zeros(1)
    return np.geomspace(lam_max, lam_max * min_ratio, n_lambdas)


def fold_ids(n: int, n_folds: int, seed=0, shuffle: bool = True) -> np.ndarray:
    """Row i of the (optionally shuffled) order goes to fold ``i mod K``."""
    folds = np.empty(n, dtype=np.intp)
    order = np.random.default_rng(seed).permutation(n) if shuffle else np.arange(n)
    folds[order] = np.arange(n) % n_folds
    return folds


# a path stops once the fit explains this share of the centered response
# variance; smaller penalties only approach interpolation
PATH_STOP_R2 = 0.999


def _path(prep: _Prepared, grid: np.ndarray, cfg: LassoConfig):
    """Warm-started solutions along a decreasing lambda grid.

    Stops after the first solution whose in-sample R^2 reaches
    ``PATH_STOP_R2``.
    """
    beta = np.zeros(prep.G.shape[0])
    for lam in grid:
        beta, sweeps, obj = prep.solve(lam, cfg, warm=beta)
        yield beta, sweeps, obj
        rss = prep.yy + beta @ prep.G @ beta - 2.0 * prep.c @ beta
        if prep.yy > 0 and rss <= (1.0 - PATH_STOP_R2) * prep.yy:
            return


def lasso_cv(data: Dataset, cfg: LassoConfig = LassoConfig()):
    """Choose lambda by K-fold validation MSE and refit on all rows.

    The grid has ``cfg.n_lambdas`` log-spaced values from
    ``max_j |2 X'y / n|_j`` down by ``cfg.lambda_min_ratio``, truncated
    where the full-data or any fold path stops early. Returns
    ``(lam, LassoFit)``.
    """
    x, y = _labeled(data)
    n = x.shape[0]
    if n < cfg.n_folds:
        raise TooFewRows(f"{n} rows cannot be split into {cfg.n_folds} folds")
    full = _Prepared.build(x, y, cfg.standardize)
    grid = lambda_grid(full.lambda_max(), cfg.n_lambdas, cfg.lambda_min_ratio)
    full_path = list(_path(full, grid, cfg))
    grid = grid[: len(full_path)]

    folds = fold_ids(n, cfg.n_folds, cfg.cv_seed, cfg.shuffle)
    sse = np.zeros(grid.shape[0])
    n_valid = grid.shape[0]
    for k in range(cfg.n_folds):
        val = folds == k
        train = _Prepared.build(x[~val], y[~val], cfg.standardize)
        xv, yv = x[val], y[val]
        i = -1
        for i, (beta, _, _) in enumerate(_path(train, grid, cfg)):
            coef, intercept = train.unscale(beta)
            r = yv - xv @ coef - intercept
            sse[i] += r @ r
        n_valid = min(n_valid, i + 1)
    best = int(np.argmin(sse[:n_valid]))

    beta, sweeps, path = full_path[best]
    lam = float(grid[best])
    coef, intercept = full.unscale(beta)
    fit = LassoFit(coef, intercept, lam, sweeps, sweeps < cfg.max_iter, path)
    return lam, fit


def with_lambda(cfg: LassoConfig, lam) -> LassoConfig:
    return replace(cfg, lam=lam)

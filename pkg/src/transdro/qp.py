"""Quadratic minimization over the probability simplex or a box.

Every weight problem in the pipeline has the form
``min_x x'Qx - 2c'x`` over one of the candidate sets, so one solver
serves the variance estimates, the baselines, the comparators and the
robust weight problem itself.
"""

from __future__ import annotations

import numpy as np

from ._backend import kernels

_SIMPLEX = 0
_BOX = 1
_SUPPORT_EPS = 1e-12


def project_simplex(v) -> np.ndarray:
    """Euclidean projection of ``v`` onto the probability simplex (sort and threshold)."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.shape[0] == 0:
        raise ValueError("expected a non-empty vector")
    if not np.all(np.isfinite(v)):
        raise ValueError("cannot project a non-finite vector")
    return kernels.project_simplex(v)


def box_bounds(m: int):
    """Bounds of the 'bounded' candidate set: entry 0 in [0, 1], the rest in [-1, 1]."""
    lo = -np.ones(m)
    lo[0] = 0.0
    return lo, np.ones(m)


def step_size(Q: np.ndarray) -> float:
    # 1 / (2 * row-sum norm) bounds the inverse Lipschitz constant of the gradient 2(Qx - c)
    norm = float(np.max(np.abs(Q).sum(axis=1)))
    return 1.0 / (2.0 * norm) if norm > 0 else 1.0


def objective(Q, c, x) -> float:
    return float(x @ Q @ x - 2.0 * c @ x)


def _polish_simplex(Q, c, x):
    support = np.flatnonzero(x > _SUPPORT_EPS)
    k = support.size
    K = np.zeros((k + 1, k + 1))
    K[:k, :k] = 2.0 * Q[np.ix_(support, support)]
    K[:k, k] = 1.0
    K[k, :k] = 1.0
    rhs = np.concatenate([2.0 * c[support], [1.0]])
    sol = np.linalg.lstsq(K, rhs, rcond=None)[0][:k]
    if np.any(sol < 0):
        return None
    cand = np.zeros_like(x)
    cand[support] = sol
    cand /= cand.sum()
    return cand


def _polish_box(Q, c, x, lo, hi):
    free = np.flatnonzero((x > lo + _SUPPORT_EPS) & (x < hi - _SUPPORT_EPS))
    if free.size == 0:
        return None
    fixed = np.setdiff1d(np.arange(x.size), free)
    rhs = c[free] - Q[np.ix_(free, fixed)] @ x[fixed]
    sol = np.linalg.lstsq(Q[np.ix_(free, free)], rhs, rcond=None)[0]
    if np.any(sol < lo[free]) or np.any(sol > hi[free]):
        return None
    cand = x.copy()
    cand[free] = sol
    return cand


def minimize_quadratic(Q, c, candidate_set: str = "convex", x0=None,
                       max_iter: int = 20000, tol: float = 1e-8, polish: bool = True):
    """Minimize ``x'Qx - 2c'x`` over the candidate set.

    Runs accelerated projected gradient with the fixed step
    ``1 / (2 ||Q||_inf)`` from ``x0`` (uniform weights by default), then
    tries an exact solve of the KKT system on the identified face and keeps
    it only if it is feasible and strictly lowers the objective.

    Returns ``(x, n_iter)``.
    """
    Q = np.ascontiguousarray(Q, dtype=np.float64)
    c = np.ascontiguousarray(c, dtype=np.float64)
    m = c.shape[0]
    if Q.shape != (m, m):
        raise ValueError(f"Q has shape {Q.shape}, expected {(m, m)}")
    if candidate_set == "convex":
        mode = _SIMPLEX
        lo, hi = np.zeros(m), np.ones(m)
        x = np.full(m, 1.0 / m) if x0 is None else np.array(x0, dtype=np.float64)
    elif candidate_set == "bounded":
        mode = _BOX
        lo, hi = box_bounds(m)
        x = np.zeros(m) if x0 is None else np.array(x0, dtype=np.float64)
        if x0 is None:
            x[0] = 1.0 / m
    else:
        raise ValueError(f"unknown candidate set {candidate_set!r}")

    n_iter = kernels.pg_quad(Q, c, x, step_size(Q), int(max_iter), float(tol), mode, lo, hi)
    if polish and m > 1:
        cand = _polish_simplex(Q, c, x) if mode == _SIMPLEX else _polish_box(Q, c, x, lo, hi)
        if cand is not None and objective(Q, c, cand) < objective(Q, c, x):
            x = cand
    if mode == _SIMPLEX:
        # exact simplex membership after roundoff
        x = np.maximum(x, 0.0)
        x /= x.sum()
    else:
        x = np.clip(x, lo, hi)
    return x, n_iter


def least_squares_weights(M, y, candidate_set: str = "convex", **kw):
    """``argmin_w (1/n)||y - M w||^2`` over the candidate set; returns ``(w, n_iter)``."""
    M = np.asarray(M, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = M.shape[0]
    Q = M.T @ M / n
    c = M.T @ y / n
    return minimize_quadratic(Q, c, candidate_set, **kw)

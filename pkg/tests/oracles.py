"""Independent reference computations used by the tests.

Nothing here calls into the solver or projection code under test; the
lattice oracles only evaluate quadratics at explicit points.
"""

from __future__ import annotations

import itertools
import math

import numpy as np


def compositions(m: int, N: int):
    """All integer vectors of length m with nonnegative entries summing to N."""
    for cuts in itertools.combinations(range(N + m - 1), m - 1):
        prev = -1
        out = []
        for c in cuts:
            out.append(c - prev - 1)
            prev = c
        out.append(N + m - 2 - prev)
        yield out


def simplex_lattice(m: int, N: int) -> np.ndarray:
    """Points of the simplex with coordinates in {0, 1/N, ..., 1}."""
    return np.array(list(compositions(m, N)), dtype=np.float64) / N


def quad_rows(A, b, c0, pts):
    """``x'Ax - 2b'x + c0`` for every row x of ``pts``."""
    return ((pts @ A - 2.0 * b) * pts).sum(axis=1) + c0


def naive_lattice_min(G, H, h, yy, bound, N):
    """Brute force over the full lattice: min g'Gg subject to loss(g) <= bound."""
    pts = simplex_lattice(G.shape[0], N)
    f = quad_rows(G, np.zeros(G.shape[0]), 0.0, pts)
    ok = quad_rows(H, h, yy, pts) <= bound
    if not ok.any():
        return math.inf, None
    i = int(np.argmin(np.where(ok, f, np.inf)))
    return float(f[i]), pts[i]


def _prefixes(m: int, N: int) -> np.ndarray:
    if m <= 2:
        return np.zeros((1, 0), dtype=np.int64)
    grid = np.indices((N + 1,) * (m - 2)).reshape(m - 2, -1).T
    return grid[grid.sum(axis=1) <= N].astype(np.int64)


def line_lattice_min(G, H, h, yy, bound, N, c=None):
    """Exact lattice minimum of ``g'Gg - 2c'g`` subject to loss(g) <= bound.

    The first m-2 coordinates are enumerated; along each remaining line
    the objective and the loss are 1-D convex quadratics in the integer
    step t, so the lattice minimizer is the clamp of the continuous one to
    the feasible integer interval. A handful of candidate integers around
    the continuous minimizer and the computed interval ends is evaluated
    directly, with feasibility checked on the point itself.
    """
    G = np.asarray(G, dtype=np.float64)
    m = G.shape[0]
    c = np.zeros(m) if c is None else np.asarray(c, dtype=np.float64)
    pre = _prefixes(m, N)
    R = N - pre.sum(axis=1)  # lattice steps left for the last two coordinates
    base = np.zeros((pre.shape[0], m))
    base[:, : m - 2] = pre / N
    base[:, m - 1] = R / N
    d = np.zeros(m)
    d[m - 2], d[m - 1] = 1.0 / N, -1.0 / N

    # objective f(t) = fa t^2 + 2 fb t + f0, loss(t) = la t^2 + lb t + l0
    fa = d @ G @ d
    fb = base @ (G @ d) - c @ d
    la = d @ H @ d
    lb = 2.0 * (base @ (H @ d) - h @ d)
    l0 = quad_rows(H, h, yy, base) - bound

    t_star = -fb / fa if fa > 0 else np.zeros_like(fb)
    with np.errstate(invalid="ignore", divide="ignore"):
        if la > 0:
            disc = lb * lb - 4.0 * la * l0
            sq = np.sqrt(np.maximum(disc, 0.0))
            tl = (-lb - sq) / (2.0 * la)
            tu = (-lb + sq) / (2.0 * la)
        else:
            tl = np.where(lb > 0, -np.inf, -l0 / np.where(lb == 0, 1.0, lb))
            tu = np.where(lb > 0, -l0 / np.where(lb == 0, 1.0, lb), np.inf)
            tl = np.where(lb == 0, -np.inf, tl)
            tu = np.where(lb == 0, np.inf, tu)
    Rf = R.astype(np.float64)
    lo = np.clip(np.ceil(np.clip(tl, -1.0, Rf + 1.0)), 0.0, Rf)
    hi = np.clip(np.floor(np.clip(tu, -1.0, Rf + 1.0)), 0.0, Rf)
    ts = np.clip(np.nan_to_num(t_star, nan=0.0), -1.0, Rf + 1.0)
    cands = [np.floor(ts), np.ceil(ts), lo - 1, lo, lo + 1, hi - 1, hi, hi + 1,
             np.zeros_like(Rf), Rf]
    # clamp the continuous minimizer into the computed interval as well
    cands += [np.clip(np.floor(ts), lo, hi), np.clip(np.ceil(ts), lo, hi)]

    best_f, best_pt = math.inf, None
    for t in cands:
        t = np.clip(t, 0.0, Rf)
        pts = base + t[:, None] * d[None, :]
        f = quad_rows(G, c, 0.0, pts)
        ok = quad_rows(H, h, yy, pts) <= bound
        if ok.any():
            i = int(np.argmin(np.where(ok, f, np.inf)))
            if f[i] < best_f:
                best_f, best_pt = float(f[i]), pts[i]
    return best_f, best_pt


def grid_min_simplex(Q, c, N):
    """min over the simplex lattice of ``x'Qx - 2c'x`` (no extra constraint)."""
    m = np.shape(Q)[0]
    return line_lattice_min(Q, np.zeros((m, m)), np.zeros(m), 0.0, math.inf, N, c=c)


def grid_projection(v, N):
    """Nearest simplex lattice point to ``v``: minimizes x'x - 2v'x on the lattice."""
    v = np.asarray(v, dtype=np.float64)
    return grid_min_simplex(np.eye(v.shape[0]), v, N)[1]


def soft_threshold(z, t):
    return np.sign(z) * np.maximum(np.abs(z) - t, 0.0)


def lasso_kkt_violation(x, y, beta, lam):
    """Largest violation of the Lasso stationarity conditions.

    For ``(1/n)||y - X b||^2 + lam ||b||_1`` the gradient of the smooth part
    is ``g = 2 X'(X b - y)/n``; optimality needs ``|g_j| <= lam`` where
    ``b_j = 0`` and ``g_j = -lam sign(b_j)`` elsewhere.
    """
    n = x.shape[0]
    g = 2.0 * x.T @ (x @ beta - y) / n
    zero = beta == 0
    v_zero = np.max(np.abs(g[zero]) - lam, initial=-np.inf)
    v_nz = np.max(np.abs(g[~zero] + lam * np.sign(beta[~zero])), initial=0.0)
    return max(v_zero, v_nz, 0.0)

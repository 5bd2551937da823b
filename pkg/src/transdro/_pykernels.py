"""Pure-Python/NumPy implementations of the numerical kernels.

These mirror ``_kernels.pyx`` operation for operation, so both backends
produce the same iterates up to floating-point summation order.
"""

import math

import numpy as np

SIMPLEX = 0
BOX = 1


def project_simplex(v):
    v = np.asarray(v, dtype=np.float64)
    m = v.shape[0]
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    ks = np.arange(1, m + 1)
    cond = u - (css - 1.0) / ks > 0
    rho = np.nonzero(cond)[0][-1]
    theta = (css[rho] - 1.0) / (rho + 1)
    return np.maximum(v - theta, 0.0)


def _project(v, mode, lo, hi):
    if mode == SIMPLEX:
        return project_simplex(v)
    return np.minimum(np.maximum(v, lo), hi)


def _cd_sweep(G, c, beta, q, diag, half_lam, coords):
    max_delta = 0.0
    for j in coords:
        gjj = diag[j]
        if gjj <= 0.0:
            continue
        bj = beta[j]
        rho = c[j] - q[j] + gjj * bj
        if rho > half_lam:
            new = (rho - half_lam) / gjj
        elif rho < -half_lam:
            new = (rho + half_lam) / gjj
        else:
            new = 0.0
        d = new - bj
        if d != 0.0:
            q += G[j] * d
            beta[j] = new
            if abs(d) > max_delta:
                max_delta = abs(d)
    return max_delta


def cd_gram(G, c, beta, lam, tol, max_iter, obj_out):
    """Cyclic coordinate descent for ``b'Gb - 2c'b + lam*|b|_1``.

    Alternates full sweeps with sweeps over the current nonzero set;
    convergence is only declared after a full sweep moves no coefficient
    by ``tol`` or more. Updates ``beta`` in place, writes the objective
    after each sweep to ``obj_out`` and returns the number of sweeps.
    """
    p = G.shape[0]
    q = G @ beta
    half_lam = 0.5 * lam
    diag = np.diag(G).copy()
    full = range(p)
    sweeps = 0
    active = None
    while sweeps < max_iter:
        coords = full if active is None else active
        max_delta = _cd_sweep(G, c, beta, q, diag, half_lam, coords)
        obj_out[sweeps] = beta @ q - 2.0 * (c @ beta) + lam * np.abs(beta).sum()
        sweeps += 1
        if active is None:
            if max_delta < tol:
                break
            active = np.flatnonzero(beta).tolist()
        elif max_delta < tol:
            active = None
    return sweeps


def pg_quad(Q, c, x, step, max_iter, tol, mode, lo, hi):
    """Accelerated projected gradient for ``x'Qx - 2c'x`` with restart.

    ``mode`` selects the feasible set: the probability simplex or the box
    ``[lo, hi]``. ``x`` is updated in place; returns iterations used.
    """
    x[:] = _project(x, mode, lo, hi)
    y = x.copy()
    t = 1.0
    f_x = x @ (Q @ x) - 2.0 * (c @ x)
    n = 0
    for k in range(max_iter):
        n = k + 1
        g = 2.0 * (Q @ y - c)
        x_new = _project(y - step * g, mode, lo, hi)
        f_new = x_new @ (Q @ x_new) - 2.0 * (c @ x_new)
        if f_new > f_x:
            # momentum overshoot: restart from the last accepted point
            t = 1.0
            g = 2.0 * (Q @ x - c)
            x_new = _project(x - step * g, mode, lo, hi)
            f_new = x_new @ (Q @ x_new) - 2.0 * (c @ x_new)
        t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        dx = x_new - x
        y = x_new + ((t - 1.0) / t_new) * dx
        t = t_new
        df = f_x - f_new
        x[:] = x_new
        f_x = f_new
        if np.max(np.abs(dx)) <= tol and abs(df) <= tol * (1.0 + abs(f_new)):
            break
    return n

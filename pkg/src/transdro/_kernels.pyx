# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled numerical kernels; semantics match ``_pykernels``."""

from libc.math cimport fabs, sqrt
from libc.stdlib cimport malloc, free, qsort

import numpy as np

cdef enum:
    SIMPLEX = 0


cdef int _cmp_desc(const void* a, const void* b) noexcept nogil:
    cdef double da = (<const double*>a)[0]
    cdef double db = (<const double*>b)[0]
    if da < db:
        return 1
    if da > db:
        return -1
    return 0


cdef void _proj_simplex(const double* v, double* out, double* work, Py_ssize_t m) noexcept nogil:
    cdef Py_ssize_t j, rho = 0
    cdef double css = 0.0, css_rho = 0.0, theta
    for j in range(m):
        work[j] = v[j]
    qsort(work, m, sizeof(double), _cmp_desc)
    for j in range(m):
        css += work[j]
        if work[j] - (css - 1.0) / (j + 1) > 0:
            rho = j
            css_rho = css
    theta = (css_rho - 1.0) / (rho + 1)
    for j in range(m):
        out[j] = v[j] - theta if v[j] > theta else 0.0


cdef void _project(const double* v, double* out, double* work, Py_ssize_t m, int mode,
                   const double* lo, const double* hi) noexcept nogil:
    cdef Py_ssize_t j
    if mode == SIMPLEX:
        _proj_simplex(v, out, work, m)
    else:
        for j in range(m):
            if v[j] < lo[j]:
                out[j] = lo[j]
            elif v[j] > hi[j]:
                out[j] = hi[j]
            else:
                out[j] = v[j]


cdef double _quad(const double[:, ::1] Q, const double[::1] c, double* x, Py_ssize_t m) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double f = 0.0, s
    for i in range(m):
        s = 0.0
        for j in range(m):
            s += Q[i, j] * x[j]
        f += x[i] * s - 2.0 * c[i] * x[i]
    return f


def project_simplex(v):
    cdef const double[::1] vv = np.ascontiguousarray(v, dtype=np.float64)
    cdef Py_ssize_t m = vv.shape[0]
    out = np.empty(m, dtype=np.float64)
    cdef double[::1] o = out
    cdef double* work = <double*>malloc(m * sizeof(double))
    if work == NULL:
        raise MemoryError()
    with nogil:
        _proj_simplex(&vv[0], &o[0], work, m)
    free(work)
    return out


cdef double _cd_sweep(const double[:, ::1] G, const double[::1] c, double[::1] beta, double* q,
                     double half_lam, const Py_ssize_t* coords, Py_ssize_t n_coords,
                     Py_ssize_t p) noexcept nogil:
    cdef Py_ssize_t i, j, k
    cdef double gjj, bj, rho, new, d, max_delta = 0.0
    for i in range(n_coords):
        j = coords[i]
        gjj = G[j, j]
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
            for k in range(p):
                q[k] += G[j, k] * d
            beta[j] = new
            if fabs(d) > max_delta:
                max_delta = fabs(d)
    return max_delta


def cd_gram(const double[:, ::1] G, const double[::1] c, double[::1] beta, double lam, double tol,
            int max_iter, double[::1] obj_out):
    cdef Py_ssize_t p = G.shape[0], j, k, n_active = 0
    cdef int sweeps = 0, in_active = 0
    cdef double half_lam = 0.5 * lam, max_delta, s, f
    cdef double* q = <double*>malloc(p * sizeof(double))
    cdef Py_ssize_t* idx = <Py_ssize_t*>malloc(2 * p * sizeof(Py_ssize_t) + 1)
    if q == NULL or idx == NULL:
        free(q)
        free(idx)
        raise MemoryError()
    cdef Py_ssize_t* full = idx
    cdef Py_ssize_t* active = idx + p
    with nogil:
        for j in range(p):
            full[j] = j
            s = 0.0
            for k in range(p):
                s += G[j, k] * beta[k]
            q[j] = s
        while sweeps < max_iter:
            if in_active:
                max_delta = _cd_sweep(G, c, beta, q, half_lam, active, n_active, p)
            else:
                max_delta = _cd_sweep(G, c, beta, q, half_lam, full, p, p)
            f = 0.0
            for j in range(p):
                f += beta[j] * q[j] - 2.0 * c[j] * beta[j] + lam * fabs(beta[j])
            obj_out[sweeps] = f
            sweeps += 1
            if not in_active:
                if max_delta < tol:
                    break
                n_active = 0
                for j in range(p):
                    if beta[j] != 0.0:
                        active[n_active] = j
                        n_active += 1
                in_active = 1
            elif max_delta < tol:
                in_active = 0
    free(q)
    free(idx)
    return sweeps


def pg_quad(const double[:, ::1] Q, const double[::1] c, double[::1] x, double step, int max_iter,
            double tol, int mode, const double[::1] lo, const double[::1] hi):
    cdef Py_ssize_t m = Q.shape[0], i, j
    cdef int k, n = 0
    cdef double t = 1.0, t_new, f_x, f_new, s, df, maxdx, beta_m
    cdef double* buf = <double*>malloc(6 * m * sizeof(double))
    if buf == NULL:
        raise MemoryError()
    cdef double* y = buf
    cdef double* x_new = buf + 2 * m
    cdef double* tmp = buf + 3 * m
    cdef double* work = buf + 4 * m
    cdef double* dx = buf + 5 * m
    with nogil:
        for i in range(m):
            tmp[i] = x[i]
        _project(tmp, &x[0], work, m, mode, &lo[0], &hi[0])
        for i in range(m):
            y[i] = x[i]
        f_x = _quad(Q, c, &x[0], m)
        for k in range(max_iter):
            n = k + 1
            for i in range(m):
                s = 0.0
                for j in range(m):
                    s += Q[i, j] * y[j]
                tmp[i] = y[i] - step * 2.0 * (s - c[i])
            _project(tmp, x_new, work, m, mode, &lo[0], &hi[0])
            f_new = _quad(Q, c, x_new, m)
            if f_new > f_x:
                t = 1.0
                for i in range(m):
                    s = 0.0
                    for j in range(m):
                        s += Q[i, j] * x[j]
                    tmp[i] = x[i] - step * 2.0 * (s - c[i])
                _project(tmp, x_new, work, m, mode, &lo[0], &hi[0])
                f_new = _quad(Q, c, x_new, m)
            t_new = 0.5 * (1.0 + sqrt(1.0 + 4.0 * t * t))
            beta_m = (t - 1.0) / t_new
            maxdx = 0.0
            for i in range(m):
                dx[i] = x_new[i] - x[i]
                if fabs(dx[i]) > maxdx:
                    maxdx = fabs(dx[i])
                y[i] = x_new[i] + beta_m * dx[i]
                x[i] = x_new[i]
            t = t_new
            df = f_x - f_new
            f_x = f_new
            if maxdx <= tol and fabs(df) <= tol * (1.0 + fabs(f_new)):
                break
    free(buf)
    return n

"""Time the compiled kernels against the NumPy fallback.

Usage: python3 benchmarks/bench_kernels.py [--repeat N]

Each kernel runs on the same inputs under both backends; the table shows
the best wall time per call and the speedup. Results are also checked for
agreement so a fast but wrong build is caught here.
"""

import argparse
import timeit

import numpy as np

from transdro._backend import get_kernels
from transdro.qp import _SIMPLEX, step_size


def lasso_problem(rng, n, p):
    x = rng.normal(size=(n, p))
    beta = np.zeros(p)
    beta[:10] = rng.normal(size=10)
    y = x @ beta + rng.normal(size=n)
    G = np.ascontiguousarray(x.T @ x / n)
    c = np.ascontiguousarray(x.T @ y / n)
    lam = 0.1 * np.max(np.abs(2 * c))
    return G, c, lam


def qp_problem(rng, m):
    A = rng.normal(size=(m + 3, m))
    return np.ascontiguousarray(A.T @ A), rng.normal(size=m)


def cases(rng):
    v = rng.normal(size=200)
    yield "project_simplex m=200", lambda k: k.project_simplex(v)

    for p in (35, 200):
        G, c, lam = lasso_problem(rng, 300, p)

        def run_cd(k, G=G, c=c, lam=lam):
            beta = np.zeros(G.shape[0])
            obj = np.empty(10000)
            k.cd_gram(G, c, beta, lam, 1e-10, 10000, obj)
            return beta
        yield f"cd_gram p={p}", run_cd

    for m in (5, 11):
        Q, c = qp_problem(rng, m)
        step = step_size(Q)

        def run_pg(k, Q=Q, c=c, step=step):
            x = np.full(Q.shape[0], 1.0 / Q.shape[0])
            k.pg_quad(Q, c, x, step, 20000, 1e-10, _SIMPLEX, np.zeros(Q.shape[0]), np.ones(Q.shape[0]))
            return x
        yield f"pg_quad simplex m={m}", run_pg


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    py, cy = get_kernels("python"), get_kernels("cython")
    rng = np.random.default_rng(0)
    print(f"{'kernel':24s} {'python (ms)':>12s} {'cython (ms)':>12s} {'speedup':>8s} {'max diff':>10s}")
    for name, fn in cases(rng):
        diff = float(np.max(np.abs(np.asarray(fn(py)) - np.asarray(fn(cy)))))
        number = 3
        t_py = min(timeit.repeat(lambda: fn(py), number=number, repeat=args.repeat)) / number
        t_cy = min(timeit.repeat(lambda: fn(cy), number=number, repeat=args.repeat)) / number
        print(f"{name:24s} {1e3 * t_py:12.3f} {1e3 * t_cy:12.3f} {t_py / t_cy:8.1f} {diff:10.2e}")


if __name__ == "__main__":
    main()

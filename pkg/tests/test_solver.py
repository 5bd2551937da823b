import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from instances import random_instance, toy_sites
from oracles import grid_min_simplex, line_lattice_min
from transdro.constraint import FeasibleSet, build_feasible_set, loss_at
from transdro.core import CoefficientMatrix, make_split
from transdro.errors import BisectionBracketExhausted, DimensionMismatch
from transdro.pipeline import fit_source_models
from transdro.solver import (GammaMatrix, SolverConfig, gamma_matrix, solve_or_fallback,
                             solve_weights)

seeds = st.integers(0, 2**31 - 1)


def test_gamma_zero_when_columns_equal_baseline(rng):
    b = rng.normal(size=4)
    B = CoefficientMatrix(np.column_stack([b, b, b]))
    assert np.all(gamma_matrix(B, b, rng.normal(size=(10, 4))).g == 0)


def test_gamma_identity_second_moment(rng):
    B = CoefficientMatrix(rng.normal(size=(3, 4)))
    init = rng.normal(size=3)
    x = np.sqrt(3) * np.eye(3)  # x'x / rows = I
    D = B.columns - init[:, None]
    assert np.allclose(gamma_matrix(B, init, x).g, D.T @ D, atol=1e-12)


def test_gamma_dimension_checks(rng):
    B = CoefficientMatrix(rng.normal(size=(3, 2)))
    with pytest.raises(DimensionMismatch):
        gamma_matrix(B, np.zeros(4), rng.normal(size=(5, 3)))
    with pytest.raises(DimensionMismatch):
        GammaMatrix(np.ones((2, 3)))


@given(seeds)
def test_gamma_is_symmetric_psd(seed):
    _, G = random_instance(np.random.default_rng(seed), m=4)
    assert np.allclose(G.g, G.g.T, atol=1e-10)
    assert np.linalg.eigvalsh(G.g).min() >= -1e-8 * max(1.0, np.abs(G.g).max())


def test_solver_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(pg_tol=0)


@pytest.mark.parametrize("seed", range(10))
def test_unconstrained_zero_baseline_matches_grid(seed):
    rng = np.random.default_rng(seed)
    fs, _ = random_instance(rng, m=4, tau=math.inf)
    G = gamma_matrix(fs.b0_hat, np.zeros(fs.b0_hat.p), rng.normal(size=(30, fs.b0_hat.p)))
    w, diag = solve_weights(G, fs)
    best, _ = grid_min_simplex(G.g, np.zeros(4), 1000)
    assert diag.mu == 0.0 and not diag.constraint_active
    assert w.w @ G.g @ w.w <= best + 1e-5


def _closed_form_two(G, fs):
    """Minimize over g = (t, 1-t), t in [0, 1], with the loss constraint, analytically."""
    d = np.array([1.0, -1.0])
    e = np.array([0.0, 1.0])
    # objective a t^2 + b t + c, loss la t^2 + lb t + lc
    a, b = d @ G @ d, 2 * d @ G @ e
    la, lb = d @ fs.H @ d, 2 * (d @ fs.H @ e - fs.h @ d)
    lc = fs.quad_loss(e) - fs.bound
    lo, hi = 0.0, 1.0
    if la > 0:
        disc = lb * lb - 4 * la * lc
        if disc >= 0:
            r = np.sqrt(disc)
            lo, hi = max(lo, (-lb - r) / (2 * la)), min(hi, (-lb + r) / (2 * la))
    t = -b / (2 * a) if a > 0 else 0.0
    t = min(max(t, lo), hi)
    return np.array([t, 1 - t])


@pytest.mark.parametrize("seed", range(20))
def test_two_weight_closed_form(seed):
    rng = np.random.default_rng(100 + seed)
    fs, G = random_instance(rng, m=2)
    w, _ = solve_weights(G, fs)
    ref = _closed_form_two(G.g, fs)
    assert loss_at(fs, w) <= fs.bound
    # the bisection may stop up to mu_bisect_tol * bound inside the boundary
    assert w.w @ G.g @ w.w <= ref @ G.g @ ref + 1e-5
    assert np.allclose(w.w, ref, atol=1e-3) or G.tangent_min_eigenvalue() < 1e-8


@given(seeds)
@settings(max_examples=20)
def test_objective_monotone_in_tau(seed):
    rng = np.random.default_rng(seed)
    fs, G = random_instance(rng, m=4, tau=0.0)
    objs = []
    for tau in (0.0, 0.01, 0.05, 0.2, 1.0, math.inf):
        w, _ = solve_weights(G, fs.with_tau(tau))
        objs.append(w.w @ G.g @ w.w)
    slack = 1e-7 * max(1.0, objs[0])
    assert all(b <= a + slack for a, b in zip(objs, objs[1:]))


@given(seeds)
@settings(max_examples=25)
def test_feasibility_contract(seed):
    fs, G = random_instance(np.random.default_rng(seed), m=4)
    w, diag = solve_or_fallback(G, fs)
    assert np.all(w.w >= 0) and abs(w.w.sum() - 1) <= 1e-12
    assert loss_at(fs, w) <= fs.bound * (1 + SolverConfig().mu_bisect_tol)
    assert diag.constraint_slack >= -1e-12 * max(1.0, fs.bound)


@pytest.mark.parametrize("seed", range(15))
def test_kkt_when_constraint_active(seed):
    rng = np.random.default_rng(200 + seed)
    fs, G = random_instance(rng, m=4, tau=0.0)
    w, diag = solve_weights(G, fs)
    if not diag.constraint_active:
        pytest.skip("constraint inactive for this draw")
    x = w.w
    grad = 2 * G.g @ x + diag.mu * (2 * fs.H @ x - 2 * fs.h)
    scale = max(1.0, np.abs(grad).max())
    on = x > 1e-9
    tangent = grad[on] - grad[on].mean()
    assert np.linalg.norm(tangent) <= 1e-5 * scale
    assert np.all(grad[~on] >= grad[on].mean() - 1e-5 * scale)


def _hull_instance(rng, m=4, p=6, n2=50):
    fs, _ = random_instance(rng, m=m, p=p, n2=n2, tau=0.1)
    pool = rng.normal(size=(80, p))
    return fs, pool


@pytest.mark.parametrize("seed", range(10))
def test_baseline_inside_hull_is_reproduced(seed):
    rng = np.random.default_rng(300 + seed)
    fs, pool = _hull_instance(rng)
    # a feasible mixture near the witness: pull a random point toward it
    g_in = 0.8 * fs.witness() + 0.2 * rng.dirichlet(np.ones(4))
    if not fs.is_feasible(g_in):
        g_in = fs.witness()
    init = fs.b0_hat.columns @ g_in
    w, _ = solve_weights(gamma_matrix(fs.b0_hat, init, pool), fs, SolverConfig(pg_tol=1e-12))
    assert np.linalg.norm(fs.b0_hat @ w - init) <= 1e-4


def test_nonunique_flag(rng):
    b = rng.normal(size=(5, 2))
    B = CoefficientMatrix(np.column_stack([b, b[:, :1]]), augmented=True)
    x = rng.normal(size=(30, 5))
    fs = FeasibleSet.from_parts(B, x, x @ b[:, 0], math.inf, 0.0, 0.0)
    _, diag = solve_weights(gamma_matrix(B, np.zeros(5), rng.normal(size=(40, 5))), fs)
    assert diag.nonunique


def test_exhausted_bracket_raises_and_falls_back(rng):
    fs, G = random_instance(rng, m=3, tau=0.0)
    # an unattainable bound: half of the smallest achievable loss
    w_min, _ = grid_min_simplex(fs.H, fs.h, 200)
    bad = FeasibleSet.from_parts(fs.b0_hat, fs.x_s2, fs.y_s2, 0.0, 0.5 * (w_min + fs.yy),
                                 fs.sigma2_source, fs.gamma_s1)
    cfg = SolverConfig(mu_max=1e6)
    with pytest.raises(BisectionBracketExhausted):
        solve_weights(G, bad, cfg)
    w, diag = solve_or_fallback(G, bad, cfg)
    assert diag.fallback == "witness"
    assert np.array_equal(w.w, bad.witness())


def test_weight_count_checked(rng):
    fs, _ = random_instance(rng, m=3)
    with pytest.raises(DimensionMismatch):
        solve_weights(GammaMatrix(np.eye(4)), fs)


def _noiseless_hull_problem(rng, noise=0.0):
    betas = [np.r_[1.0, 0, 0, 0.5], np.r_[0, 1.0, 0, 0], np.r_[0, 0, 1.0, -1.0]]
    beta_star = 0.5 * betas[0] + 0.3 * betas[1] + 0.2 * betas[2]
    target, sources = toy_sites(rng, p=4, source_betas=betas, target_beta=beta_star, n_target=200,
                                n_source=2000, noise=noise)
    return target, fit_source_models(sources), beta_star


def test_small_tau_pulls_toward_target_fit(rng):
    target, b_hat, _ = _noiseless_hull_problem(rng)
    plan = make_split(target, 0)
    fs0 = build_feasible_set(target, plan, b_hat, 0.0)
    G = gamma_matrix(fs0.b0_hat, np.zeros(4), target.x)
    beta_s1 = fs0.beta_s1
    w0, _ = solve_or_fallback(G, fs0)
    winf, _ = solve_weights(G, fs0.with_tau(math.inf))
    d0 = np.linalg.norm(fs0.b0_hat @ w0 - beta_s1)
    dinf = np.linalg.norm(fs0.b0_hat @ winf - beta_s1)
    assert d0 < dinf


def test_true_baseline_near_best_feasible(rng):
    target, b_hat, beta_star = _noiseless_hull_problem(rng, noise=0.5)
    fs = build_feasible_set(target, make_split(target, 0), b_hat, 1.0 / target.n_obs)
    w, _ = solve_weights(gamma_matrix(fs.b0_hat, beta_star, target.x), fs)
    err = np.linalg.norm(fs.b0_hat @ w - beta_star)
    B = fs.b0_hat.columns
    best, _ = line_lattice_min(B.T @ B, fs.H, fs.h, fs.yy, fs.bound, 1000, c=B.T @ beta_star)
    best_err = math.sqrt(max(best + beta_star @ beta_star, 0.0))
    assert err <= 1.1 * best_err + 1e-6

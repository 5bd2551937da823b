import math

import numpy as np
import pytest

from instances import toy_sites
from oracles import grid_min_simplex
from transdro.baselines import make_baseline
from transdro.constraint import loss_at
from transdro.core import CoefficientMatrix, Dataset, make_split
from transdro.errors import DimensionMismatch
from transdro.pipeline import fit_maximin, fit_source_models, fit_transdro, target_pool
from transdro.solver import SolverConfig


def test_single_identical_source_predicts_perfectly(rng):
    beta = np.r_[1.0, -0.5, 0.0, 0.3, 0.0]
    target, sources = toy_sites(rng, source_betas=[beta], target_beta=beta, n_target=60)
    report = fit_transdro(target, sources)
    x_new = rng.normal(size=(500, 5))
    # noiseless Lasso paths stop at in-sample R^2 = 0.999, so compare to that scale
    assert np.mean((x_new @ (report.beta - beta)) ** 2) < 2e-3 * (beta @ beta)


@pytest.mark.parametrize("kind", ["zero", "target_lasso", "convex_combo", "bounded_combo"])
def test_tau_zero_constraint_contract(rng, kind):
    target, sources = toy_sites(rng, noise=0.5, n_target=80,
                                target_beta=np.r_[0.5, 0.5, 0.0, 0.0, -0.5])
    report = fit_transdro(target, sources, kind=kind, tau=0.0, seed=3)
    fs_bound = min(report.diagnostics["sigma2_q"], report.diagnostics["sigma2_source"])
    assert report.diagnostics["loss"] <= fs_bound * (1 + SolverConfig().mu_bisect_tol)
    assert report.b0_hat.augmented and report.gamma.w.shape == (3,)
    assert np.allclose(report.beta, report.b0_hat.columns @ report.gamma.w)


@pytest.mark.parametrize("seed", range(4))
def test_maximin_matches_grid(seed):
    rng = np.random.default_rng(seed)
    betas = [rng.normal(size=4) for _ in range(3)]
    target, sources = toy_sites(rng, p=4, source_betas=betas, noise=0.3)
    b_hat = fit_source_models(sources)
    report = fit_maximin(target.x, b_hat)
    B = b_hat.columns
    G = B.T @ (target.x.T @ target.x / target.n_obs) @ B
    best, _ = grid_min_simplex(G, np.zeros(3), 1000)
    w = report.gamma.w
    assert w @ G @ w <= best + 1e-5
    assert report.tau == math.inf and report.diagnostics["baseline"] == "zero"


def test_maximin_ignores_target_labels(rng):
    target, sources = toy_sites(rng, noise=0.5)
    b_hat = fit_source_models(sources)
    shuffled = Dataset(target.x, rng.permutation(target.y), 0)
    a = fit_maximin(target_pool(target), b_hat)
    b = fit_maximin(target_pool(shuffled), b_hat)
    assert np.array_equal(a.gamma.w, b.gamma.w)


def test_unlabeled_pool_is_used(rng):
    target, sources = toy_sites(rng, noise=0.5)
    pool = rng.normal(size=(300, 5))
    assert target_pool(target, pool).shape == (360, 5)
    assert target_pool(target, np.zeros((0, 5))) is target.x
    a = fit_transdro(target, sources, x_unlabeled=pool)
    b = fit_transdro(target, sources)
    assert a.gamma.w.shape == b.gamma.w.shape


def test_prebuilt_pieces_reproduce_fit(rng):
    target, sources = toy_sites(rng, noise=0.5)
    b_hat = fit_source_models(sources)
    plan = make_split(target, 7)
    direct = fit_transdro(target, sources, seed=7)
    base = make_baseline("convex", target, plan, b_hat)
    reused = fit_transdro(target, b_hat=b_hat, plan=plan, baseline=base)
    assert np.allclose(direct.beta, reused.beta, atol=1e-12)
    with pytest.raises(ValueError):
        fit_transdro(target, b_hat=b_hat, plan=plan, baseline=base, kind="bounded")


def test_report_diagnostics(rng):
    target, sources = toy_sites(rng, noise=0.5)
    r = fit_transdro(target, sources, tau=0.2)
    d = r.diagnostics
    assert r.tau == 0.2 and d["baseline"] == "convex_combo"
    assert d["n_s1"] + d["n_s2"] == target.n_obs
    assert r.sigma2_hat == min(d["sigma2_q"], d["sigma2_source"])
    assert len(d["baseline_weights"]) == 3


def test_default_tau_is_inverse_n(rng):
    target, sources = toy_sites(rng, noise=0.5, n_target=50)
    assert fit_transdro(target, sources).tau == pytest.approx(1 / 50)


def test_input_errors(rng):
    target, sources = toy_sites(rng)
    with pytest.raises(DimensionMismatch):
        fit_transdro(target, b_hat=CoefficientMatrix(np.ones((4, 2))))
    with pytest.raises(DimensionMismatch):
        fit_transdro(target, [Dataset(rng.normal(size=(30, 4)), rng.normal(size=30), 1)])
    with pytest.raises(ValueError):
        fit_transdro(target, sources, tau=-1.0)
    with pytest.raises(ValueError):
        fit_source_models([])

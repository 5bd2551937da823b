import csv

import numpy as np
import pytest

from instances import toy_sites
from oracles import grid_min_simplex
from transdro.core import CoefficientMatrix, Dataset
from transdro.errors import DimensionMismatch
from transdro.evaluation import (DEFAULT_METHODS, MetricTable, comb_source, evaluate, run_benchmark,
                                 run_replication)
from transdro.io import write_coefficients_csv
from transdro.pipeline import fit_source_models
from transdro.simulation import GroundTruth, ScenarioSpec, ar_matrix, generate, replication_rng


def _truth(beta, p):
    return GroundTruth(beta, CoefficientMatrix(beta[:, None]), beta, 0.0, ar_matrix(p, 0.7))


def test_metrics_vanish_at_truth(rng):
    beta = rng.normal(size=4)
    x = rng.normal(size=(30, 4))
    row = evaluate(beta, Dataset(x, x @ beta), _truth(beta, 4))
    assert row == {"pred_mse": 0.0, "excess_risk": 0.0, "coef_l2": 0.0}
    assert set(evaluate(beta, Dataset(x, x @ beta))) == {"pred_mse"}
    with pytest.raises(DimensionMismatch):
        evaluate(np.zeros(3), Dataset(x, x @ beta))


def test_metrics_monte_carlo():
    spec = ScenarioSpec.for_setting("1.1", N_l=10)
    at_truth, at_zero, risk = [], [], []
    for rep in range(50):
        scn = generate(spec, replication_rng(5, rep))
        m = evaluate(scn.truth.beta_star_valid, scn.validation, scn.truth)
        at_truth.append(m["pred_mse"])
        risk.append(m["excess_risk"])
        at_zero.append(evaluate(np.zeros(spec.p), scn.validation, scn.truth)["pred_mse"])
    b = scn.truth.beta_star
    assert abs(np.mean(at_truth) - 1.0) <= 0.1
    assert np.max(risk) == 0.0
    plug_in = 1.0 + b @ scn.truth.sigma_q @ b
    assert abs(np.mean(at_zero) - plug_in) <= 0.1 * plug_in


def test_comb_source_single_source(rng):
    target, sources = toy_sites(rng, source_betas=[np.ones(5)], noise=1.0)
    b_hat = fit_source_models(sources)
    beta, w = comb_source(target, b_hat)
    assert w.w.tolist() == [1.0]
    assert np.array_equal(beta, b_hat.columns[:, 0])


def test_comb_source_recovers_generating_source(rng):
    betas = [np.r_[1.0, 0, 0, 0, 0], np.r_[0, 1.0, 1.0, 0, 0], np.r_[0, 0, 0, -1.0, 1.0]]
    target, sources = toy_sites(rng, source_betas=betas, target_beta=betas[1])
    _, w = comb_source(target, fit_source_models(sources))
    assert np.allclose(w.w, [0, 1, 0], atol=1e-3)


@pytest.mark.parametrize("seed", range(5))
def test_comb_source_matches_grid(seed):
    rng = np.random.default_rng(seed)
    betas = [rng.normal(size=5) for _ in range(3)]
    target, sources = toy_sites(rng, source_betas=betas, target_beta=rng.normal(size=5), noise=0.5)
    b_hat = fit_source_models(sources)
    _, w = comb_source(target, b_hat)
    M = target.x @ b_hat.columns
    Q, c = M.T @ M / target.n_obs, M.T @ target.y / target.n_obs
    best, _ = grid_min_simplex(Q, c, 1000)
    assert w.w @ Q @ w.w - 2 * c @ w.w <= best + 1e-5


def _small_spec():
    return ScenarioSpec.for_setting("1.1", n=80, N_l=300)


def test_benchmark_is_deterministic():
    a = run_benchmark(_small_spec(), reps=2, seed=3, threads=2)
    b = run_benchmark(_small_spec(), reps=2, seed=3, threads=1)
    assert a.rows == b.rows
    assert {k: [(r, v.tolist()) for r, v in ws] for k, ws in a.weights.items()} == \
           {k: [(r, v.tolist()) for r, v in ws] for k, ws in b.weights.items()}


def test_table_summary_recomputes(tmp_path):
    t = run_benchmark(_small_spec(), methods=["target_lasso", "comb_source"], reps=3, seed=1)
    for row in t.summary():
        v = np.array([r["value"] for r in t.rows
                      if r["method"] == row["method"] and r["metric"] == row["metric"]])
        assert row["mean"] == v.mean() and row["sd"] == np.std(v, ddof=1) and row["reps"] == 3
    paths = t.write(tmp_path)
    with open(paths["summary"]) as fh:
        rows = list(csv.DictReader(fh))
    assert rows[0].keys() == {"method", "metric", "mean", "sd", "reps"}
    first = t.summary()[0]
    assert float(rows[0]["mean"]) == first["mean"]
    with open(paths["long"]) as fh:
        long_rows = list(csv.DictReader(fh))
    assert [float(r["value"]) for r in long_rows] == [r["value"] for r in t.rows]


def test_weights_and_weight_metrics():
    t = run_benchmark(_small_spec(), methods=["transdro_convex", "target_lasso", "comb_source"], reps=2,
                      seed=0)
    w = t.mean_weights("transdro_convex")
    assert w.shape == (5,) and abs(w.sum() - 1) < 1e-9
    assert np.all(t.values("target_lasso", "weight_target") == 1.0)
    assert np.all(t.values("comb_source", "weight_target") == 0.0)
    assert set(DEFAULT_METHODS) <= {"transdro_zero", "transdro_convex", "transdro_bounded",
                                     "target_lasso", "comb_source"}


def test_external_slot_and_error_rows(tmp_path):
    spec = _small_spec()
    ext = tmp_path / "ext.csv"
    write_coefficients_csv(ext, np.zeros((1, spec.p)))
    t = run_benchmark(spec, methods=[f"external:{ext}", f"external:{tmp_path / 'missing.csv'}"],
                      reps=2, seed=0)
    assert len(t.values(f"external:{ext}", "pred_mse")) == 2
    assert len(t.errors) == 2 and all("missing.csv" in e["error"] for e in t.errors)
    with pytest.raises(ValueError):
        run_benchmark(spec, methods=["nope"], reps=1)


def test_maximin_ignores_target_labels():
    spec = _small_spec()
    _, res, ctx = run_replication(spec, ["maximin"], 0, 0)
    scn = ctx.scn
    shuffled = Dataset(scn.target.x, np.random.default_rng(0).permutation(scn.target.y), 0)
    from dataclasses import replace
    from transdro.evaluation import _Replication

    ctx2 = _Replication(replace(scn, target=shuffled), ctx.lasso_cfg, ctx.solver_cfg, ctx.split_seed,
                        ctx.tau)
    ctx2._cache["b_hat"] = ctx.b_hat
    assert np.array_equal(res[0][2], ctx2.run("maximin", 0)[1])

"""Comparator estimators, validation metrics and the replication harness."""

from __future__ import annotations

import csv
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .baselines import BaselineKind, make_baseline
from .constraint import build_feasible_set
from .core import CoefficientMatrix, Dataset, SimplexWeight, make_split
from .errors import DimensionMismatch
from .lasso import LassoConfig, lasso_fit
from .pipeline import fit_maximin, fit_source_models, fit_transdro, target_pool
from .qp import least_squares_weights
from .simulation import GroundTruth, ScenarioSpec, generate, replication_rng
from .solver import SolverConfig

log = logging.getLogger(__name__)

METRICS = ("pred_mse", "excess_risk", "coef_l2")
METHODS = (
    "transdro_zero",
    "transdro_convex",
    "transdro_bounded",
    "transdro_target",
    "target_lasso",
    "comb_source",
    "maximin",
    "baseline_convex",
    "baseline_bounded",
)
DEFAULT_METHODS = ("transdro_zero", "transdro_convex", "transdro_bounded", "target_lasso", "comb_source")


def comb_source(target: Dataset, b_hat: CoefficientMatrix):
    """Best convex combination of the source fits on all labeled target rows."""
    B = b_hat.sources().columns
    w, _ = least_squares_weights(target.x @ B, target.y, "convex")
    return B @ w, SimplexWeight(w, "convex")


def evaluate(beta_hat, validation: Dataset, truth: Optional[GroundTruth] = None) -> dict:
    """Validation prediction MSE, plus excess risk and l2 error against the truth."""
    beta_hat = np.asarray(beta_hat, dtype=np.float64)
    if beta_hat.shape != (validation.p,):
        raise DimensionMismatch(f"coefficient length {beta_hat.shape} != validation p {validation.p}")
    r = validation.y - validation.x @ beta_hat
    row = {"pred_mse": float(r @ r / r.shape[0])}
    if truth is not None:
        d = beta_hat - truth.beta_star_valid
        xd = validation.x @ d
        row["excess_risk"] = float(xd @ xd / xd.shape[0])
        row["coef_l2"] = float(np.linalg.norm(d))
    return row


def load_external(path) -> np.ndarray:
    """Coefficient rows from a CSV with header ``x1..xp`` (one row per replication)."""
    from .io import read_matrix_csv

    return read_matrix_csv(path, prefix="x")


@dataclass
class MetricTable:
    """Per-replication records and their per-method summaries."""

    rows: list = field(default_factory=list)  # dicts: rep, method, metric, value
    weights: dict = field(default_factory=dict)  # method -> list of (rep, vector)
    errors: list = field(default_factory=list)  # dicts: rep, method, error

    def add(self, rep, method, metrics: dict):
        for k, v in metrics.items():
            self.rows.append({"rep": rep, "method": method, "metric": k, "value": float(v)})

    def values(self, method, metric) -> np.ndarray:
        return np.array([r["value"] for r in self.rows if r["method"] == method and r["metric"] == metric])

    def by_rep(self, method, metric) -> dict:
        return {r["rep"]: r["value"] for r in self.rows if r["method"] == method and r["metric"] == metric}

    def summary(self) -> list:
        keys = []
        for r in self.rows:
            k = (r["method"], r["metric"])
            if k not in keys:
                keys.append(k)
        out = []
        for method, metric in keys:
            v = self.values(method, metric)
            sd = float(np.std(v, ddof=1)) if v.size > 1 else math.nan
            out.append({"method": method, "metric": metric, "mean": float(v.mean()), "sd": sd,
                        "reps": int(v.size)})
        return out

    def mean(self, method, metric) -> float:
        return float(self.values(method, metric).mean())

    def mean_weights(self, method) -> np.ndarray:
        return np.mean([w for _, w in self.weights.get(method, [])], axis=0)

    def write(self, out_dir) -> dict:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        paths = {k: out_dir / f"{k}.csv" for k in ("summary", "long", "weights", "errors")}
        with open(paths["summary"], "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["method", "metric", "mean", "sd", "reps"])
            for r in self.summary():
                w.writerow([r["method"], r["metric"], _fmt(r["mean"]), _fmt(r["sd"]), r["reps"]])
        with open(paths["long"], "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["rep", "method", "metric", "value"])
            for r in self.rows:
                w.writerow([r["rep"], r["method"], r["metric"], _fmt(r["value"])])
        with open(paths["weights"], "w", newline="") as fh:
            w = csv.writer(fh)
            width = max((len(v) for ws in self.weights.values() for _, v in ws), default=0)
            w.writerow(["rep", "method"] + [f"w{j}" for j in range(width)])
            for method, ws in self.weights.items():
                for rep, vec in ws:
                    w.writerow([rep, method] + [_fmt(x) for x in vec])
        with open(paths["errors"], "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["rep", "method", "error"])
            for r in self.errors:
                w.writerow([r["rep"], r["method"], r["error"]])
        return paths


def _fmt(x) -> str:
    return "nan" if x is None or (isinstance(x, float) and math.isnan(x)) else f"{x:.17g}"


class _Replication:
    """Lazily shared pieces of one replication (source fits, split, feasible set)."""

    def __init__(self, scn, lasso_cfg, solver_cfg, split_seed, tau):
        self.scn = scn
        self.lasso_cfg = lasso_cfg
        self.solver_cfg = solver_cfg
        self.split_seed = split_seed
        self.tau = tau
        self._cache = {}

    def _get(self, key, fn):
        if key not in self._cache:
            self._cache[key] = fn()
        return self._cache[key]

    @property
    def b_hat(self):
        return self._get("b_hat", lambda: fit_source_models(self.scn.sources, self.lasso_cfg))

    @property
    def plan(self):
        return self._get("plan", lambda: make_split(self.scn.target, self.split_seed))

    @property
    def fs(self):
        return self._get("fs", lambda: build_feasible_set(self.scn.target, self.plan, self.b_hat,
                                                          self.tau, self.lasso_cfg,
                                                          beta_full=self.target_lasso))

    @property
    def target_lasso(self):
        return self._get("target_lasso", lambda: lasso_fit(self.scn.target, self.lasso_cfg).coef)

    def baseline(self, kind):
        kind = BaselineKind.parse(kind)
        return self._get(("baseline", kind), lambda: make_baseline(
            kind, self.scn.target, self.plan, self.b_hat, self.lasso_cfg,
            beta_s1=self.fs.beta_s1))

    def transdro(self, kind, tau=None):
        tau = self.tau if tau is None else tau
        kind = BaselineKind.parse(kind)
        return self._get(("transdro", kind, tau), lambda: fit_transdro(
            self.scn.target, kind=kind, tau=tau, lasso_cfg=self.lasso_cfg,
            solver_cfg=self.solver_cfg, x_unlabeled=self.scn.x_unlabeled, b_hat=self.b_hat,
            plan=self.plan, feasible_set=self.fs, baseline=self.baseline(kind)))

    def run(self, method: str, rep: int):
        """Return ``(beta, weights over (target, sources) or None)``."""
        L = self.scn.spec.L
        if method.startswith("transdro_"):
            kind = {"zero": "zero", "convex": "convex_combo", "bounded": "bounded_combo",
                    "target": "target_lasso"}[method.split("_", 1)[1]]
            rep_ = self.transdro(kind)
            return rep_.beta, rep_.gamma.w
        if method == "target_lasso":
            return self.target_lasso, np.eye(L + 1)[0]
        if method == "comb_source":
            beta, w = comb_source(self.scn.target, self.b_hat)
            return beta, np.concatenate([[0.0], w.w])
        if method == "maximin":
            fit = fit_maximin(target_pool(self.scn.target, self.scn.x_unlabeled), self.b_hat,
                              self.solver_cfg)
            return fit.beta, np.concatenate([[0.0], fit.gamma.w])
        if method in ("baseline_convex", "baseline_bounded"):
            base = self.baseline(method.split("_", 1)[1])
            return base.beta, base.weights
        if method.startswith("external:"):
            coefs = load_external(method.split(":", 1)[1])
            return coefs[0] if coefs.shape[0] == 1 else coefs[rep], None
        raise ValueError(f"unknown method {method!r}")


def _weight_metrics(spec: ScenarioSpec, w) -> dict:
    out = {"weight_target": float(w[0])}
    if spec.setting_id in ("4.1", "4.2") and spec.L_adv > 0:
        out["weight_adv_mean"] = float(np.mean(w[1:spec.L_adv + 1]))
    return out


def run_replication(spec: ScenarioSpec, methods: Sequence[str], rep: int, seed: int,
                    lasso_cfg: LassoConfig = LassoConfig(), solver_cfg: SolverConfig = SolverConfig()):
    rng = replication_rng(seed, rep)
    scn = generate(spec, rng)
    split_seed = int(rng.integers(2**31))
    cfg = lasso_cfg if lasso_cfg.cv_seed is None else _with_cv_seed(lasso_cfg, int(rng.integers(2**31)))
    ctx = _Replication(scn, cfg, solver_cfg, split_seed, spec.resolved_tau())
    results = []
    for method in methods:
        try:
            beta, w = ctx.run(method, rep)
            metrics = evaluate(beta, scn.validation, scn.truth)
            if w is not None:
                metrics.update(_weight_metrics(spec, w))
            results.append((method, metrics, w, None))
        except Exception as exc:  # a failing method must not abort the others
            log.warning("rep %d method %s failed: %s", rep, method, exc)
            results.append((method, None, None, f"{type(exc).__name__}: {exc}"))
    return rep, results, ctx


def _with_cv_seed(cfg: LassoConfig, cv_seed: int) -> LassoConfig:
    from dataclasses import replace

    return replace(cfg, cv_seed=cv_seed)


def default_threads() -> int:
    env = os.environ.get("TRANSDRO_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def run_benchmark(spec: ScenarioSpec, methods: Sequence[str] = DEFAULT_METHODS, reps: int = 50,
                  seed: int = 0, lasso_cfg: LassoConfig = LassoConfig(),
                  solver_cfg: SolverConfig = SolverConfig(), threads: Optional[int] = None) -> MetricTable:
    """Fit every method on ``reps`` seeded replications and collect metrics."""
    for m in methods:
        if m not in METHODS and not m.startswith("external:"):
            raise ValueError(f"unknown method {m!r}")
    threads = default_threads() if threads is None else max(1, int(threads))

    def one(rep):
        return run_replication(spec, methods, rep, seed, lasso_cfg, solver_cfg)[:2]

    if threads == 1 or reps == 1:
        outputs = [one(r) for r in range(reps)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outputs = list(pool.map(one, range(reps)))

    table = MetricTable()
    for rep, results in sorted(outputs, key=lambda t: t[0]):
        for method, metrics, w, err in results:
            if err is not None:
                table.errors.append({"rep": rep, "method": method, "error": err})
                continue
            table.add(rep, method, metrics)
            if w is not None:
                table.weights.setdefault(method, []).append((rep, np.asarray(w, dtype=np.float64)))
    return table

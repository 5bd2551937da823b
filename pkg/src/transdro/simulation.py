"""Seeded data generators for the synthetic experiments.

Settings 1.1, 1.2, 1.3, 2 and 3 are low-dimensional (p=35, L=4); 4.1,
4.2 and 5 are high-dimensional. Every generator consumes a single
``numpy.random.Generator`` in a fixed order, so a spec plus a seed
determines the datasets bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace
from typing import Optional

import numpy as np

from .core import CoefficientMatrix, Dataset
from .errors import BadSpec
from .qp import minimize_quadratic

LOW_SETTINGS = ("1.1", "1.2", "1.3", "2", "3")
HIGH_SETTINGS = ("4.1", "4.2", "5")
SETTINGS = LOW_SETTINGS + HIGH_SETTINGS

PROFILES = {
    "desk": {"N_l": 2000, "N_valid": 125},
    "paper": {"N_l": 20000, "N_valid": 125},
}

_LOW_U = {"1.1": 0.005, "1.2": 0.1, "1.3": 0.05, "2": 0.005, "3": 0.005}


@dataclass(frozen=True)
class ScenarioSpec:
    setting_id: str
    p: int
    L: int
    n: int
    N_l: int = 2000
    N_valid: int = 125
    u: float = 0.0
    tau: Optional[float] = None
    sigma2_q: float = 1.0
    sigma2_p: float = 0.5
    p_adv: int = 0
    L_adv: int = 0
    s0: int = 100
    s1: float = 5.0
    nega_have: bool = False
    paired_signs: bool = False
    n_unlabeled: int = 0
    seed: int = 0

    @classmethod
    def for_setting(cls, setting_id, profile: str = "desk", **overrides) -> "ScenarioSpec":
        sid = str(setting_id)
        if sid not in SETTINGS:
            raise BadSpec(f"unknown setting {setting_id!r}; expected one of {', '.join(SETTINGS)}")
        if profile not in PROFILES:
            raise BadSpec(f"unknown profile {profile!r}")
        base = dict(PROFILES[profile])
        if sid in LOW_SETTINGS:
            base.update(p=35, L=4, n=200, u=_LOW_U[sid])
        elif sid == "4.1":
            base.update(p=200, L=10, n=100, p_adv=50, L_adv=5)
        elif sid == "4.2":
            base.update(p=200, L=10, n=100, p_adv=25, L_adv=5)
        else:
            base.update(p=307, L=10, n=100, s0=100, s1=5.0)
        unknown = set(overrides) - set(cls.__dataclass_fields__)
        if unknown:
            raise BadSpec(f"unknown scenario fields: {sorted(unknown)}")
        base.update({k: v for k, v in overrides.items() if v is not None})
        spec = cls(setting_id=sid, **base)
        spec.validate()
        return spec

    def validate(self) -> None:
        if self.setting_id not in SETTINGS:
            raise BadSpec(f"unknown setting {self.setting_id!r}")
        if min(self.p, self.L, self.N_l, self.N_valid) < 1 or self.n < 4:
            raise BadSpec("p, L, N_l, N_valid must be positive and n >= 4")
        if self.sigma2_q < 0 or self.sigma2_p < 0:
            raise BadSpec("noise variances must be nonnegative")
        if self.tau is not None and self.tau < 0:
            raise BadSpec("tau must be nonnegative")
        if self.setting_id in LOW_SETTINGS and self.L != 4:
            raise BadSpec("low-dimensional settings use exactly L=4 sources")
        if self.setting_id in LOW_SETTINGS and self.p < 25:
            raise BadSpec("low-dimensional settings need p >= 25 for the source supports")
        if self.setting_id in ("4.1", "4.2"):
            if not 0 <= self.p_adv <= 50 or self.p < 50:
                raise BadSpec("setting 4 needs p >= 50 and 0 <= p_adv <= 50")
            if not 0 <= self.L_adv <= self.L:
                raise BadSpec("L_adv must lie in [0, L]")
        if self.setting_id == "5":
            if self.p < 7 + self.s0 or self.s0 < 1:
                raise BadSpec("setting 5 needs 1 <= s0 <= p - 7")

    def resolved_tau(self) -> float:
        return 1.0 / self.n if self.tau is None else self.tau

    def to_dict(self) -> dict:
        d = asdict(self)
        d["tau_resolved"] = self.resolved_tau()
        return d

    def with_(self, **kw) -> "ScenarioSpec":
        spec = replace(self, **kw)
        spec.validate()
        return spec


@dataclass(frozen=True)
class GroundTruth:
    beta_star: np.ndarray
    b_matrix: CoefficientMatrix
    beta_star_valid: np.ndarray
    alpha_true: float
    sigma_q: np.ndarray
    mixture_valid: Optional[np.ndarray] = None

    def to_dict(self) -> dict:
        return {
            "beta_star": self.beta_star.tolist(),
            "b_matrix": self.b_matrix.columns.T.tolist(),
            "beta_star_valid": self.beta_star_valid.tolist(),
            "alpha_true": self.alpha_true,
            "mixture_valid": None if self.mixture_valid is None else self.mixture_valid.tolist(),
        }


@dataclass(frozen=True)
class Scenario:
    sources: list
    target: Dataset
    validation: Dataset
    truth: GroundTruth
    x_unlabeled: np.ndarray
    spec: ScenarioSpec


def ar_matrix(p: int, rho: float) -> np.ndarray:
    idx = np.arange(p)
    return rho ** np.abs(idx[:, None] - idx[None, :])


def gen_covariance(kind: str, p: int, rng: np.random.Generator):
    """Mean vector and covariance for source or target covariates.

    Target: AR(0.7) correlation, zero mean. Source: AR(0.6) with diagonal
    jitter of variance 0.01, mean entries N(zeta, 0.01) with zeta ~ Exp(1).
    """
    if p < 1:
        raise BadSpec("p must be >= 1")
    if kind == "target":
        return np.zeros(p), ar_matrix(p, 0.7)
    if kind != "source":
        raise ValueError(f"kind must be 'source' or 'target', got {kind!r}")
    cov = ar_matrix(p, 0.6) + np.diag(rng.normal(0.0, 0.1, size=p))
    lam_min = np.linalg.eigvalsh(cov)[0]
    if lam_min < 1e-6:
        cov += (1e-6 - lam_min) * np.eye(p)
    zeta = rng.exponential(1.0)
    mean = rng.normal(zeta, 0.1, size=p)
    return mean, cov


def _draw_x(rng, mean, cov, n):
    chol = np.linalg.cholesky(cov)
    return mean + rng.standard_normal((n, mean.shape[0])) @ chol.T


def _draw_site(rng, mean, cov, n, beta, sigma2, site_id):
    x = _draw_x(rng, mean, cov, n)
    y = x @ beta + rng.normal(0.0, math.sqrt(sigma2), size=n)
    return Dataset(x, y, site_id)


def low_dim_coefficients(p: int = 35, identical_sources: bool = False) -> np.ndarray:
    """Source coefficients for the low-dimensional settings, shape (p, 4).

    Sources 1-3 carry 0.3 on blocks of 15 coordinates starting at 0, 5 and
    10; source 4 is the negated average of the first three.
    """
    B = np.zeros((p, 4))
    for l in range(3):
        start = 0 if identical_sources else 5 * l
        B[start:start + 15, l] = 0.3
    B[:, 3] = -B[:, :3].mean(axis=1)
    return B


def population_alpha(beta_star, B, sigma_q) -> float:
    """``min over the simplex of (beta* - B g)' S (beta* - B g)``."""
    BtS = B.T @ sigma_q
    Q = BtS @ B
    c = BtS @ beta_star
    w, _ = minimize_quadratic(Q, c, "convex", tol=1e-12, max_iter=100000)
    d = beta_star - B @ w
    return max(0.0, float(d @ sigma_q @ d))


def _source_datasets(rng, spec, B):
    sources = []
    for l in range(B.shape[1]):
        mean, cov = gen_covariance("source", spec.p, rng)
        sources.append(_draw_site(rng, mean, cov, spec.N_l, B[:, l], spec.sigma2_p, l + 1))
    return sources


def _finish(rng, spec, B, beta_star, beta_valid, mixture=None) -> Scenario:
    sources = _source_datasets(rng, spec, B)
    mean_q, cov_q = gen_covariance("target", spec.p, rng)
    target = _draw_site(rng, mean_q, cov_q, spec.n, beta_star, spec.sigma2_q, 0)
    validation = _draw_site(rng, mean_q, cov_q, spec.N_valid, beta_valid, spec.sigma2_q, 0)
    x_unl = _draw_x(rng, mean_q, cov_q, spec.n_unlabeled) if spec.n_unlabeled else np.zeros((0, spec.p))
    truth = GroundTruth(
        beta_star=beta_star,
        b_matrix=CoefficientMatrix(B),
        beta_star_valid=beta_valid,
        alpha_true=population_alpha(beta_star, B, cov_q),
        sigma_q=cov_q,
        mixture_valid=mixture,
    )
    return Scenario(sources, target, validation, truth, x_unl, spec)


def gen_setting_low(spec: ScenarioSpec, rng: np.random.Generator) -> Scenario:
    if spec.setting_id not in LOW_SETTINGS:
        raise BadSpec(f"setting {spec.setting_id} is not low-dimensional")
    spec.validate()
    B = low_dim_coefficients(spec.p)
    beta_star = B[:, :3].mean(axis=1) + spec.u
    beta_valid, mixture = beta_star, None
    if spec.setting_id == "3":
        g = rng.dirichlet(np.ones(4))
        beta_valid = beta_star / 2.0 + 0.5 * (B @ g)
        mixture = np.concatenate([[0.5], g / 2.0])
    return _finish(rng, spec, B, beta_star, beta_valid, mixture)


def setting4_coefficients(spec: ScenarioSpec, rng: np.random.Generator):
    p = spec.p
    beta_star = np.zeros(p)
    beta_star[:50] = 0.2
    B = np.empty((p, spec.L))
    for l in range(spec.L):
        if l < spec.L_adv:
            b = beta_star.copy()
            b[: spec.p_adv] = -0.2
            B[:, l] = b + rng.normal(0.0, 0.1, size=p)
        else:
            B[:, l] = beta_star + rng.normal(0.0, math.sqrt(0.1), size=p)
    return beta_star, B


def setting5_coefficients(spec: ScenarioSpec, rng: np.random.Generator):
    p, s0 = spec.p, spec.s0
    head = np.array([0.3, 0.1, 0.5, -0.2, -0.7, 0.0, 0.0])
    beta_star = np.zeros(p)
    beta_star[:7] = head
    B = np.zeros((p, spec.L))
    for l in range(spec.L):
        if spec.nega_have:
            if spec.paired_signs and l % 2 == 1:
                w = -w_prev
            else:
                w = rng.choice([-1.0, 1.0], size=s0)
            w_prev = w
        else:
            w = np.ones(s0)
        B[:7, l] = head
        B[7:7 + s0, l] = w * spec.s1 / s0
    return beta_star, B


def gen_setting_high(spec: ScenarioSpec, rng: np.random.Generator) -> Scenario:
    if spec.setting_id not in HIGH_SETTINGS:
        raise BadSpec(f"setting {spec.setting_id} is not high-dimensional")
    spec.validate()
    if spec.setting_id == "5":
        beta_star, B = setting5_coefficients(spec, rng)
    else:
        beta_star, B = setting4_coefficients(spec, rng)
    return _finish(rng, spec, B, beta_star, beta_star)


def generate(spec: ScenarioSpec, rng=None) -> Scenario:
    """Draw one replication; ``rng`` defaults to one seeded from ``spec.seed``."""
    if rng is None:
        rng = np.random.default_rng(spec.seed)
    if spec.setting_id in LOW_SETTINGS:
        return gen_setting_low(spec, rng)
    return gen_setting_high(spec, rng)


def replication_rng(seed: int, rep: int) -> np.random.Generator:
    """Independent stream for replication ``rep`` of a run seeded with ``seed``."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(rep)]))

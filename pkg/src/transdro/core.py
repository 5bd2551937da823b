"""Domain types shared across the estimation pipeline."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional, Sequence

import numpy as np

from .errors import DimensionMismatch, NonFinite, TooFewLabels

SIMPLEX_ATOL = 1e-9


def _frozen(a, ndim: int, name: str) -> np.ndarray:
    arr = np.array(a, dtype=np.float64, copy=True)
    if arr.ndim != ndim:
        raise DimensionMismatch(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Dataset:
    """Covariates and (optionally) responses observed at one site.

    ``site_id`` 0 is reserved for the target; sources are 1..L. ``y`` is
    ``None`` for an unlabeled covariate pool.
    """

    x: np.ndarray
    y: Optional[np.ndarray] = None
    site_id: int = 0

    def __post_init__(self):
        x = _frozen(self.x, 2, "x")
        if not np.all(np.isfinite(x)):
            raise NonFinite(f"site {self.site_id}: covariates contain non-finite values")
        object.__setattr__(self, "x", x)
        if self.y is not None:
            y = _frozen(self.y, 1, "y")
            if y.shape[0] != x.shape[0]:
                raise DimensionMismatch(
                    f"site {self.site_id}: y has {y.shape[0]} entries but x has {x.shape[0]} rows"
                )
            if not np.all(np.isfinite(y)):
                raise NonFinite(f"site {self.site_id}: response contains non-finite values")
            object.__setattr__(self, "y", y)

    @property
    def n_obs(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]

    @property
    def labeled(self) -> bool:
        return self.y is not None

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=np.intp)
        return Dataset(self.x[idx], None if self.y is None else self.y[idx], self.site_id)


def check_same_p(datasets: Sequence[Dataset]) -> int:
    ps = {d.p for d in datasets}
    if len(ps) != 1:
        raise DimensionMismatch(f"datasets disagree on the number of features: {sorted(ps)}")
    return ps.pop()


@dataclass(frozen=True)
class SplitPlan:
    indices_s1: np.ndarray
    indices_s2: np.ndarray
    seed: Optional[int] = None

    def __post_init__(self):
        for name in ("indices_s1", "indices_s2"):
            arr = np.array(getattr(self, name), dtype=np.intp, copy=True)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def swapped(self) -> "SplitPlan":
        return SplitPlan(self.indices_s2, self.indices_s1, self.seed)


def make_split(target: Dataset, seed) -> SplitPlan:
    """Randomly partition the labeled target rows into two halves.

    The halves differ in size by at most one; the partition is a pure
    function of ``seed``.
    """
    if not target.labeled or target.n_obs < 4:
        n = target.n_obs if target.labeled else 0
        raise TooFewLabels(f"need at least 4 labeled target rows to split, got {n}")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(target.n_obs)
    half = (target.n_obs + 1) // 2
    return SplitPlan(np.sort(perm[:half]), np.sort(perm[half:]), seed)


@dataclass(frozen=True)
class CoefficientMatrix:
    """Column-stacked coefficient vectors, shape ``(p, k)``.

    When ``augmented`` is set, column 0 holds the target estimate and
    columns 1..L the source estimates.
    """

    columns: np.ndarray
    augmented: bool = False

    def __post_init__(self):
        cols = _frozen(self.columns, 2, "columns")
        object.__setattr__(self, "columns", cols)

    @classmethod
    def from_vectors(cls, vectors: Sequence[np.ndarray], augmented: bool = False) -> "CoefficientMatrix":
        vectors = [np.asarray(v, dtype=np.float64) for v in vectors]
        lengths = {v.shape for v in vectors}
        if len(lengths) != 1:
            raise DimensionMismatch(f"coefficient vectors have differing shapes: {sorted(lengths)}")
        return cls(np.column_stack(vectors), augmented)

    @property
    def p(self) -> int:
        return self.columns.shape[0]

    @property
    def n_columns(self) -> int:
        return self.columns.shape[1]

    @property
    def n_sources(self) -> int:
        return self.n_columns - 1 if self.augmented else self.n_columns

    def sources(self) -> "CoefficientMatrix":
        if not self.augmented:
            return self
        return CoefficientMatrix(self.columns[:, 1:], False)

    def augment(self, target_column: np.ndarray) -> "CoefficientMatrix":
        if self.augmented:
            raise ValueError("matrix is already augmented")
        target_column = np.asarray(target_column, dtype=np.float64)
        if target_column.shape != (self.p,):
            raise DimensionMismatch("target column length does not match p")
        return CoefficientMatrix(np.column_stack([target_column, self.columns]), True)

    def permuted(self, order: Sequence[int]) -> "CoefficientMatrix":
        return CoefficientMatrix(self.columns[:, list(order)], self.augmented)

    def __matmul__(self, w):
        if isinstance(w, SimplexWeight):
            w = w.w
        w = np.asarray(w, dtype=np.float64)
        if w.shape[0] != self.n_columns:
            raise DimensionMismatch(f"weight length {w.shape[0]} != column count {self.n_columns}")
        return self.columns @ w


CANDIDATE_SETS = ("convex", "bounded")


@dataclass(frozen=True)
class SimplexWeight:
    """Mixture weights over coefficient columns.

    ``convex`` weights live on the probability simplex. ``bounded`` weights
    have entry 0 in [0, 1] and the remaining entries in [-1, 1], with no
    sum constraint.
    """

    w: np.ndarray
    candidate_set: str = "convex"

    def __post_init__(self):
        if self.candidate_set not in CANDIDATE_SETS:
            raise ValueError(f"unknown candidate set {self.candidate_set!r}")
        w = _frozen(self.w, 1, "w")
        object.__setattr__(self, "w", w)
        self.check()

    def check(self, atol: float = SIMPLEX_ATOL) -> None:
        w = self.w
        if self.candidate_set == "convex":
            ok = np.all(w >= 0) and np.all(w <= 1) and abs(w.sum() - 1.0) <= atol
        else:
            ok = 0 <= w[0] <= 1 and np.all(w[1:] >= -1) and np.all(w[1:] <= 1)
        if not ok:
            raise ValueError(f"weights {w} violate the {self.candidate_set} candidate set")

    def __len__(self):
        return self.w.shape[0]


@dataclass(frozen=True)
class FitReport:
    beta: np.ndarray
    gamma: SimplexWeight
    baseline_beta: np.ndarray
    tau: float
    sigma2_hat: float
    b0_hat: Optional[CoefficientMatrix] = None
    diagnostics: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "beta", _frozen(self.beta, 1, "beta"))
        object.__setattr__(self, "baseline_beta", _frozen(self.baseline_beta, 1, "baseline_beta"))
        if self.b0_hat is not None:
            resid = np.max(np.abs(self.beta - self.b0_hat @ self.gamma), initial=0.0)
            if resid > 1e-9:
                raise AssertionError(f"beta differs from B0 @ gamma by {resid:.3g}")

    @property
    def target_weight(self) -> float:
        return float(self.gamma.w[0]) if self.b0_hat is None or self.b0_hat.augmented else 0.0

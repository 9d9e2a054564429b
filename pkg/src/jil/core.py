"""Domain types shared by every other module.

The treatment domain [0, 1] is discretized into m grid cells. Intervals and
partitions are stored as integer grid indices so that partition validity,
total length, and membership are exact integer arithmetic. An interval
(lo, hi, m) denotes [lo/m, hi/m), except that hi == m closes the right
endpoint so the final interval is [lo/m, 1].

Membership of a treatment value is defined through its grid cell,
cell(a) = min(floor(a*m), m-1): interval (lo, hi) contains a iff
lo <= cell(a) < hi. Fitting, prediction, propensity estimation, and
cross-validation all share this one rule, so a given observation belongs to
exactly one interval of any valid partition.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .errors import DegenerateTreatment, DimensionMismatch, InvalidData

__all__ = [
    "Dataset",
    "Interval",
    "Partition",
    "Linear",
    "Mlp",
    "SegmentModel",
    "JilFit",
    "grid_cell",
    "make_grid",
    "make_xbar",
    "normalize_treatment",
    "validate_dataset",
]


def make_grid(n: int, c: float) -> int:
    """Grid resolution m = max(1, floor(n / c))."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if not c > 0:
        raise ValueError(f"c must be > 0, got {c}")
    return max(1, int(np.floor(n / c)))


def grid_cell(a, m: int):
    """Grid cell index of treatment value(s): min(floor(a*m), m-1).

    Values of exactly 1.0 fold into the last cell, implementing the
    right-closed final interval.
    """
    cells = np.minimum(np.floor(np.asarray(a) * m).astype(np.int64), m - 1)
    if np.ndim(a) == 0:
        return int(cells)
    return cells


def make_xbar(X: np.ndarray) -> np.ndarray:
    """Design matrix xbar = (1, x^T)^T stacked over rows."""
    X = np.asarray(X, dtype=float)
    return np.hstack([np.ones((X.shape[0], 1)), X])


def normalize_treatment(raw) -> np.ndarray:
    """Min-max normalize a raw treatment vector onto [0, 1]."""
    arr = np.asarray(raw, dtype=float)
    if arr.size < 2 or not np.all(np.isfinite(arr)):
        raise DegenerateTreatment("treatments must be >= 2 finite values")
    lo, hi = arr.min(), arr.max()
    if hi == lo:
        raise DegenerateTreatment("treatment range is zero; cannot normalize")
    return (arr - lo) / (hi - lo)


@dataclass(frozen=True)
class Dataset:
    """n observations of (covariates in R^p, treatment in [0,1], outcome in R)."""

    covariates: np.ndarray
    treatments: np.ndarray
    outcomes: np.ndarray

    def __post_init__(self):
        cov = np.atleast_2d(np.asarray(self.covariates, dtype=float))
        tr = np.asarray(self.treatments, dtype=float).ravel()
        out = np.asarray(self.outcomes, dtype=float).ravel()
        for name, arr in (("covariates", cov), ("treatments", tr), ("outcomes", out)):
            arr = arr.copy()
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def n(self) -> int:
        return self.covariates.shape[0]

    @property
    def p(self) -> int:
        return self.covariates.shape[1]

    def subset(self, idx) -> "Dataset":
        """Row subset (used by cross-validation)."""
        return Dataset(self.covariates[idx], self.treatments[idx], self.outcomes[idx])


def validate_dataset(d: Dataset) -> None:
    """Raise InvalidData naming the field and first offending row."""
    if d.n < 1:
        raise InvalidData("covariates", None, "dataset has no rows")
    bad = ~np.isfinite(d.covariates)
    if bad.any():
        row = int(np.argwhere(bad)[0, 0])
        raise InvalidData("covariates", row, f"non-finite covariate at row {row}")
    if d.treatments.shape[0] != d.n:
        raise InvalidData("treatments", None, "treatments length differs from covariates")
    bad = ~np.isfinite(d.treatments) | (d.treatments < 0.0) | (d.treatments > 1.0)
    if bad.any():
        row = int(np.argmax(bad))
        raise InvalidData("treatments", row, f"treatment outside [0, 1] at row {row}")
    if d.outcomes.shape[0] != d.n:
        raise InvalidData("outcomes", None, "outcomes length differs from covariates")
    bad = ~np.isfinite(d.outcomes)
    if bad.any():
        row = int(np.argmax(bad))
        raise InvalidData("outcomes", row, f"non-finite outcome at row {row}")


@dataclass(frozen=True)
class Interval:
    """Grid-aligned treatment interval [lo/m, hi/m), right-closed when hi == m."""

    lo: int
    hi: int
    m: int

    def __post_init__(self):
        if self.m < 1:
            raise ValueError(f"grid resolution must be >= 1, got {self.m}")
        if not (0 <= self.lo < self.hi <= self.m):
            raise ValueError(f"need 0 <= lo < hi <= m, got ({self.lo}, {self.hi}, {self.m})")

    @property
    def lo_frac(self) -> float:
        return self.lo / self.m

    @property
    def hi_frac(self) -> float:
        return self.hi / self.m

    @property
    def length(self) -> float:
        return (self.hi - self.lo) / self.m

    def contains(self, a: float) -> bool:
        return self.lo <= grid_cell(a, self.m) < self.hi

    def __str__(self) -> str:
        if self.hi == self.m:
            return f"[{self.lo / self.m:g}, 1]"
        return f"[{self.lo / self.m:g}, {self.hi / self.m:g})"


@dataclass(frozen=True)
class Partition:
    """Ordered, abutting intervals covering [0, 1] on a common grid."""

    intervals: tuple

    def __post_init__(self):
        ivs = tuple(self.intervals)
        object.__setattr__(self, "intervals", ivs)
        if not ivs:
            raise ValueError("partition must contain at least one interval")
        m = ivs[0].m
        if any(iv.m != m for iv in ivs):
            raise ValueError("all intervals must share one grid resolution")
        if ivs[0].lo != 0 or ivs[-1].hi != m:
            raise ValueError("partition must span [0, 1]")
        for prev, nxt in zip(ivs, ivs[1:]):
            if prev.hi != nxt.lo:
                raise ValueError(f"intervals must abut: {prev} then {nxt}")
        object.__setattr__(self, "_his", tuple(iv.hi for iv in ivs))

    @classmethod
    def from_edges(cls, edges, m: int) -> "Partition":
        """Build from integer edges [0, b_1, ..., m]."""
        return cls(tuple(Interval(a, b, m) for a, b in zip(edges[:-1], edges[1:])))

    @property
    def m(self) -> int:
        return self.intervals[0].m

    @property
    def size(self) -> int:
        return len(self.intervals)

    def edges(self) -> list:
        return [0] + list(self._his)

    def boundaries(self) -> list:
        """Interior change points as fractions of [0, 1]."""
        return [hi / self.m for hi in self._his[:-1]]

    def locate_cell(self, cell: int) -> int:
        """Index of the interval whose [lo, hi) contains the grid cell."""
        return bisect_right(self._his, cell)

    def locate(self, a: float) -> int:
        """Index of the unique interval containing treatment value a."""
        return self.locate_cell(grid_cell(a, self.m))

    def locate_cells(self, cells: np.ndarray) -> np.ndarray:
        """Vectorized locate_cell."""
        return np.searchsorted(np.asarray(self._his), cells, side="right")


@dataclass(frozen=True)
class Linear:
    """Per-interval linear outcome model q(x) = theta[0] + x . theta[1:]."""

    theta: np.ndarray

    def __post_init__(self):
        th = np.asarray(self.theta, dtype=float).copy()
        th.flags.writeable = False
        object.__setattr__(self, "theta", th)

    def predict(self, x: np.ndarray) -> float:
        return float(self.predict_batch(np.asarray(x, dtype=float)[None, :])[0])

    def predict_batch(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.shape[1] + 1 != self.theta.shape[0]:
            raise DimensionMismatch(
                f"model expects {self.theta.shape[0] - 1} covariates, got {X.shape[1]}"
            )
        return self.theta[0] + X @ self.theta[1:]


@dataclass(frozen=True)
class Mlp:
    """Per-interval neural-network outcome model (wraps an MlpModel)."""

    network: object

    def predict(self, x: np.ndarray) -> float:
        return float(self.network.predict(x))

    def predict_batch(self, X: np.ndarray) -> np.ndarray:
        return self.network.predict_batch(X)


SegmentModel = Union[Linear, Mlp]


@dataclass(frozen=True)
class JilFit:
    """A fitted segmentation: partition, per-interval models, hyperparameters.

    objective is the penalized least-squares value of the stored components:
    sum over intervals of (residual SSE / n + lam * |I| * ||theta||^2), plus
    gamma * |P|.
    """

    partition: Partition
    models: tuple
    m: int
    lam: float
    gamma: float
    objective: float
    method: str = "ljil"

    def __post_init__(self):
        object.__setattr__(self, "models", tuple(self.models))
        if len(self.models) != self.partition.size:
            raise ValueError("one model per partition interval required")
        if self.m != self.partition.m:
            raise ValueError("fit grid must match the partition grid")

"""Interval-valued decision rules and doubly-robust value estimation.

The rule recommends, for covariates x, the partition interval whose fitted
outcome model predicts the largest mean outcome; near-ties (within 1e-12)
resolve to the interval with the smaller left endpoint. The value of the
rule is estimated by augmented inverse-propensity weighting,

    V_hat = (1/n) sum_i [ 1{A_i in d(X_i)} / e(d(X_i)|X_i) * {Y_i - max_I q_I(X_i)}
                          + max_I q_I(X_i) ],

with a Wald interval V_hat +/- z_{alpha/2} * sigma_hat / sqrt(n), where
sigma_hat is the per-observation standard deviation of the bracketed terms.

The generalized propensity e(I|x) comes from either a softmax-linear model
trained by full-batch gradient descent or the marginal interval
frequencies; predicted probabilities are floored at `floor` by an exact
water-filling adjustment (never plain clipping, which would break the
simplex constraint).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .core import Dataset, Interval, JilFit, Partition, grid_cell, make_xbar
from .errors import DegeneratePartition, DimensionMismatch, InsufficientData

__all__ = [
    "I2dr",
    "PropensityModel",
    "ValueReport",
    "MinDose",
    "MaxDose",
    "MidPoint",
    "UniformRandom",
    "recommend",
    "recommend_batch",
    "fit_propensity",
    "propensity_probs",
    "floor_probabilities",
    "estimate_value",
    "select_dose",
]

_TIE_TOL = 1e-12


@dataclass(frozen=True)
class I2dr:
    """Interval-valued decision rule wrapping a fitted segmentation."""

    fit: JilFit

    def recommend(self, x: np.ndarray) -> Interval:
        return recommend(self, x)


def _predictions(fit: JilFit, X: np.ndarray) -> np.ndarray:
    """Per-interval predictions, shape (n, |P|)."""
    return np.stack([mod.predict_batch(X) for mod in fit.models], axis=1)


def recommend_batch(rule: I2dr, X: np.ndarray) -> np.ndarray:
    """Index of the recommended interval per row of X."""
    X = np.asarray(X, dtype=float)
    Q = _predictions(rule.fit, X)
    best = Q.max(axis=1, keepdims=True)
    return np.argmax(Q >= best - _TIE_TOL, axis=1)


def recommend(rule: I2dr, x: np.ndarray) -> Interval:
    """The partition interval with the largest predicted outcome at x."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise DimensionMismatch(f"expected a covariate vector, got shape {x.shape}")
    idx = recommend_batch(rule, x[None, :])[0]
    return rule.fit.partition.intervals[idx]


# --------------------------------------------------------------- propensity


@dataclass(frozen=True)
class PropensityModel:
    """Generalized propensity over partition intervals.

    kind "multinomial" carries softmax-linear weights of shape (|P|, p+1);
    kind "empirical" carries marginal frequencies of shape (|P|,). Predicted
    probabilities are floored at `floor` and renormalized.
    """

    kind: str
    partition: Partition
    floor: float
    weights: np.ndarray = None
    freqs: np.ndarray = None

    def __post_init__(self):
        if self.kind not in ("multinomial", "empirical"):
            raise ValueError(f"unknown propensity kind {self.kind!r}")
        if not (0.0 < self.floor < 0.5):
            raise ValueError(f"floor must lie in (0, 0.5), got {self.floor}")
        if self.kind == "multinomial":
            if self.weights is None or self.weights.shape[0] != self.partition.size:
                raise ValueError("multinomial weights must have one row per interval")
        elif self.freqs is None or len(self.freqs) != self.partition.size:
            raise ValueError("empirical freqs must have one entry per interval")


def floor_probabilities(probs: np.ndarray, floor: float) -> np.ndarray:
    """Raise every probability to >= floor while keeping rows on the simplex.

    Each row is replaced by floor + (1 - K*floor) * s / sum(s) with
    s = max(p - floor, 0): mass above the floor is rescaled to fill the
    remaining budget, which is exact, unlike clip-and-renormalize.
    """
    probs = np.asarray(probs, dtype=float)
    k = probs.shape[1]
    f = min(float(floor), 1.0 / k)
    s = np.maximum(probs - f, 0.0)
    tot = s.sum(axis=1, keepdims=True)
    share = np.where(tot > 0.0, s / np.where(tot > 0.0, tot, 1.0), 1.0 / k)
    return f + (1.0 - k * f) * share


def fit_propensity(
    d: Dataset, partition: Partition, kind: str = "multinomial", floor: float = 0.01
) -> PropensityModel:
    """Estimate e(I | x) for every interval of the partition.

    The multinomial fit runs 500 full-batch gradient steps (rate 0.1,
    l2 1e-4) on the softmax log-loss from a zero initialization, so it is
    deterministic. The empirical fit ignores x and uses interval counts / n.
    """
    if partition is None or partition.size < 1:
        raise DegeneratePartition("propensity requires a non-empty partition")
    K = partition.size
    if d.n < K:
        raise InsufficientData(f"need n >= |P| = {K} observations, got {d.n}")
    labels = partition.locate_cells(grid_cell(d.treatments, partition.m))
    if kind == "empirical":
        freqs = np.bincount(labels, minlength=K) / d.n
        return PropensityModel(kind="empirical", partition=partition, floor=floor, freqs=freqs)
    Xb = make_xbar(d.covariates)
    onehot = np.zeros((d.n, K))
    onehot[np.arange(d.n), labels] = 1.0
    W = np.zeros((K, Xb.shape[1]))
    for _ in range(500):
        logits = Xb @ W.T
        logits -= logits.max(axis=1, keepdims=True)
        e = np.exp(logits)
        P = e / e.sum(axis=1, keepdims=True)
        grad = (P - onehot).T @ Xb / d.n + 2e-4 * W
        W -= 0.1 * grad
    return PropensityModel(kind="multinomial", partition=partition, floor=floor, weights=W)


def propensity_probs(prop: PropensityModel, X: np.ndarray) -> np.ndarray:
    """Floored interval probabilities per row of X, shape (n, |P|)."""
    X = np.asarray(X, dtype=float)
    if prop.kind == "empirical":
        raw = np.tile(np.asarray(prop.freqs, dtype=float), (X.shape[0], 1))
    else:
        if X.shape[1] + 1 != prop.weights.shape[1]:
            raise DimensionMismatch(
                f"propensity expects {prop.weights.shape[1] - 1} covariates, got {X.shape[1]}"
            )
        logits = make_xbar(X) @ prop.weights.T
        logits -= logits.max(axis=1, keepdims=True)
        e = np.exp(logits)
        raw = e / e.sum(axis=1, keepdims=True)
    return floor_probabilities(raw, prop.floor)


# ------------------------------------------------------------------- value


@dataclass(frozen=True)
class ValueReport:
    """Doubly-robust value estimate with its Wald confidence interval."""

    v_hat: float
    sigma_hat: float
    ci_lo: float
    ci_hi: float
    alpha: float


def estimate_value(d: Dataset, rule: I2dr, prop: PropensityModel, alpha: float) -> ValueReport:
    """Augmented inverse-propensity estimate of the rule's value on d."""
    if d.n < 2:
        raise InsufficientData("value estimation needs at least 2 observations")
    if not (0.0 < alpha < 1.0):
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if prop.partition != rule.fit.partition:
        raise ValueError("propensity and rule were fit on different partitions")
    fit = rule.fit
    Q = _predictions(fit, d.covariates)
    qmax = Q.max(axis=1)
    rec = np.argmax(Q >= qmax[:, None] - _TIE_TOL, axis=1)
    seg = fit.partition.locate_cells(grid_cell(d.treatments, fit.m))
    ind = (seg == rec).astype(float)
    e = propensity_probs(prop, d.covariates)[np.arange(d.n), rec]
    terms = ind / e * (d.outcomes - qmax) + qmax
    v_hat = float(np.mean(terms))
    sigma_hat = float(np.sqrt(np.sum((terms - v_hat) ** 2) / (d.n - 1)))
    z = float(norm.ppf(1.0 - alpha / 2.0))
    half = z * sigma_hat / np.sqrt(d.n)
    return ValueReport(v_hat, sigma_hat, v_hat - half, v_hat + half, float(alpha))


# -------------------------------------------------------------- preferences


@dataclass(frozen=True)
class MinDose:
    """Take the interval's left endpoint."""


@dataclass(frozen=True)
class MaxDose:
    """Take the interval's right endpoint."""


@dataclass(frozen=True)
class MidPoint:
    """Take the interval's midpoint."""


@dataclass
class UniformRandom:
    """Draw uniformly inside the interval; one seeded stream per instance."""

    seed: int

    def __post_init__(self):
        self._rng = np.random.default_rng(self.seed)


def select_dose(interval: Interval, pref) -> float:
    """Concrete treatment inside a recommended interval."""
    if isinstance(pref, MinDose):
        return interval.lo_frac
    if isinstance(pref, MaxDose):
        return interval.hi_frac
    if isinstance(pref, MidPoint):
        return (interval.lo + interval.hi) / (2.0 * interval.m)
    if isinstance(pref, UniformRandom):
        return interval.lo_frac + pref._rng.random() * interval.length
    raise TypeError(f"unknown preference {pref!r}")

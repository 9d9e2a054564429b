"""Shared test fixtures and independent oracle implementations.

The oracles here deliberately avoid every fast path in the package: ridge
solves go through dense normal equations (or lstsq for the singular case),
costs and losses are accumulated with plain Python loops where feasible, and
interval membership is recomputed from first principles. Tests compare the
library against these, never against itself.
"""

from __future__ import annotations

import numpy as np
import pytest


def make_xbar(X: np.ndarray) -> np.ndarray:
    """Design matrix with a leading intercept column."""
    n = X.shape[0]
    return np.hstack([np.ones((n, 1)), X])


def cell_of(a: float, m: int) -> int:
    """Grid cell of a treatment value: min(floor(a*m), m-1)."""
    return min(int(np.floor(a * m)), m - 1)


def rows_in_interval(A: np.ndarray, lo: int, hi: int, m: int) -> np.ndarray:
    """Boolean mask of rows whose treatment cell lies in [lo, hi)."""
    cells = np.array([cell_of(a, m) for a in A])
    return (cells >= lo) & (cells < hi)


def ridge_oracle(X, A, Y, lo, hi, m, lam):
    """Direct dense solve of the per-interval ridge normal equations.

    theta = (sum xbar xbar^T + n*lam*|I|*Id)^{-1} sum xbar y over rows with
    A in the interval; min-norm lstsq when lam == 0 and the Gram is singular.
    """
    X = np.asarray(X, dtype=float)
    n = len(Y)
    mask = rows_in_interval(np.asarray(A, dtype=float), lo, hi, m)
    Xb = make_xbar(X[mask])
    Yv = np.asarray(Y, dtype=float)[mask]
    d = X.shape[1] + 1
    if Xb.shape[0] == 0:
        return np.zeros(d)
    ilen = (hi - lo) / m
    if lam == 0.0:
        theta, *_ = np.linalg.lstsq(Xb, Yv, rcond=None)
        return theta
    G = Xb.T @ Xb + n * lam * ilen * np.eye(d)
    return np.linalg.solve(G, Xb.T @ Yv)


def cost_oracle(X, A, Y, lo, hi, m, lam):
    """Interval cost from the ridge oracle, accumulated with a Python loop."""
    theta = ridge_oracle(X, A, Y, lo, hi, m, lam)
    n = len(Y)
    mask = rows_in_interval(np.asarray(A, dtype=float), lo, hi, m)
    sse = 0.0
    for i in range(n):
        if mask[i]:
            pred = theta[0] + float(np.dot(X[i], theta[1:]))
            sse += (Y[i] - pred) ** 2
    ilen = (hi - lo) / m
    return sse / n + lam * ilen * float(np.dot(theta, theta))


def random_xy(rng, n, p, scale=1.0):
    """Covariates uniform on [-1, 1], treatments uniform on [0, 1], noisy outcomes."""
    X = rng.uniform(-1.0, 1.0, size=(n, p))
    A = rng.random(n)
    Y = scale * rng.standard_normal(n) + X.sum(axis=1)
    return X, A, Y


@pytest.fixture
def rng():
    return np.random.default_rng(20260813)

"""End-to-end segmentation fits: data -> costs -> partition -> models."""

from __future__ import annotations

import numpy as np
import pytest

import jil.fit as fit_mod
from jil.core import Dataset, Interval, Linear, Partition
from jil.cost import CostCache
from jil.errors import InvalidData
from jil.fit import fit_djil, fit_ljil, recompute_objective
from jil.mlp import TrainConfig
from jil.segment import enumerate_partitions, pelt


def s1_like(rng, n, p=2, noise=0.25):
    """Three constant-in-a branches with cuts at 0.35 and 0.65."""
    X = rng.uniform(-1.0, 1.0, (n, p))
    A = rng.random(n)
    q = np.where(A < 0.35, 1.0 + X[:, 0], np.where(A < 0.65, X[:, 0] - X[:, 1], 1.0 - X[:, 1]))
    Y = q + noise * rng.standard_normal(n)
    return Dataset(X, A, Y)


# ------------------------------------------------------------------- ljil


def test_ljil_matches_manual_pipeline(rng):
    d = s1_like(rng, 150)
    m, lam, gamma = 20, 1e-3, 0.05
    f = fit_ljil(d, m, lam, gamma)
    cache = CostCache(d, m, lambdas=(lam,), precompute=True)
    part, obj = pelt(cache.costfn(lam), m, gamma)
    assert f.partition == part
    assert f.objective == obj
    for model, iv in zip(f.models, part.intervals):
        np.testing.assert_array_equal(model.theta, cache.theta(iv.lo, iv.hi, lam))


def test_ljil_recovers_three_segments(rng):
    n = 400
    d = s1_like(rng, n)
    gamma = 4.0 * np.log(n) / n
    f = fit_ljil(d, 80, 0.0, gamma)
    assert f.partition.size == 3
    b = f.partition.boundaries()
    assert abs(b[0] - 0.35) <= 0.05
    assert abs(b[1] - 0.65) <= 0.05


def test_ljil_objective_matches_independent_recompute(rng):
    d = s1_like(rng, 200)
    f = fit_ljil(d, 25, 1e-2, 0.08)
    assert recompute_objective(d, f) == pytest.approx(f.objective, rel=1e-8, abs=1e-10)


def test_ljil_prewarmed_cache_identical(rng):
    d = s1_like(rng, 120)
    m, lam, gamma = 15, 0.0, 0.1
    cache = CostCache(d, m, lambdas=(lam,), precompute=True)
    f1 = fit_ljil(d, m, lam, gamma, cache=cache)
    f2 = fit_ljil(d, m, lam, gamma)
    assert f1.partition == f2.partition
    assert f1.objective == f2.objective
    for a, b in zip(f1.models, f2.models):
        np.testing.assert_array_equal(a.theta, b.theta)


def test_ljil_lazy_and_bulk_identical(rng):
    d = s1_like(rng, 100)
    f1 = fit_ljil(d, 12, 1e-3, 0.07, precompute=True)
    f2 = fit_ljil(d, 12, 1e-3, 0.07, precompute=False)
    assert f1.partition == f2.partition
    assert f1.objective == f2.objective


def test_ljil_fields_recorded(rng):
    d = s1_like(rng, 80)
    f = fit_ljil(d, 10, 1e-2, 0.2)
    assert (f.m, f.lam, f.gamma, f.method) == (10, 1e-2, 0.2, "ljil")
    assert all(isinstance(mod, Linear) for mod in f.models)


def test_ljil_rejects_invalid_data(rng):
    X = rng.uniform(-1, 1, (20, 2))
    A = rng.random(20)
    Y = rng.standard_normal(20)
    Y[7] = np.nan
    with pytest.raises(InvalidData):
        fit_ljil(Dataset(X, A, Y), 5, 0.0, 0.1)


def test_ljil_intercept_only_step_matches_enumeration(rng):
    # p = 0: intercept-only segments; the step boundary sits at cell 5 of 10
    n = 200
    A = rng.random(n)
    Y = np.where(A < 0.5, 0.0, 10.0) + 0.1 * rng.standard_normal(n)
    d = Dataset(np.empty((n, 0)), A, Y)
    m, gamma = 10, 0.05
    f = fit_ljil(d, m, 0.0, gamma)
    cache = CostCache(d, m, lambdas=(0.0,), precompute=True)
    part, obj = enumerate_partitions(cache.costfn(0.0), m, gamma)
    assert f.partition == part
    assert f.objective == pytest.approx(obj, rel=1e-12)
    assert 5 in f.partition.edges()


# ------------------------------------------------------------------- djil


def djil_cfg(seed=0, epochs=300):
    return TrainConfig(hidden=(8,), epochs=epochs, learning_rate=0.05, batch_size=32, seed=seed)


def test_djil_step_data_two_segments(rng):
    n = 120
    A = rng.random(n)
    Y = np.where(A < 0.5, 0.0, 4.0) + 0.1 * rng.standard_normal(n)
    d = Dataset(rng.uniform(-1, 1, (n, 1)), A, Y)
    f = fit_djil(d, 6, 0.05, djil_cfg())
    assert f.partition.edges() == [0, 3, 6]
    assert f.method == "djil"
    assert f.lam == 0.0


def test_djil_huge_gamma_single_interval(rng):
    n = 80
    d = Dataset(rng.uniform(-1, 1, (n, 2)), rng.random(n), rng.standard_normal(n))
    f = fit_djil(d, 5, 50.0, djil_cfg(epochs=50))
    assert f.partition.size == 1


def test_djil_trains_each_interval_once(rng, monkeypatch):
    n = 90
    A = rng.random(n)
    Y = np.where(A < 0.5, 0.0, 4.0) + 0.1 * rng.standard_normal(n)
    d = Dataset(rng.uniform(-1, 1, (n, 1)), A, Y)
    calls = []
    real = fit_mod.mlp_train

    def counting(dd, iv, cfg):
        calls.append((iv.lo, iv.hi))
        return real(dd, iv, cfg)

    monkeypatch.setattr(fit_mod, "mlp_train", counting)
    m = 6
    f = fit_djil(d, m, 0.05, djil_cfg(epochs=60))
    assert len(calls) == len(set(calls))
    assert len(calls) <= m * (m + 1) // 2
    assert len(calls) >= f.partition.size


def test_djil_deterministic(rng):
    n = 70
    d = Dataset(rng.uniform(-1, 1, (n, 1)), rng.random(n), rng.standard_normal(n))
    f1 = fit_djil(d, 4, 0.2, djil_cfg(seed=9, epochs=40))
    f2 = fit_djil(d, 4, 0.2, djil_cfg(seed=9, epochs=40))
    assert f1.partition == f2.partition
    for a, b in zip(f1.models, f2.models):
        for w1, w2 in zip(a.network.weights, b.network.weights):
            np.testing.assert_array_equal(w1, w2)


def test_djil_objective_matches_independent_recompute(rng):
    n = 100
    A = rng.random(n)
    Y = np.where(A < 0.5, 0.0, 4.0) + 0.1 * rng.standard_normal(n)
    d = Dataset(rng.uniform(-1, 1, (n, 1)), A, Y)
    f = fit_djil(d, 5, 0.1, djil_cfg(epochs=80))
    assert recompute_objective(d, f) == pytest.approx(f.objective, rel=1e-8, abs=1e-10)


def test_djil_empty_interval_predicts_zero():
    # every observation sits in the last cell; earlier cells are empty
    n = 30
    rng = np.random.default_rng(5)
    A = np.full(n, 0.95)
    d = Dataset(rng.uniform(-1, 1, (n, 1)), A, rng.standard_normal(n) + 2.0)
    f = fit_djil(d, 3, 1e-6, djil_cfg(epochs=40))
    empty = [iv for iv in f.partition.intervals if iv.hi < 3]
    for iv in empty:
        k = f.partition.intervals.index(iv)
        assert f.models[k].predict(np.array([0.3])) == 0.0

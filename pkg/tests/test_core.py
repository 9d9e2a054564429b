"""Core domain types: grid construction, intervals, partitions, validation."""

from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jil.core import (
    Dataset,
    Interval,
    JilFit,
    Linear,
    Partition,
    grid_cell,
    make_grid,
    normalize_treatment,
    validate_dataset,
)
from jil.errors import DegenerateTreatment, DimensionMismatch, InvalidData


# ---------------------------------------------------------------- make_grid


def test_make_grid_examples():
    assert make_grid(800, 10) == 80
    assert make_grid(200, 5) == 40
    assert make_grid(3, 10) == 1


@given(n=st.integers(1, 10**6), c=st.floats(0.01, 1e4, allow_nan=False))
def test_make_grid_formula(n, c):
    m = make_grid(n, c)
    assert m == max(1, int(np.floor(n / c)))
    assert m >= 1


def test_make_grid_rejects_bad_args():
    with pytest.raises(ValueError):
        make_grid(0, 5)
    with pytest.raises(ValueError):
        make_grid(10, 0.0)
    with pytest.raises(ValueError):
        make_grid(10, -1.0)


# ---------------------------------------------------- normalize_treatment


def test_normalize_examples():
    np.testing.assert_allclose(normalize_treatment([2, 4, 6]), [0, 0.5, 1])
    np.testing.assert_allclose(normalize_treatment([0, 1]), [0, 1])


def test_normalize_degenerate():
    with pytest.raises(DegenerateTreatment):
        normalize_treatment([10, 10, 10])
    with pytest.raises(DegenerateTreatment):
        normalize_treatment([1.0, np.nan, 2.0])
    with pytest.raises(DegenerateTreatment):
        normalize_treatment([1.0, np.inf])


@given(
    raw=st.lists(
        st.floats(-1e8, 1e8, allow_nan=False, allow_infinity=False),
        min_size=2,
        max_size=40,
    )
)
def test_normalize_affine_property(raw):
    arr = np.asarray(raw, dtype=float)
    if arr.max() == arr.min():
        with pytest.raises(DegenerateTreatment):
            normalize_treatment(arr)
        return
    out = normalize_treatment(arr)
    lo, hi = arr.min(), arr.max()
    # independent elementwise oracle
    expect = [(v - lo) / (hi - lo) for v in raw]
    np.testing.assert_allclose(out, expect, rtol=0, atol=0)
    assert out.min() == 0.0 and out.max() == 1.0
    assert np.all((out >= 0) & (out <= 1))


# ------------------------------------------------------------- Interval


def test_interval_basic():
    iv = Interval(2, 4, 10)
    assert iv.lo_frac == 0.2
    assert iv.hi_frac == 0.4
    assert iv.length == pytest.approx(0.2)
    assert "0.2" in str(iv) and "0.4" in str(iv)


def test_interval_validation():
    with pytest.raises(ValueError):
        Interval(4, 4, 10)
    with pytest.raises(ValueError):
        Interval(-1, 3, 10)
    with pytest.raises(ValueError):
        Interval(0, 11, 10)
    with pytest.raises(ValueError):
        Interval(0, 1, 0)


def test_interval_membership_half_open_dyadic():
    # m = 8 makes every boundary exactly representable, so the half-open
    # convention is checked without rounding ambiguity
    iv = Interval(2, 4, 8)
    assert iv.contains(0.25)
    assert iv.contains(0.25 + 1e-9)
    assert iv.contains(0.5 - 1e-9)
    assert not iv.contains(0.5)
    assert not iv.contains(0.25 - 1e-9)


def test_interval_right_closure_at_one():
    last = Interval(6, 8, 8)
    assert last.contains(1.0)
    inner = Interval(0, 8, 8)
    assert inner.contains(1.0)


@given(m=st.integers(1, 64), data=st.data())
def test_grid_round_trip_exact(m, data):
    lo = data.draw(st.integers(0, m - 1))
    hi = data.draw(st.integers(lo + 1, m))
    iv = Interval(lo, hi, m)
    assert Fraction(iv.lo, iv.m) == Fraction(lo, m)
    assert Fraction(iv.hi, iv.m) == Fraction(hi, m)
    assert iv.length == (hi - lo) / m


# ------------------------------------------------------------- Partition


def edges_to_partition(edges, m):
    ivs = [Interval(a, b, m) for a, b in zip(edges[:-1], edges[1:])]
    return Partition(tuple(ivs))


def test_partition_validation():
    m = 10
    with pytest.raises(ValueError):
        Partition(())
    with pytest.raises(ValueError):  # gap
        Partition((Interval(0, 3, m), Interval(4, 10, m)))
    with pytest.raises(ValueError):  # does not start at 0
        Partition((Interval(1, 10, m),))
    with pytest.raises(ValueError):  # does not end at m
        Partition((Interval(0, 9, m),))
    with pytest.raises(ValueError):  # mixed grids
        Partition((Interval(0, 5, 10), Interval(5, 12, 12)))


@given(m=st.integers(1, 48), data=st.data())
@settings(max_examples=200)
def test_partition_membership_determinism(m, data):
    k = data.draw(st.integers(0, min(m - 1, 6)))
    cuts = sorted(data.draw(st.sets(st.integers(1, m - 1), min_size=k, max_size=k))) if m > 1 else []
    part = edges_to_partition([0] + cuts + [m], m)
    # integer-exact total length
    assert sum(Fraction(iv.hi - iv.lo, m) for iv in part.intervals) == 1
    a = data.draw(st.floats(0.0, 1.0, allow_nan=False))
    hits = [iv for iv in part.intervals if iv.contains(a)]
    assert len(hits) == 1
    # locate agrees with the unique containing interval
    assert part.intervals[part.locate(a)] is hits[0]


def test_partition_boundaries():
    part = edges_to_partition([0, 4, 7, 10], 10)
    assert part.size == 3
    assert part.m == 10
    np.testing.assert_allclose(part.boundaries(), [0.4, 0.7])
    assert part.edges() == [0, 4, 7, 10]


def test_grid_cell_edges():
    assert grid_cell(0.0, 10) == 0
    assert grid_cell(1.0, 10) == 9  # right closure folds into last cell
    assert grid_cell(0.35, 160) == 56
    cells = grid_cell(np.array([0.0, 0.5, 1.0]), 4)
    np.testing.assert_array_equal(cells, [0, 2, 3])


# ------------------------------------------------------------ Dataset


def make_ds(n=5, p=2, seed=0):
    rng = np.random.default_rng(seed)
    return Dataset(
        covariates=rng.normal(size=(n, p)),
        treatments=rng.random(n),
        outcomes=rng.normal(size=n),
    )


def test_validate_ok():
    validate_dataset(make_ds())  # must not raise


def test_validate_treatment_out_of_range():
    d = make_ds()
    t = d.treatments.copy()
    t[2] = 1.5
    bad = Dataset(d.covariates, t, d.outcomes)
    with pytest.raises(InvalidData) as exc:
        validate_dataset(bad)
    assert exc.value.field == "treatments"
    assert exc.value.row == 2


def test_validate_length_mismatch():
    d = make_ds()
    bad = Dataset(d.covariates, d.treatments, d.outcomes[:-1])
    with pytest.raises(InvalidData) as exc:
        validate_dataset(bad)
    assert exc.value.field == "outcomes"
    assert exc.value.row is None


def test_validate_nonfinite_covariate():
    d = make_ds()
    c = d.covariates.copy()
    c[3, 1] = np.nan
    with pytest.raises(InvalidData) as exc:
        validate_dataset(Dataset(c, d.treatments, d.outcomes))
    assert exc.value.field == "covariates"
    assert exc.value.row == 3


def test_validate_empty():
    bad = Dataset(np.zeros((0, 2)), np.zeros(0), np.zeros(0))
    with pytest.raises(InvalidData):
        validate_dataset(bad)


def test_dataset_shape_and_immutability():
    d = make_ds(n=7, p=3)
    assert d.n == 7 and d.p == 3
    with pytest.raises(ValueError):
        d.covariates[0, 0] = 99.0


def test_dataset_intercept_only():
    d = Dataset(np.zeros((4, 0)), np.linspace(0, 1, 4), np.arange(4.0))
    validate_dataset(d)
    assert d.p == 0


# ------------------------------------------------------- segment models


def test_linear_predict_matches_hand_oracle():
    theta = np.array([1.0, 2.0, -1.0])
    model = Linear(theta)
    X = np.array([[0.5, 0.25], [0.0, 0.0]])
    # hand oracle: 1 + 2*0.5 - 1*0.25 = 1.75 ; intercept only = 1
    np.testing.assert_allclose(model.predict_batch(X), [1.75, 1.0])
    assert model.predict(np.array([0.5, 0.25])) == pytest.approx(1.75)


def test_linear_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        Linear(np.array([1.0, 2.0])).predict_batch(np.zeros((3, 4)))


# ------------------------------------------------------------- JilFit


def test_jilfit_alignment_checked():
    part = edges_to_partition([0, 5, 10], 10)
    good = JilFit(
        partition=part,
        models=(Linear(np.zeros(3)), Linear(np.zeros(3))),
        m=10,
        lam=0.0,
        gamma=0.1,
        objective=1.0,
    )
    assert good.partition.size == 2
    with pytest.raises(ValueError):
        JilFit(part, (Linear(np.zeros(3)),), 10, 0.0, 0.1, 1.0)
    with pytest.raises(ValueError):
        JilFit(part, (Linear(np.zeros(3)), Linear(np.zeros(3))), 12, 0.0, 0.1, 1.0)

"""Simulation scenarios, ground-truth values, and replication drivers.

Five generative models share the frame X ~ Unif[-1,1]^p, A ~ Unif[0,1],
Y | X, A ~ N(Q(X, A), 1). Scenarios 1-3 are piecewise constant in the
treatment (jumps at known change points); scenario 4 is tent-shaped in a
and scenario 5 quadratic in a with an interior per-x maximizer.

Gaussian noise comes from an in-repo Box-Muller transform over the
generator's uniform stream, so datasets are reproducible bit for bit from
a seed across platforms. Replications derive per-replication seeds from
(seed, rep index), making results independent of worker scheduling.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .core import Dataset, grid_cell, make_grid
from .errors import BadSpec, MissingTruth
from .fit import fit_ljil
from .policy import I2dr, UniformRandom, estimate_value, fit_propensity, recommend_batch, select_dose
from .tuning import default_gamma

__all__ = [
    "ScenarioSpec",
    "TruthOracle",
    "gauss",
    "gen_scenario",
    "true_optimal_value",
    "policy_value_mc",
    "integrated_l2_loss",
    "theta_path",
    "replicate_table1",
    "resolve_workers",
]

_MIN_P = {1: 2, 2: 2, 3: 2, 4: 2, 5: 3}


@dataclass(frozen=True)
class ScenarioSpec:
    """One generative setting: scenario id 1-5, sample size, dimension, seed."""

    id: int
    n: int
    p: int
    seed: int

    def __post_init__(self):
        if self.id not in _MIN_P:
            raise BadSpec(f"scenario id must be 1..5, got {self.id}")
        if self.n < 1:
            raise BadSpec(f"n must be >= 1, got {self.n}")
        if self.p < _MIN_P[self.id]:
            raise BadSpec(f"scenario {self.id} needs p >= {_MIN_P[self.id]}, got {self.p}")


@dataclass(frozen=True)
class TruthOracle:
    """Ground truth for a scenario: Q, jump locations, coefficient path.

    q(x, a) evaluates the outcome regression for one row or a batch.
    true_change_points / true_theta are None when the scenario has no jumps
    or no linear-in-x representation.
    """

    scenario: ScenarioSpec
    q: object
    true_change_points: object = None
    true_theta: object = None


def gauss(rng: np.random.Generator, size: int) -> np.ndarray:
    """Standard normal draws via Box-Muller over the generator's uniforms."""
    u1 = rng.random(size)
    u2 = rng.random(size)
    return np.sqrt(-2.0 * np.log1p(-u1)) * np.cos(2.0 * np.pi * u2)


# ------------------------------------------------------------- scenarios


def _q_s1(X, A):
    x1, x2 = X[..., 0], X[..., 1]
    return np.where(A < 0.35, 1.0 + x1, np.where(A < 0.65, x1 - x2, 1.0 - x2))


def _sup_s1(X):
    x1, x2 = X[..., 0], X[..., 1]
    return np.maximum(1.0 + x1, np.maximum(x1 - x2, 1.0 - x2))


def _q_s2(X, A):
    x1, x2 = X[..., 0], X[..., 1]
    return np.where(
        A < 0.35,
        1.0 + x1**3,
        np.where(A < 0.65, x1 - np.log(1.5 + x2), 1.0 - np.sin(0.5 * np.pi * x2)),
    )


def _sup_s2(X):
    x1, x2 = X[..., 0], X[..., 1]
    return np.maximum(
        1.0 + x1**3, np.maximum(x1 - np.log(1.5 + x2), 1.0 - np.sin(0.5 * np.pi * x2))
    )


def _q_s3(X, A):
    x1, x2 = X[..., 0], X[..., 1]
    b4 = np.broadcast_to(0.5, np.broadcast_shapes(np.shape(A), x1.shape))
    return np.where(
        A < 0.25,
        np.sqrt(x1 / 2.0 + 0.5),
        np.where(
            A < 0.5,
            np.sin(2.0 * np.pi * x2),
            np.where(A < 0.75, 0.5 - (x1 + x2 - 0.75) ** 2, b4),
        ),
    )


def _sup_s3(X):
    x1, x2 = X[..., 0], X[..., 1]
    out = np.maximum(np.sqrt(x1 / 2.0 + 0.5), np.sin(2.0 * np.pi * x2))
    out = np.maximum(out, 0.5 - (x1 + x2 - 0.75) ** 2)
    return np.maximum(out, 0.5)


def _s4_slope(X):
    return 1.0 + 2.0 * X[..., 0] - 2.0 * X[..., 1]


def _q_s4(X, A):
    return 2.0 * np.abs(np.asarray(A) - 0.5) * _s4_slope(X)


def _sup_s4(X):
    # 2|a - 0.5| peaks at either endpoint; a = 0.5 gives 0 when the slope
    # is negative
    return np.maximum(_s4_slope(X), 0.0)


def _q_s5(X, A):
    x1, x2, x3 = X[..., 0], X[..., 1], X[..., 2]
    g = 1.0 + 0.5 * x1 + 0.5 * x2 - 2.0 * np.asarray(A)
    return 8.0 + 4.0 * x1 - 2.0 * x2 - 2.0 * x3 - 10.0 * g * g


def _sup_s5(X):
    # the maximizer a = 0.5 + 0.25 (x1 + x2) always lies inside [0, 1]
    x1, x2, x3 = X[..., 0], X[..., 1], X[..., 2]
    return 8.0 + 4.0 * x1 - 2.0 * x2 - 2.0 * x3


def _theta_s1(p):
    th = np.zeros((3, p + 1))
    th[0, 0], th[0, 1] = 1.0, 1.0
    th[1, 1], th[1, 2] = 1.0, -1.0
    th[2, 0], th[2, 2] = 1.0, -1.0

    def theta0(a):
        a = np.asarray(a, dtype=float)
        seg = np.where(a < 0.35, 0, np.where(a < 0.65, 1, 2))
        return th[seg]

    return theta0


_SCENARIOS = {
    1: (_q_s1, _sup_s1, [0.35, 0.65]),
    2: (_q_s2, _sup_s2, [0.35, 0.65]),
    3: (_q_s3, _sup_s3, [0.25, 0.5, 0.75]),
    4: (_q_s4, _sup_s4, None),
    5: (_q_s5, _sup_s5, None),
}


def _wrap_q(qfn):
    def q(x, a):
        out = qfn(np.asarray(x, dtype=float), np.asarray(a, dtype=float))
        return float(out) if np.ndim(out) == 0 else out

    return q


def _make_oracle(spec: ScenarioSpec) -> TruthOracle:
    qfn, _, cuts = _SCENARIOS[spec.id]
    theta0 = _theta_s1(spec.p) if spec.id == 1 else None
    return TruthOracle(spec, _wrap_q(qfn), cuts, theta0)


def gen_scenario(spec: ScenarioSpec):
    """Draw one dataset from the scenario; returns (Dataset, TruthOracle).

    Draw order from the seeded generator: covariates, treatments, noise.
    """
    rng = np.random.default_rng(spec.seed)
    X = rng.uniform(-1.0, 1.0, (spec.n, spec.p))
    A = rng.random(spec.n)
    eps = gauss(rng, spec.n)
    qfn = _SCENARIOS[spec.id][0]
    Y = qfn(X, A) + eps
    return Dataset(X, A, Y), _make_oracle(spec)


def true_optimal_value(spec: ScenarioSpec, n_mc: int, seed: int) -> float:
    """Monte-Carlo E[sup_a Q(X, a)] using the closed-form per-x maximizer."""
    if n_mc < 1000:
        raise ValueError(f"n_mc must be >= 1000, got {n_mc}")
    X = np.random.default_rng(seed).uniform(-1.0, 1.0, (n_mc, spec.p))
    return float(np.mean(_SCENARIOS[spec.id][1](X)))


def policy_value_mc(rule: I2dr, pref, spec: ScenarioSpec, n_mc: int, seed: int) -> float:
    """Value of a fitted rule under a dose preference, by fresh-draw MC.

    Uses the scenario's exact Q with no outcome noise.
    """
    X = np.random.default_rng(seed).uniform(-1.0, 1.0, (n_mc, spec.p))
    idx = recommend_batch(rule, X)
    ivs = rule.fit.partition.intervals
    if isinstance(pref, UniformRandom):
        lo = np.array([iv.lo_frac for iv in ivs])[idx]
        ln = np.array([iv.length for iv in ivs])[idx]
        doses = lo + pref._rng.random(n_mc) * ln
    else:
        doses = np.array([select_dose(iv, pref) for iv in ivs])[idx]
    return float(np.mean(_SCENARIOS[spec.id][0](X, doses)))


def theta_path(fit, a: np.ndarray) -> np.ndarray:
    """Piecewise coefficient path theta_hat(a), one row per value of a."""
    if fit.method != "ljil":
        raise ValueError("coefficient paths are defined for linear fits only")
    thetas = np.stack([mod.theta for mod in fit.models])
    return thetas[fit.partition.locate_cells(grid_cell(np.asarray(a, dtype=float), fit.m))]


def integrated_l2_loss(fit, oracle: TruthOracle, n_quad: int = 10_000) -> float:
    """Midpoint-rule integral of ||theta_hat(a) - theta_0(a)||^2 over [0, 1]."""
    if oracle.true_theta is None:
        raise MissingTruth(f"scenario {oracle.scenario.id} has no linear coefficient truth")
    if n_quad < 1:
        raise ValueError(f"n_quad must be >= 1, got {n_quad}")
    nodes = (np.arange(n_quad) + 0.5) / n_quad
    diff = theta_path(fit, nodes) - oracle.true_theta(nodes)
    return float(np.mean(np.sum(diff * diff, axis=1)))


# ------------------------------------------------------------ replication


def resolve_workers(workers) -> int:
    """None -> serial; 0 -> one per CPU; otherwise the requested count."""
    if workers is None:
        return 1
    workers = int(workers)
    if workers == 0:
        return os.cpu_count() or 1
    return max(1, workers)


def _rep_seed(seed: int, rep: int) -> int:
    return int(np.random.SeedSequence((seed, rep)).generate_state(1, np.uint64)[0])


def _table1_rep(args):
    scenario, n, p, c, lam, gamma, alpha, seed, rep = args
    spec = ScenarioSpec(scenario, n, p, _rep_seed(seed, rep))
    d, oracle = gen_scenario(spec)
    m = make_grid(n, c)
    fit = fit_ljil(d, m, lam, gamma)
    rule = I2dr(fit)
    prop = fit_propensity(d, fit.partition)
    rep_value = estimate_value(d, rule, prop, alpha)
    l2 = integrated_l2_loss(fit, oracle) if oracle.true_theta is not None else None
    return {
        "v_hat": rep_value.v_hat,
        "sigma_hat": rep_value.sigma_hat,
        "ci_lo": rep_value.ci_lo,
        "ci_hi": rep_value.ci_hi,
        "n_segments": fit.partition.size,
        "boundaries": fit.partition.boundaries(),
        "l2": l2,
    }


def replicate_table1(
    reps: int,
    n: int,
    seed: int,
    scenario: int = 1,
    p: int = 4,
    c: float = 5.0,
    lam: float = 0.0,
    gamma: float = None,
    alpha: float = 0.05,
    v_opt: float = None,
    workers=None,
) -> dict:
    """Full-pipeline replications: generate, fit, estimate value, aggregate.

    Defaults mirror the headline simulation: m = n/5, lam = 0,
    gamma = 4 log(n)/n. Coverage counts replications whose CI contains
    v_opt (estimated by a 10^6-draw MC when not supplied).
    """
    if gamma is None:
        gamma = default_gamma(n)
    if v_opt is None:
        v_opt = true_optimal_value(ScenarioSpec(scenario, n, p, seed), 10**6, seed)
    arglist = [(scenario, n, p, c, lam, gamma, alpha, seed, r) for r in range(reps)]
    w = resolve_workers(workers)
    if w > 1:
        with ProcessPoolExecutor(max_workers=w) as pool:
            records = list(pool.map(_table1_rep, arglist))
    else:
        records = [_table1_rep(a) for a in arglist]
    for r in records:
        r["covered"] = bool(r["ci_lo"] <= v_opt <= r["ci_hi"])
    l2s = [r["l2"] for r in records if r["l2"] is not None]
    return {
        "mean_v_hat": float(np.mean([r["v_hat"] for r in records])),
        "mean_sigma_hat": float(np.mean([r["sigma_hat"] for r in records])),
        "coverage_pct": 100.0 * float(np.mean([r["covered"] for r in records])),
        "mean_segments": float(np.mean([r["n_segments"] for r in records])),
        "mean_l2": float(np.mean(l2s)) if l2s else None,
        "v_opt": float(v_opt),
        "records": records,
    }

"""Penalized dynamic-programming segmentation of the treatment grid.

Minimizes sum_I cost(I) + gamma * |P| over all grid-aligned partitions of
[0, 1]. The Bellman recursion runs over right endpoints r = 1..m with
B(0) = -gamma and

    B(r) = min_{j in R_r} { B(j) + gamma + cost([j/m, r/m)) },

where the candidate set R_r either contains every j < r (exact DP) or is
pruned in the PELT style: a predecessor j survives into R_r only while

    B(j) + cost([j/m, (r-1)/m)) <= B(r-1).

Zero-slack pruning is exact when splitting an interval never increases total
cost (true for least-squares costs); the prune switch makes any divergence
on other cost structures observable against dp_no_prune.

The cost function argument is a callable (lo, hi) -> float over grid index
pairs 0 <= lo < hi <= m. Reported objectives are recomputed from the
backtracked partition by left-to-right summation, so all three solvers
return bit-identical numbers whenever their partitions agree.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Partition
from .errors import GridTooLarge, InvalidPenalty

__all__ = [
    "BellmanState",
    "bellman_tables",
    "dp_no_prune",
    "enumerate_partitions",
    "pelt",
]

_ENUM_MAX_M = 16


@dataclass(frozen=True)
class BellmanState:
    """DP tables: values B(0..m), predecessors, and per-step candidate sets."""

    B: np.ndarray
    pred: np.ndarray
    R: tuple


def _check_gamma(gamma: float):
    if not (isinstance(gamma, (int, float, np.floating)) and math.isfinite(gamma)) or gamma < 0:
        raise InvalidPenalty(f"gamma must be finite and >= 0, got {gamma!r}")


def bellman_tables(costfn, m: int, gamma: float, prune: bool = True) -> BellmanState:
    """Run the recursion and return the full DP state."""
    _check_gamma(gamma)
    if m < 1:
        raise ValueError(f"grid resolution must be >= 1, got {m}")
    gamma = float(gamma)
    B = np.empty(m + 1)
    B[0] = -gamma
    pred = np.zeros(m + 1, dtype=np.int64)
    R_hist = [(0,)]
    R = [0]
    for r in range(1, m + 1):
        if prune:
            if r > 1:
                prev = B[r - 1]
                R = [
                    j
                    for j in R + [r - 1]
                    if B[j] + (costfn(j, r - 1) if j < r - 1 else 0.0) <= prev
                ]
        else:
            R = list(range(r))
        R_hist.append(tuple(R))
        best_j = R[0]
        best_v = B[best_j] + gamma + costfn(best_j, r)
        for j in R[1:]:
            v = B[j] + gamma + costfn(j, r)
            if v < best_v:  # ties keep the smallest j
                best_v = v
                best_j = j
        B[r] = best_v
        pred[r] = best_j
    return BellmanState(B=B, pred=pred, R=tuple(R_hist))


def _backtrack_edges(pred: np.ndarray, m: int) -> list:
    edges = [m]
    r = m
    while r > 0:
        r = int(pred[r])
        edges.append(r)
    edges.reverse()
    return edges


def _objective(costfn, edges, gamma: float) -> float:
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        total += costfn(lo, hi)
    return total + gamma * (len(edges) - 1)


def pelt(costfn, m: int, gamma: float, prune: bool = True):
    """Penalized segmentation with (optionally pruned) DP.

    Returns (Partition, objective) where objective = sum of interval costs
    plus gamma per interval.
    """
    state = bellman_tables(costfn, m, gamma, prune=prune)
    edges = _backtrack_edges(state.pred, m)
    part = Partition.from_edges(edges, m)
    return part, _objective(costfn, edges, float(gamma))


def dp_no_prune(costfn, m: int, gamma: float):
    """Exact DP over all predecessors (reference implementation)."""
    return pelt(costfn, m, gamma, prune=False)


def enumerate_partitions(costfn, m: int, gamma: float):
    """Exhaustive minimizer over all 2^(m-1) boundary subsets (oracle).

    Ties break toward fewer intervals, then the lexicographically smallest
    boundary set. Guarded to m <= 16.
    """
    _check_gamma(gamma)
    if m < 1:
        raise ValueError(f"grid resolution must be >= 1, got {m}")
    if m > _ENUM_MAX_M:
        raise GridTooLarge(f"enumeration supports m <= {_ENUM_MAX_M}, got {m}")
    gamma = float(gamma)
    best_key = None
    best_edges = None
    for mask in range(1 << (m - 1)):
        cuts = tuple(j + 1 for j in range(m - 1) if mask >> j & 1)
        edges = (0,) + cuts + (m,)
        obj = _objective(costfn, edges, gamma)
        key = (obj, len(edges) - 1, cuts)
        if best_key is None or key < best_key:
            best_key = key
            best_edges = edges
    part = Partition.from_edges(list(best_edges), m)
    return part, best_key[0]

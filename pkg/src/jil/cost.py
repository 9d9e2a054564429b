"""Per-interval ridge regression and cost evaluation.

The per-interval estimator solves

    theta_I = (sum_i xbar_i xbar_i^T 1(A_i in I) + n*lam*|I|*Id)^{-1}
              (sum_i xbar_i Y_i 1(A_i in I)),         xbar = (1, x^T)^T,

and the interval cost is

    cost(I) = (1/n) sum_i 1(A_i in I) {Y_i - xbar_i^T theta_I}^2
              + lam * |I| * ||theta_I||^2.

Both are computed through one symmetric eigendecomposition of the interval
Gram matrix, G = U diag(tau) U^T with phi = U^T b. Substituting the spectral
form gives, writing w_j = 1/(tau_j + n*lam*|I|),

    residual SSE = syy - 2 sum_j w_j phi_j^2 + sum_j tau_j w_j^2 phi_j^2
    ||theta||^2  = sum_j w_j^2 phi_j^2 ,

so a whole grid of lam values reuses a single factorization. When lam = 0,
eigenvalues clamped to zero are dropped (w_j = 0), which yields the
minimum-norm solution on singular designs.

CostCache stores one factorization per grid interval plus the cost vector
over a fixed lam grid; the optional bulk precompute factorizes every
interval at once from prefix sums over grid cells.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np

from .core import Dataset, Interval, grid_cell, make_xbar

__all__ = [
    "GramFactor",
    "CostCache",
    "cache_get",
    "cost",
    "gram_factor",
    "multi_lambda_costs",
    "ridge_fit",
]

# eigenvalues below this fraction of the largest are treated as exact nulls
_CLAMP_REL = 1e-10


@dataclass(frozen=True)
class GramFactor:
    """Eigendecomposition of one interval's Gram matrix plus outcome moments.

    U diag(tau) U^T reconstructs sum xbar xbar^T over the interval's rows;
    phi = U^T sum xbar*y; syy = sum y^2; count = rows in the interval.
    """

    U: np.ndarray
    tau: np.ndarray
    phi: np.ndarray
    syy: float
    count: int


def _validate_lambdas(lambdas) -> np.ndarray:
    arr = np.asarray(lambdas, dtype=float).ravel()
    if arr.size == 0:
        raise ValueError("lambda grid must be non-empty")
    if np.any(arr < 0) or not np.all(np.isfinite(arr)):
        raise ValueError("lambda values must be finite and non-negative")
    if np.any(np.diff(arr) < 0):
        raise ValueError("lambda grid must be sorted ascending")
    return arr


def _factorize(Gs: np.ndarray, bs: np.ndarray):
    """Eigendecompose a stack of Gram matrices; returns (U, tau, phi) stacks.

    One code path serves both the scalar (K=1) and bulk cases so their
    results are bit-identical.
    """
    tau, U = np.linalg.eigh(Gs)
    thr = _CLAMP_REL * np.maximum(tau[:, -1:], 0.0)
    tau = np.where(tau < thr, 0.0, tau)
    phi = np.einsum("kij,ki->kj", U, bs)
    return U, tau, phi


def _spectral_costs(tau, phi, syy, ilen, n, lambdas) -> np.ndarray:
    """Costs (K, H) for stacked factors over a lambda grid.

    tau, phi: (K, d); syy, ilen: (K,); lambdas: (H,).
    """
    lambdas = np.asarray(lambdas, dtype=float)
    ph2 = phi * phi
    denom = tau[:, None, :] + n * lambdas[None, :, None] * ilen[:, None, None]
    dinv = np.where(denom > 0.0, 1.0 / np.where(denom > 0.0, denom, 1.0), 0.0)
    resid = (
        syy[:, None]
        - 2.0 * np.einsum("khd,kd->kh", dinv, ph2)
        + np.einsum("khd,kd->kh", dinv * dinv, ph2 * tau)
    )
    resid = np.maximum(resid, 0.0)
    norm2 = np.einsum("khd,kd->kh", dinv * dinv, ph2)
    return resid / n + lambdas[None, :] * ilen[:, None] * norm2


def _spectral_thetas(U, tau, phi, ilen, n, lam) -> np.ndarray:
    """Coefficients (K, d) for stacked factors at a single lambda."""
    denom = tau + n * lam * ilen[:, None]
    dinv = np.where(denom > 0.0, 1.0 / np.where(denom > 0.0, denom, 1.0), 0.0)
    return np.einsum("kij,kj->ki", U, dinv * phi)


def _interval_moments(d: Dataset, I: Interval):
    """Direct (mask-based) Gram moments of one interval."""
    cells = grid_cell(d.treatments, I.m)
    mask = (cells >= I.lo) & (cells < I.hi)
    Xb = make_xbar(d.covariates[mask])
    y = d.outcomes[mask]
    G = Xb.T @ Xb
    b = Xb.T @ y
    return G, b, float(y @ y), int(mask.sum())


def gram_factor(d: Dataset, I: Interval) -> GramFactor:
    """Eigendecomposition of the interval Gram matrix (direct path)."""
    G, b, syy, count = _interval_moments(d, I)
    U, tau, phi = _factorize(G[None], b[None])
    return GramFactor(U=U[0], tau=tau[0], phi=phi[0], syy=syy, count=count)


def ridge_fit(d: Dataset, I: Interval, lam: float) -> np.ndarray:
    """Per-interval ridge coefficients; min-norm when lam = 0 and singular."""
    f = gram_factor(d, I)
    ilen = np.array([I.length])
    return _spectral_thetas(f.U[None], f.tau[None], f.phi[None], ilen, d.n, lam)[0]


def multi_lambda_costs(d: Dataset, I: Interval, lambdas) -> np.ndarray:
    """Interval costs over a sorted non-negative lambda grid, one factorization."""
    lams = _validate_lambdas(lambdas)
    f = gram_factor(d, I)
    ilen = np.array([I.length])
    return _spectral_costs(
        f.tau[None], f.phi[None], np.array([f.syy]), ilen, d.n, lams
    )[0]


def cost(d: Dataset, I: Interval, lam: float) -> float:
    """Penalized least-squares cost of one interval."""
    return float(multi_lambda_costs(d, I, np.array([float(lam)]))[0])


def _pair_index(lo: int, hi: int, m: int) -> int:
    """Position of (lo, hi) in the row-major upper-triangle pair listing."""
    return lo * m - (lo * (lo - 1)) // 2 + (hi - lo - 1)


class CostCache:
    """Memoized interval costs for one dataset on one grid.

    Gram moments come from prefix sums over grid cells, so each interval is a
    single subtraction; a symmetric eigendecomposition per interval is cached
    together with its cost vector over the configured lambda grid. Lookups of
    a cached entry return bit-identical values. Concurrent readers are safe;
    insertions take a lock.
    """

    def __init__(self, dataset: Dataset, m: int, lambdas=(0.0,), precompute: bool = False):
        if m < 1:
            raise ValueError(f"grid resolution must be >= 1, got {m}")
        self.dataset = dataset
        self.m = int(m)
        self.lambdas = _validate_lambdas(lambdas)
        self._lam_index = {float(l): h for h, l in enumerate(self.lambdas)}
        self._lock = threading.Lock()
        self._factors: dict = {}
        self._costs: dict = {}
        self._build_prefix()
        self._bulk = None
        if precompute:
            self._precompute_all()

    # ---------------------------------------------------------- internals

    def _build_prefix(self):
        d = self.dataset
        m = self.m
        cells = grid_cell(d.treatments, m)
        order = np.argsort(cells, kind="stable")
        xb = make_xbar(d.covariates)[order]
        y = d.outcomes[order]
        outer = xb[:, :, None] * xb[:, None, :]
        dim = xb.shape[1]
        # prefix sums at cell boundaries: row j holds the sum over cells < j
        csum_xx = np.concatenate([np.zeros((1, dim, dim)), np.cumsum(outer, axis=0)])
        csum_xy = np.concatenate([np.zeros((1, dim)), np.cumsum(xb * y[:, None], axis=0)])
        csum_yy = np.concatenate([[0.0], np.cumsum(y * y)])
        bnd = np.searchsorted(cells[order], np.arange(m + 1))
        self._Cxx = csum_xx[bnd]
        self._Cxy = csum_xy[bnd]
        self._Cyy = csum_yy[bnd]
        self._Ccnt = bnd
        self._dim = dim

    def _moments(self, lo: int, hi: int):
        G = self._Cxx[hi] - self._Cxx[lo]
        b = self._Cxy[hi] - self._Cxy[lo]
        syy = float(self._Cyy[hi] - self._Cyy[lo])
        count = int(self._Ccnt[hi] - self._Ccnt[lo])
        return G, b, syy, count

    def _precompute_all(self):
        m = self.m
        los, his = np.triu_indices(m + 1, k=1)
        Gs = self._Cxx[his] - self._Cxx[los]
        bs = self._Cxy[his] - self._Cxy[los]
        syy = self._Cyy[his] - self._Cyy[los]
        cnt = self._Ccnt[his] - self._Ccnt[los]
        ilen = (his - los) / m
        U, tau, phi = _factorize(Gs, bs)
        costs = _spectral_costs(tau, phi, syy, ilen, self.dataset.n, self.lambdas)
        self._bulk = {"U": U, "tau": tau, "phi": phi, "syy": syy, "cnt": cnt, "costs": costs}

    def _check_pair(self, lo: int, hi: int):
        if not (0 <= lo < hi <= self.m):
            raise ValueError(f"invalid interval indices ({lo}, {hi}) on grid {self.m}")

    # ------------------------------------------------------------- access

    def factor(self, lo: int, hi: int) -> GramFactor:
        """Cached eigendecomposition for the interval [lo/m, hi/m)."""
        self._check_pair(lo, hi)
        if self._bulk is not None:
            k = _pair_index(lo, hi, self.m)
            b = self._bulk
            return GramFactor(
                U=b["U"][k], tau=b["tau"][k], phi=b["phi"][k],
                syy=float(b["syy"][k]), count=int(b["cnt"][k]),
            )
        key = (lo, hi)
        f = self._factors.get(key)
        if f is None:
            G, bvec, syy, count = self._moments(lo, hi)
            U, tau, phi = _factorize(G[None], bvec[None])
            f = GramFactor(U=U[0], tau=tau[0], phi=phi[0], syy=syy, count=count)
            with self._lock:
                f = self._factors.setdefault(key, f)
        return f

    def cost_vector(self, lo: int, hi: int) -> np.ndarray:
        """Costs over the configured lambda grid for one interval."""
        self._check_pair(lo, hi)
        if self._bulk is not None:
            return self._bulk["costs"][_pair_index(lo, hi, self.m)]
        key = (lo, hi)
        vec = self._costs.get(key)
        if vec is None:
            f = self.factor(lo, hi)
            ilen = np.array([(hi - lo) / self.m])
            vec = _spectral_costs(
                f.tau[None], f.phi[None], np.array([f.syy]), ilen,
                self.dataset.n, self.lambdas,
            )[0]
            with self._lock:
                vec = self._costs.setdefault(key, vec)
        return vec

    def get(self, lo: int, hi: int, lam: float) -> float:
        """Cost at one lambda; off-grid lambdas recompute from the factor."""
        h = self._lam_index.get(float(lam))
        if h is not None:
            return float(self.cost_vector(lo, hi)[h])
        f = self.factor(lo, hi)
        ilen = np.array([(hi - lo) / self.m])
        return float(
            _spectral_costs(
                f.tau[None], f.phi[None], np.array([f.syy]), ilen,
                self.dataset.n, np.array([float(lam)]),
            )[0, 0]
        )

    def theta(self, lo: int, hi: int, lam: float) -> np.ndarray:
        """Ridge coefficients for one interval from the cached factor."""
        f = self.factor(lo, hi)
        ilen = np.array([(hi - lo) / self.m])
        return _spectral_thetas(
            f.U[None], f.tau[None], f.phi[None], ilen, self.dataset.n, float(lam)
        )[0]

    def costfn(self, lam: float):
        """Closure (lo, hi) -> cost at a fixed lambda, for the segmenter."""
        lam = float(lam)
        h = self._lam_index.get(lam)
        if self._bulk is not None and h is not None:
            m = self.m
            table = np.full((m + 1, m + 1), np.nan)
            los, his = np.triu_indices(m + 1, k=1)
            table[los, his] = self._bulk["costs"][:, h]

            def fn(lo: int, hi: int) -> float:
                return float(table[lo, hi])

            return fn
        return lambda lo, hi: self.get(lo, hi, lam)


def cache_get(cache: CostCache, d: Dataset, I: Interval, lam: float) -> float:
    """Memoized cost lookup; validates the cache belongs to (d, I.m)."""
    if d is not cache.dataset:
        raise ValueError("cache was built for a different dataset")
    if I.m != cache.m:
        raise ValueError(f"cache grid is {cache.m}, interval grid is {I.m}")
    return cache.get(I.lo, I.hi, lam)

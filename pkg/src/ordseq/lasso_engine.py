"""Coordinate-descent Lasso solvers in data and covariance form.

The data-form solver minimises

    (1/2n) ||Y - X b||_2^2 + lambda ||b||_1

restricted to a variable subset; the covariance form minimises

    -b' gamma + (1/2) b' Gamma b + lambda ||b||_1

for plug-in estimates (Gamma, gamma) of X'X/n and X'Y/n. Both use the same
sweep structure (cycle the active set to convergence, then one full pass
that checks stationarity and admits violators) so that with Gamma = X'X/n
they produce identical iterate sequences up to floating-point rounding.

The per-coordinate cycling is JIT-compiled when numba is available; the
pure-python fallback performs the same operations in the same order.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .data_model import Dataset
from .errors import (
    DegenerateResponse,
    DimensionMismatch,
    InvalidSchedule,
    MaxIterExceeded,
    NotPsdCorrected,
)

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(f):
            return f

        return wrap

DEFAULT_TOL = 1e-7
DEFAULT_MAX_SWEEPS = 20_000


@dataclass(frozen=True)
class LambdaGrid:
    """Strictly decreasing positive tuning parameters."""

    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 1 or values.shape[0] < 1:
            raise InvalidSchedule("lambda grid must be a non-empty vector")
        if np.any(values <= 0) or np.any(np.diff(values) >= 0):
            raise InvalidSchedule("lambda grid must be strictly decreasing and positive")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def L(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class SparseCoef:
    """Sparse coefficient vector with 1-based variable ids."""

    indices: np.ndarray
    values: np.ndarray
    p: int
    intercept: float = 0.0

    def __post_init__(self):
        idx = np.array(self.indices, dtype=int)
        vals = np.array(self.values, dtype=float)
        if idx.shape != vals.shape or idx.ndim != 1:
            raise DimensionMismatch("indices and values must be matching vectors")
        if idx.shape[0]:
            if np.any(np.diff(idx) <= 0):
                raise DimensionMismatch("indices must be strictly increasing")
            if idx[0] < 1 or idx[-1] > self.p:
                raise DimensionMismatch("indices must lie in 1..p")
            if np.any(vals == 0.0):
                keep = vals != 0.0
                idx, vals = idx[keep], vals[keep]
        idx.setflags(write=False)
        vals.setflags(write=False)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", vals)

    @property
    def n_nonzero(self) -> int:
        return self.indices.shape[0]

    def indices0(self) -> np.ndarray:
        return self.indices - 1

    def support(self) -> frozenset:
        return frozenset(int(j) for j in self.indices)

    def to_dense(self) -> np.ndarray:
        b = np.zeros(self.p)
        b[self.indices - 1] = self.values
        return b

    @classmethod
    def zero(cls, p: int, intercept: float = 0.0) -> "SparseCoef":
        return cls(np.empty(0, dtype=int), np.empty(0), p, intercept)

    @classmethod
    def from_dense(cls, b, intercept: float = 0.0) -> "SparseCoef":
        b = np.asarray(b, dtype=float)
        idx0 = np.flatnonzero(b)
        return cls(idx0 + 1, b[idx0], b.shape[0], intercept)


@dataclass(frozen=True)
class SqrtLassoConfig:
    """Early-stopping parameter for the Lasso path (square-root-Lasso scale)."""

    lambda_sq: float = 1.0
    enabled: bool = True

    def __post_init__(self):
        if self.enabled and not self.lambda_sq > 0:
            raise InvalidSchedule("lambda_sq must be positive when enabled")

    @classmethod
    def disabled(cls) -> "SqrtLassoConfig":
        return cls(lambda_sq=1.0, enabled=False)

    @classmethod
    def default(cls, n: int, p: int) -> "SqrtLassoConfig":
        return cls(lambda_sq=default_lambda_sq(n, p), enabled=True)


def soft_threshold(z: float, t: float) -> float:
    """sign(z) * max(|z| - t, 0)."""
    if z > t:
        return z - t
    if z < -t:
        return z + t
    return 0.0


def default_lambda_sq(n: int, p: float) -> float:
    """Half of the rate-optimal square-root-Lasso tuning value 1.1*sqrt(2 log(p)/n)."""
    if p < 2:
        raise InvalidSchedule("p must be >= 2")
    return 0.5 * 1.1 * math.sqrt(2.0 * math.log(p) / n)


def lambda_grid(data: Dataset, L: int, ratio: float | None = None) -> LambdaGrid:
    """Log-spaced grid from lambda_1 = max_j |X_j' Y| / n down to ratio * lambda_1.

    lambda_1 is the smallest value with an all-zero solution; the data is
    expected to be standardized already. ratio defaults to 0.01 when p > n
    and 0.0001 otherwise.
    """
    if L < 1:
        raise InvalidSchedule("L must be >= 1")
    if ratio is None:
        ratio = 0.01 if data.p > data.n else 1e-4
    if not (0 < ratio < 1):
        raise InvalidSchedule("ratio must lie in (0, 1)")
    lam_max = float(np.max(np.abs(data.X.T @ data.Y)) / data.n)
    if lam_max <= 0:
        raise DegenerateResponse("X'Y is identically zero")
    if L == 1:
        return LambdaGrid(np.array([lam_max]))
    values = lam_max * ratio ** (np.arange(L) / (L - 1))
    return LambdaGrid(values)


def lambda_grid_from_gamma(gamma: np.ndarray, L: int, ratio: float) -> LambdaGrid:
    """Grid construction from a plug-in gamma = X'Y/n estimate (missing-data path)."""
    if L < 1:
        raise InvalidSchedule("L must be >= 1")
    if not (0 < ratio < 1):
        raise InvalidSchedule("ratio must lie in (0, 1)")
    lam_max = float(np.max(np.abs(gamma)))
    if lam_max <= 0:
        raise DegenerateResponse("gamma is identically zero")
    if L == 1:
        return LambdaGrid(np.array([lam_max]))
    return LambdaGrid(lam_max * ratio ** (np.arange(L) / (L - 1)))


def sqrt_lasso_stop(residual_norm: float, lam: float, n: int, cfg: SqrtLassoConfig) -> bool:
    """True means keep computing the path.

    Continuation holds iff ||Y - X b||_2 / lambda <= sqrt(n) / lambda_sq;
    the left side only grows as lambda decreases, so the first False ends
    the path. The boundary is inclusive.
    """
    if not cfg.enabled:
        return True
    return residual_norm / lam <= math.sqrt(n) / cfg.lambda_sq


@njit(cache=True)
def _cycle_data_jit(X, r, b, active, cj, lam, tol, max_cycles):  # pragma: no cover
    n = X.shape[0]
    n_updates = 0
    n_cycles = 0
    while n_cycles < max_cycles:
        max_delta = 0.0
        for ii in range(active.shape[0]):
            j = active[ii]
            c = cj[j]
            if c <= 0.0:
                continue
            s = 0.0
            for i in range(n):
                s += X[i, j] * r[i]
            z = s / n + c * b[j]
            if z > lam:
                bj = (z - lam) / c
            elif z < -lam:
                bj = (z + lam) / c
            else:
                bj = 0.0
            d = bj - b[j]
            if d != 0.0:
                for i in range(n):
                    r[i] -= d * X[i, j]
                b[j] = bj
                ad = abs(d)
                if ad > max_delta:
                    max_delta = ad
            n_updates += 1
        n_cycles += 1
        if max_delta < tol:
            break
    return n_updates, n_cycles


@njit(cache=True)
def _cycle_cov_jit(G, q, b, active, cj, gamma, lam, tol, max_cycles):  # pragma: no cover
    p = G.shape[0]
    n_updates = 0
    n_cycles = 0
    while n_cycles < max_cycles:
        max_delta = 0.0
        for ii in range(active.shape[0]):
            j = active[ii]
            c = cj[j]
            if c <= 0.0:
                continue
            z = gamma[j] - q[j] + c * b[j]
            if z > lam:
                bj = (z - lam) / c
            elif z < -lam:
                bj = (z + lam) / c
            else:
                bj = 0.0
            d = bj - b[j]
            if d != 0.0:
                for i in range(p):
                    q[i] += d * G[j, i]
                b[j] = bj
                ad = abs(d)
                if ad > max_delta:
                    max_delta = ad
            n_updates += 1
        n_cycles += 1
        if max_delta < tol:
            break
    return n_updates, n_cycles


def _cycle_data_py(X, r, b, active, cj, lam, tol, max_cycles):
    n = X.shape[0]
    n_updates = 0
    n_cycles = 0
    while n_cycles < max_cycles:
        max_delta = 0.0
        for j in active:
            c = cj[j]
            if c <= 0.0:
                continue
            xj = X[:, j]
            z = (xj @ r) / n + c * b[j]
            bj = soft_threshold(z, lam) / c
            d = bj - b[j]
            if d != 0.0:
                r -= d * xj
                b[j] = bj
                ad = abs(d)
                if ad > max_delta:
                    max_delta = ad
            n_updates += 1
        n_cycles += 1
        if max_delta < tol:
            break
    return n_updates, n_cycles


def _cycle_cov_py(G, q, b, active, cj, gamma, lam, tol, max_cycles):
    n_updates = 0
    n_cycles = 0
    while n_cycles < max_cycles:
        max_delta = 0.0
        for j in active:
            c = cj[j]
            if c <= 0.0:
                continue
            z = gamma[j] - q[j] + c * b[j]
            bj = soft_threshold(z, lam) / c
            d = bj - b[j]
            if d != 0.0:
                q += d * G[j]
                b[j] = bj
                ad = abs(d)
                if ad > max_delta:
                    max_delta = ad
            n_updates += 1
        n_cycles += 1
        if max_delta < tol:
            break
    return n_updates, n_cycles


_cycle_data = _cycle_data_jit if HAVE_NUMBA else _cycle_data_py
_cycle_cov = _cycle_cov_jit if HAVE_NUMBA else _cycle_cov_py


class _SolveStats:
    __slots__ = ("n_updates", "n_sweeps", "converged")

    def __init__(self):
        self.n_updates = 0
        self.n_sweeps = 0
        self.converged = True


def _kkt_violation_from_grad(g, b, subset0, lam):
    g = np.asarray(g)
    sub = np.asarray(subset0, dtype=int)
    bs = b[sub]
    gs = g[sub]
    inactive = bs == 0.0
    worst = 0.0
    if np.any(inactive):
        worst = max(worst, float(np.max(np.abs(gs[inactive])) - lam))
    if np.any(~inactive):
        worst = max(worst, float(np.max(np.abs(gs[~inactive] - lam * np.sign(bs[~inactive])))))
    return max(worst, 0.0)


class DataProblem:
    """Residual-form coordinate descent state for one (X, Y)."""

    def __init__(self, X: np.ndarray, Y: np.ndarray):
        self.X = np.asfortranarray(X, dtype=float)
        self.Y = np.ascontiguousarray(Y, dtype=float)
        self.n, self.p = self.X.shape
        self.col_norms = np.ascontiguousarray(np.einsum("ij,ij->j", self.X, self.X) / self.n)
        self._r = None

    def solve(self, subset0, lam, b=None, tol=DEFAULT_TOL, max_sweeps=DEFAULT_MAX_SWEEPS,
              trace=None):
        """Minimise the subset-restricted Lasso objective.

        b is a dense warm start (modified in place when given). Returns
        (b, residual_norm, stats); per-sweep objective values are appended
        to trace when provided.
        """
        subset0 = np.ascontiguousarray(subset0, dtype=np.int64)
        X, Y, n = self.X, self.Y, self.n
        cj = self.col_norms
        if b is None:
            b = np.zeros(self.p)
        else:
            drop = np.flatnonzero(b)
            drop = drop[~np.isin(drop, subset0)]
            if drop.shape[0]:  # defensive: warm start outside the subset
                b[drop] = 0.0
        r = Y - X @ b if np.any(b) else Y.copy()
        stats = _SolveStats()
        active = np.flatnonzero(b).astype(np.int64)
        admit_tol = 0.5 * tol
        tol_inner = tol

        def objective():
            return 0.5 * float(r @ r) / n + lam * float(np.abs(b).sum())

        if trace is not None:
            trace.append(objective())
        while True:
            if active.shape[0]:
                if trace is None:
                    upd, cyc = _cycle_data(X, r, b, active, cj, lam, tol_inner,
                                           max(max_sweeps - stats.n_sweeps, 1))
                    stats.n_updates += upd
                    stats.n_sweeps += cyc
                else:
                    while True:
                        before = np.array(b[active])
                        upd, _ = _cycle_data(X, r, b, active, cj, lam, tol_inner, 1)
                        stats.n_updates += upd
                        stats.n_sweeps += 1
                        trace.append(objective())
                        if float(np.max(np.abs(b[active] - before))) < tol_inner:
                            break
                        if stats.n_sweeps >= max_sweeps:
                            break
            # refresh the residual from b before checking stationarity, so
            # accumulated update rounding cannot stall convergence
            nz = np.flatnonzero(b)
            r = Y - X[:, nz] @ b[nz] if nz.shape[0] else Y.copy()
            g = (r @ X) / n
            stats.n_sweeps += 1
            kkt = _kkt_violation_from_grad(g, b, subset0, lam)
            viol = subset0[np.abs(g[subset0]) > lam + admit_tol]
            viol = viol[b[viol] == 0.0]
            if viol.shape[0] == 0 and kkt <= tol:
                break
            if np.max(np.abs(b)) > 1e10:  # objective is unbounded below
                stats.converged = False
                warnings.warn("coordinate descent diverged", MaxIterExceeded)
                break
            if stats.n_sweeps >= max_sweeps:
                stats.converged = False
                warnings.warn("coordinate descent hit max_iter", MaxIterExceeded)
                break
            if viol.shape[0] == 0:
                tol_inner = max(tol_inner / 4.0, 1e-16)
            active = np.union1d(np.flatnonzero(b), viol).astype(np.int64)
        return b, float(np.linalg.norm(r)), stats

    def residual_norm(self, b: np.ndarray) -> float:
        return float(np.linalg.norm(self.Y - self.X @ b))

    def kkt_violation(self, b: np.ndarray, subset0, lam: float) -> float:
        """Largest violation of the subset-restricted stationarity conditions."""
        g = (self.Y - self.X @ b) @ self.X / self.n
        return _kkt_violation_from_grad(g, b, subset0, lam)


class CovProblem:
    """Gradient-form coordinate descent on (Gamma, gamma).

    Tracks q = Gamma b so each coordinate update costs O(p). yty and n (when
    given) let the solver report the implied residual norm
    sqrt(max(0, yty - 2n b'gamma + n b'Gamma b)) for early stopping.
    """

    def __init__(self, Gamma, gamma, n=None, yty=None):
        self.Gamma = np.ascontiguousarray(Gamma, dtype=float)
        self.gamma = np.ascontiguousarray(gamma, dtype=float)
        self.p = self.gamma.shape[0]
        if self.Gamma.shape != (self.p, self.p):
            raise DimensionMismatch("Gamma must be p x p")
        self.n = n
        self.yty = yty
        self.diag = np.ascontiguousarray(np.diag(self.Gamma))

    def solve(self, subset0, lam, b=None, tol=DEFAULT_TOL, max_sweeps=DEFAULT_MAX_SWEEPS,
              trace=None):
        subset0 = np.ascontiguousarray(subset0, dtype=np.int64)
        G, gamma = self.Gamma, self.gamma
        cj = self.diag
        if b is None:
            b = np.zeros(self.p)
        else:
            drop = np.flatnonzero(b)
            drop = drop[~np.isin(drop, subset0)]
            if drop.shape[0]:
                b[drop] = 0.0
        q = G @ b if np.any(b) else np.zeros(self.p)
        stats = _SolveStats()
        active = np.flatnonzero(b).astype(np.int64)
        admit_tol = 0.5 * tol
        tol_inner = tol

        def objective():
            return -float(b @ gamma) + 0.5 * float(b @ q) + lam * float(np.abs(b).sum())

        if trace is not None:
            trace.append(objective())
        while True:
            if active.shape[0]:
                if trace is None:
                    upd, cyc = _cycle_cov(G, q, b, active, cj, gamma, lam, tol_inner,
                                          max(max_sweeps - stats.n_sweeps, 1))
                    stats.n_updates += upd
                    stats.n_sweeps += cyc
                else:
                    while True:
                        before = np.array(b[active])
                        upd, _ = _cycle_cov(G, q, b, active, cj, gamma, lam, tol_inner, 1)
                        stats.n_updates += upd
                        stats.n_sweeps += 1
                        trace.append(objective())
                        if float(np.max(np.abs(b[active] - before))) < tol_inner:
                            break
                        if stats.n_sweeps >= max_sweeps:
                            break
            # refresh q = Gamma b from scratch before the stationarity check
            nz = np.flatnonzero(b)
            q = G[:, nz] @ b[nz] if nz.shape[0] else np.zeros(self.p)
            g = gamma - q
            stats.n_sweeps += 1
            kkt = _kkt_violation_from_grad(g, b, subset0, lam)
            viol = subset0[np.abs(g[subset0]) > lam + admit_tol]
            viol = viol[b[viol] == 0.0]
            if viol.shape[0] == 0 and kkt <= tol:
                break
            if np.max(np.abs(b)) > 1e10:  # objective is unbounded below
                stats.converged = False
                warnings.warn("coordinate descent diverged", MaxIterExceeded)
                break
            if stats.n_sweeps >= max_sweeps:
                stats.converged = False
                warnings.warn("coordinate descent hit max_iter", MaxIterExceeded)
                break
            if viol.shape[0] == 0:
                tol_inner = max(tol_inner / 4.0, 1e-16)
            active = np.union1d(np.flatnonzero(b), viol).astype(np.int64)
        return b, self.residual_norm(b, q), stats

    def residual_norm(self, b, q=None):
        if self.yty is None or self.n is None:
            return float("nan")
        if q is None:
            q = self.Gamma @ b
        val = self.yty - 2.0 * self.n * float(b @ self.gamma) + self.n * float(b @ q)
        return math.sqrt(max(val, 0.0))

    def kkt_violation(self, b, subset0, lam):
        g = self.gamma - self.Gamma @ b
        return _kkt_violation_from_grad(g, b, subset0, lam)


def _subset_to_idx0(subset, p):
    if subset is None:
        return np.arange(p)
    idx = np.asarray(sorted(int(j) for j in subset), dtype=int)
    if idx.shape[0] and (idx[0] < 1 or idx[-1] > p):
        raise DimensionMismatch("subset ids must lie in 1..p")
    return idx - 1


def cd_lasso(data: Dataset, subset, lam: float, init: SparseCoef | None = None,
             tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_SWEEPS) -> SparseCoef:
    """Solve the Lasso restricted to `subset` (1-based ids, None = all).

    The returned support is contained in the subset and satisfies the
    stationarity conditions within tol, checked against X_j'(Y-Xb)/n.
    """
    prob = DataProblem(data.X, data.Y)
    idx0 = _subset_to_idx0(subset, data.p)
    b0 = _init_dense(init, idx0, data.p)
    b, _, _ = prob.solve(idx0, lam, b0, tol=tol, max_sweeps=max_iter)
    return SparseCoef.from_dense(b)


def cov_cd_lasso(surrogate, subset, lam: float, init: SparseCoef | None = None,
                 tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_SWEEPS) -> SparseCoef:
    """Covariance-form Lasso on a PSD-corrected surrogate (Gamma, gamma)."""
    if not getattr(surrogate, "corrected", False):
        raise NotPsdCorrected("run psd_correct on the surrogate before solving")
    prob = CovProblem(surrogate.Gamma, surrogate.gamma, surrogate.n, surrogate.yty)
    idx0 = _subset_to_idx0(subset, prob.p)
    b0 = _init_dense(init, idx0, prob.p)
    b, _, _ = prob.solve(idx0, lam, b0, tol=tol, max_sweeps=max_iter)
    return SparseCoef.from_dense(b)


def _init_dense(init, idx0, p):
    if init is None:
        return None
    if init.p != p:
        raise DimensionMismatch("init has wrong ambient dimension")
    if not init.support() <= set(int(i) + 1 for i in idx0):
        raise DimensionMismatch("init supported outside the subset")
    return init.to_dense()

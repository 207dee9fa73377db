"""Ridge solutions over all nested subsets via kernel-form updates.

The ridge solution (X'X + lam I)^{-1} X'Y equals X'(XX' + lam I)^{-1} Y, so
out-of-sample predictions need only the n x n inverse A = (XX' + lam I)^{-1}
and the cross matrix Z X'. Adding or removing one column is a rank-one
change of XX', so A follows by a Sherman-Morrison update in O(n^2); walking
the nesting one variable at a time prices the whole family of p subsets at
the cost of a single fit.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .data_model import Dataset, Ordering
from .errors import (
    DimensionMismatch,
    NumericalBreakdown,
    SingularSystem,
    TestWiderThanTrain,
)
from .lasso_engine import LambdaGrid

BREAKDOWN_EPS = 1e-12
REFACTOR_EVERY = 512


@dataclass(frozen=True)
class KernelState:
    """Current inverse A = (X_S X_S' + lam I)^{-1}, cross matrix Z_S X_S'
    and the variable set S it corresponds to."""

    A: np.ndarray
    cross: np.ndarray
    included: frozenset
    n_updates: int = 0

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        cross = np.asarray(self.cross, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise DimensionMismatch("A must be square")
        if cross.ndim != 2 or cross.shape[1] != A.shape[0]:
            raise DimensionMismatch("cross must be n' x n")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "cross", cross)
        object.__setattr__(self, "included", frozenset(int(j) for j in self.included))

    @classmethod
    def empty(cls, n: int, n_test: int, lam: float) -> "KernelState":
        if lam <= 0:
            raise SingularSystem("lambda must be positive")
        return cls(np.eye(n) / lam, np.zeros((n_test, n)), frozenset())


def smw_rank_one(state: KernelState, x: np.ndarray, z: np.ndarray | None = None,
                 direction: str = "add", var_id: int | None = None) -> KernelState:
    """Rank-one update of a KernelState for one added or removed column.

    x is the training column (length n) and z the matching test column
    (length n', optional; zeros assumed when omitted). The returned A is
    re-symmetrised; a near-zero removal denominator raises
    NumericalBreakdown.
    """
    A = state.A
    x = np.asarray(x, dtype=float)
    if x.shape != (A.shape[0],):
        raise DimensionMismatch("x must be a length-n column")
    Ax = A @ x
    if direction == "add":
        denom = 1.0 + float(x @ Ax)
        sign = -1.0
    elif direction == "remove":
        denom = 1.0 - float(x @ Ax)
        sign = 1.0
    else:
        raise DimensionMismatch("direction must be 'add' or 'remove'")
    if abs(denom) <= BREAKDOWN_EPS:
        raise NumericalBreakdown(f"rank-one denominator {denom:.3e} too small")
    A_new = A + (sign / denom) * np.outer(Ax, Ax)
    A_new = 0.5 * (A_new + A_new.T)
    cross = state.cross
    if z is not None:
        z = np.asarray(z, dtype=float)
        if z.shape != (cross.shape[0],):
            raise DimensionMismatch("z must be a length-n' column")
        cross = cross - sign * np.outer(z, x)
    included = set(state.included)
    if var_id is not None:
        if direction == "add":
            included.add(int(var_id))
        else:
            included.discard(int(var_id))
    return KernelState(A_new, cross, frozenset(included), state.n_updates + 1)


def ridge_fit(data: Dataset, subset, lam: float) -> np.ndarray:
    """Exact ridge coefficients on a subset (1-based ids, None = all),
    returned as a dense p-vector with zeros off the subset.

    Uses the primal form when |subset| <= n and the kernel form otherwise.
    """
    if lam <= 0:
        raise SingularSystem("lambda must be positive")
    p = data.p
    if subset is None:
        idx0 = np.arange(p)
    else:
        idx0 = np.asarray(sorted(int(j) for j in subset), dtype=int) - 1
        if idx0.shape[0] and (idx0[0] < 0 or idx0[-1] >= p):
            raise DimensionMismatch("subset ids must lie in 1..p")
    out = np.zeros(p)
    if idx0.shape[0] == 0:
        return out
    Xs = data.X[:, idx0]
    m = idx0.shape[0]
    if m <= data.n:
        G = Xs.T @ Xs + lam * np.eye(m)
        out[idx0] = cho_solve(cho_factor(G), Xs.T @ data.Y)
    else:
        Kmat = Xs @ Xs.T + lam * np.eye(data.n)
        out[idx0] = Xs.T @ cho_solve(cho_factor(Kmat), data.Y)
    return out


def ridge_svd_path(X: np.ndarray, Y: np.ndarray, lambdas) -> np.ndarray:
    """Full-model ridge coefficients for every lambda via one SVD, (L, p)."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    lambdas = np.asarray(lambdas, dtype=float)
    if np.any(lambdas <= 0):
        raise SingularSystem("lambda must be positive")
    U, s, Vt = np.linalg.svd(X, full_matrices=False)
    UtY = U.T @ Y
    out = np.empty((lambdas.shape[0], X.shape[1]))
    for i, lam in enumerate(lambdas):
        out[i] = Vt.T @ (s * UtY / (s**2 + lam))
    return out


def _direct_kernel_inverse(Xs, lam):
    n = Xs.shape[0]
    return np.linalg.inv(Xs @ Xs.T + lam * np.eye(n))


def ridge_all_subsets_predict(data: Dataset, ordering: Ordering, lgrid: LambdaGrid,
                              testX: np.ndarray, direction: str = "grow",
                              refactor_every: int = REFACTOR_EVERY) -> np.ndarray:
    """Test predictions for every (lambda, nested subset) pair, shape (L, p, n').

    Subset k keeps the first p-k+1 variables of the ordering, so index
    k-1 of the output runs from the full model (k=1) down to the single
    most important variable (k=p). direction 'grow' starts from the
    smallest subset and adds columns; 'shrink' starts from the full model
    and removes them. The inverse is refactorised from scratch every
    refactor_every updates to bound floating-point drift.
    """
    testX = np.asarray(testX, dtype=float)
    n, p = data.n, data.p
    if testX.ndim != 2 or testX.shape[1] != p:
        raise DimensionMismatch(f"testX must have {p} columns")
    n_test = testX.shape[0]
    if n_test > n:
        raise TestWiderThanTrain(f"test rows {n_test} exceed training rows {n}")
    if ordering.p != p:
        raise DimensionMismatch("ordering length does not match the data")
    perm0 = ordering.perm0()
    Y = data.Y
    out = np.empty((lgrid.L, p, n_test))
    for li, lam in enumerate(lgrid.values):
        if direction == "grow":
            A = np.eye(n) / lam
            cross = np.zeros((n_test, n))
            for i in range(p):
                col = perm0[i]
                x = data.X[:, col]
                z = testX[:, col]
                Ax = A @ x
                denom = 1.0 + float(x @ Ax)
                A -= np.outer(Ax, Ax / denom)
                cross += np.outer(z, x)
                if (i + 1) % refactor_every == 0 and i + 1 < p:
                    A = _direct_kernel_inverse(data.X[:, perm0[: i + 1]], lam)
                k = p - i  # subset S_k has i+1 variables
                out[li, k - 1] = cross @ (A @ Y)
        elif direction == "shrink":
            A = _direct_kernel_inverse(data.X[:, perm0], lam)
            cross = testX[:, perm0] @ data.X[:, perm0].T
            out[li, 0] = cross @ (A @ Y)
            for i in range(p - 1, 0, -1):
                col = perm0[i]
                x = data.X[:, col]
                z = testX[:, col]
                Ax = A @ x
                denom = 1.0 - float(x @ Ax)
                if abs(denom) <= BREAKDOWN_EPS:
                    raise NumericalBreakdown("removal denominator vanished")
                A += np.outer(Ax, Ax / denom)
                cross -= np.outer(z, x)
                if (p - i) % refactor_every == 0 and i > 1:
                    A = _direct_kernel_inverse(data.X[:, perm0[:i]], lam)
                k = p - i + 1  # i variables remain
                out[li, k - 1] = cross @ (A @ Y)
        else:
            raise DimensionMismatch("direction must be 'grow' or 'shrink'")
    return out

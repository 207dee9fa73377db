"""Plug-in covariance estimates from partially observed designs.

With missing entries zero-filled after centering/scaling on observed
values, pairwise-complete averages give surrogates for X'X/n and X'Y/n:

    Gamma_jk = Xt_j' Xt_k / #{i : X_ij and X_ik observed}
    gamma_j  = Xt_j' Y    / #{i : X_ij observed}

Gamma is generally indefinite; adding max(0, -smallest eigenvalue) * I
restores positive semidefiniteness, which is the same as adding a fixed
ridge penalty of that weight to the covariance-form objective.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse.linalg as spla

from .data_model import Dataset, StandardizationInfo, standardize
from .errors import (
    ConstantColumn,
    DimensionMismatch,
    EigenFailure,
    EmptyPairOverlap,
)
from .lasso_engine import SparseCoef

# relative slack added to the eigen shift so iterative-solver tolerance
# cannot leave the corrected matrix indefinite
_SHIFT_MARGIN = 1e-8


@dataclass(frozen=True)
class CovSurrogate:
    """Plug-in pair (Gamma, gamma) with observation bookkeeping.

    ridge_shift is the identity shift applied by psd_correct (0 before).
    n and yty refer to the centered response and feed the surrogate
    residual norm used for path early stopping.
    """

    Gamma: np.ndarray
    gamma: np.ndarray
    ridge_shift: float
    pairwise_counts: np.ndarray
    n: int
    yty: float
    info: StandardizationInfo
    corrected: bool = False

    def __post_init__(self):
        G = np.asarray(self.Gamma, dtype=float)
        g = np.asarray(self.gamma, dtype=float)
        if G.ndim != 2 or G.shape[0] != G.shape[1] or g.shape != (G.shape[0],):
            raise DimensionMismatch("Gamma must be p x p and gamma length p")
        object.__setattr__(self, "Gamma", G)
        object.__setattr__(self, "gamma", g)

    @property
    def p(self) -> int:
        return self.gamma.shape[0]

    def restrict(self, subset0) -> "CovSurrogate":
        """Surrogate for the sub-problem on the given 0-based columns.

        Restriction happens before PSD correction: a subset of well-observed
        variables typically needs a much smaller shift than the full matrix.
        """
        sub = np.asarray(subset0, dtype=int)
        info = StandardizationInfo(self.info.centers[sub], self.info.scales[sub],
                                   self.info.y_center, self.info.policy)
        return CovSurrogate(
            Gamma=self.Gamma[np.ix_(sub, sub)],
            gamma=self.gamma[sub],
            ridge_shift=self.ridge_shift,
            pairwise_counts=self.pairwise_counts[np.ix_(sub, sub)],
            n=self.n,
            yty=self.yty,
            info=info,
            corrected=self.corrected,
        )


def smallest_eigenvalue(G: np.ndarray, tol: float = 1e-6, maxiter: int | None = None) -> float:
    """Smallest eigenvalue of a symmetric matrix by shifted Lanczos iteration.

    Runs ARPACK on G for the top end, then on (lam_hi * I - G), whose
    largest eigenvalue is lam_hi - lam_min. Raises EigenFailure when the
    iteration does not converge.
    """
    G = np.asarray(G, dtype=float)
    p = G.shape[0]
    if G.ndim != 2 or G.shape[1] != p:
        raise DimensionMismatch("G must be square")
    if p <= 2:
        return float(np.linalg.eigvalsh(G)[0])
    v0 = np.random.default_rng(0).standard_normal(p)  # fixed start: determinism
    try:
        lam_hi = float(spla.eigsh(G, k=1, which="LA", tol=tol, maxiter=maxiter,
                                  v0=v0, return_eigenvectors=False)[0])
        shifted = spla.LinearOperator((p, p), matvec=lambda v: lam_hi * v - G @ v,
                                      dtype=float)
        mu = float(spla.eigsh(shifted, k=1, which="LA", tol=tol, maxiter=maxiter,
                              v0=v0, return_eigenvectors=False)[0])
    except spla.ArpackNoConvergence as exc:
        raise EigenFailure(f"eigenvalue iteration did not converge: {exc}") from exc
    return lam_hi - mu


def estimate_surrogate(data: Dataset, policy: str = "center_and_scale",
                       info: StandardizationInfo | None = None) -> CovSurrogate:
    """Build (Gamma, gamma) from a masked dataset.

    Columns are centered/scaled on their observed entries (or with the
    supplied info, e.g. the training-fold transform when scoring a
    validation fold) and missing entries zero-filled. Requires every column
    observed at least twice and every pair at least once.
    """
    mask = data.observed_mask()
    obs_counts = mask.sum(axis=0)
    if np.any(obs_counts < 2):
        j = int(np.argmax(obs_counts < 2)) + 1
        raise ConstantColumn(f"column {j} observed fewer than 2 times")
    Mf = mask.astype(float)
    pair_counts = Mf.T @ Mf
    if np.any(pair_counts < 1):
        j, k = np.unravel_index(int(np.argmin(pair_counts)), pair_counts.shape)
        raise EmptyPairOverlap(j + 1, k + 1)
    if info is None:
        _, info = standardize(data, policy)
    elif info.p != data.p:
        raise DimensionMismatch("info does not match the data dimension")
    Xt = np.where(mask, (data.X - info.centers) / info.scales, 0.0)
    Yc = data.Y - info.y_center
    Gamma = (Xt.T @ Xt) / pair_counts
    Gamma = 0.5 * (Gamma + Gamma.T)
    gamma = (Xt.T @ Yc) / obs_counts
    return CovSurrogate(
        Gamma=Gamma,
        gamma=gamma,
        ridge_shift=0.0,
        pairwise_counts=pair_counts.astype(int),
        n=data.n,
        yty=float(Yc @ Yc),
        info=info,
        corrected=False,
    )


def surrogate_from_full_data(data: Dataset, info: StandardizationInfo | None = None) -> CovSurrogate:
    """Exact (X'X/n, X'Y/n) surrogate for a fully observed standardized
    dataset; already PSD so it is returned corrected with zero shift."""
    if info is None:
        info = StandardizationInfo.identity(data.p)
    n = data.n
    Gamma = data.X.T @ data.X / n
    return CovSurrogate(
        Gamma=0.5 * (Gamma + Gamma.T),
        gamma=data.X.T @ data.Y / n,
        ridge_shift=0.0,
        pairwise_counts=np.full((data.p, data.p), n, dtype=int),
        n=n,
        yty=float(data.Y @ data.Y),
        info=info,
        corrected=True,
    )


def psd_correct(surrogate: CovSurrogate, tol: float = 1e-9) -> CovSurrogate:
    """Shift Gamma by max(0, -smallest eigenvalue) * I so it is PSD.

    The recorded ridge_shift makes the surrogate objective equal to the
    uncorrected one plus a ridge penalty of that weight.
    """
    lam_min = smallest_eigenvalue(surrogate.Gamma, tol=tol)
    shift = max(0.0, -lam_min) * (1.0 + _SHIFT_MARGIN)
    if shift == 0.0:
        return replace(surrogate, corrected=True)
    Gamma = surrogate.Gamma + shift * np.eye(surrogate.p)
    return replace(surrogate, Gamma=Gamma, ridge_shift=shift, corrected=True)


def surrogate_cv_score(coef: SparseCoef, surrogate: CovSurrogate) -> float:
    """Validation score -2 b'gamma + b'Gamma b on an (uncorrected) fold
    surrogate; lower is better.

    With a fully observed fold this equals (||Y - Xb||^2 - ||Y||^2)/n, so
    the ranking matches held-out squared error.
    """
    if coef.p != surrogate.p:
        raise DimensionMismatch("coefficient dimension does not match surrogate")
    if coef.n_nonzero == 0:
        return 0.0
    idx0 = coef.indices0()
    v = coef.values
    return float(-2.0 * (v @ surrogate.gamma[idx0])
                 + v @ surrogate.Gamma[np.ix_(idx0, idx0)] @ v)

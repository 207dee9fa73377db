"""Synthetic data generation: Gaussian designs, sparse coefficient regimes,
ordering samplers of controlled quality, corruption and missingness regimes,
and the proportion-of-variance-explained metric."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DimensionMismatch, InvalidSchedule, ZeroVariance

SIGMA_SPECS = ("identity", "ar_09", "inv_exp", "equi_05")
COEF_REGIMES = ("const_05", "const_15", "unif_02")


@dataclass(frozen=True)
class SimConfig:
    """One synthetic-regression scenario."""

    n: int
    p: int
    sigma_spec: str = "identity"
    sparsity: int = 5
    coef_regime: str = "const_15"
    eta: float = 1.0
    noise_sd: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.sigma_spec not in SIGMA_SPECS:
            raise InvalidSchedule(f"unknown sigma_spec {self.sigma_spec!r}")
        if self.coef_regime not in COEF_REGIMES:
            raise InvalidSchedule(f"unknown coef_regime {self.coef_regime!r}")
        if not (0 <= self.sparsity <= self.p):
            raise InvalidSchedule("sparsity must lie in [0, p]")
        if self.eta <= 0:
            raise InvalidSchedule("eta must be positive")
        if self.noise_sd <= 0:
            raise InvalidSchedule("noise_sd must be positive")


def sigma_matrix(spec: str, p: int) -> np.ndarray:
    """Population covariance for a design spec.

    identity; ar_09: 0.9^|j-k|; inv_exp: inverse of the precision matrix
    0.4^(|j-k|/5); equi_05: 0.5 everywhere with unit diagonal.
    """
    if spec == "identity":
        return np.eye(p)
    d = np.abs(np.subtract.outer(np.arange(p), np.arange(p)))
    if spec == "ar_09":
        return 0.9**d
    if spec == "inv_exp":
        return np.linalg.inv(0.4 ** (d / 5.0))
    if spec == "equi_05":
        return np.full((p, p), 0.5) + 0.5 * np.eye(p)
    raise InvalidSchedule(f"unknown sigma_spec {spec!r}")


@lru_cache(maxsize=8)
def _sigma_cholesky(spec: str, p: int):
    chol = np.linalg.cholesky(sigma_matrix(spec, p))
    chol.setflags(write=False)
    return chol


def gen_design(cfg: SimConfig, rng: np.random.Generator) -> np.ndarray:
    """n x p matrix with i.i.d. N(0, Sigma) rows; the Cholesky factor is
    cached per (spec, p)."""
    if cfg.sigma_spec == "identity":
        return rng.standard_normal((cfg.n, cfg.p))
    return rng.standard_normal((cfg.n, cfg.p)) @ _sigma_cholesky(cfg.sigma_spec, cfg.p).T


def gen_beta(cfg: SimConfig, rng: np.random.Generator):
    """Sparse coefficient vector; support uniform among size-|S| subsets.

    Returns (beta, support) with support as a sorted array of 1-based ids.
    """
    beta = np.zeros(cfg.p)
    if cfg.sparsity == 0:
        return beta, np.empty(0, dtype=int)
    support0 = np.sort(rng.choice(cfg.p, size=cfg.sparsity, replace=False))
    if cfg.coef_regime == "const_05":
        beta[support0] = 0.5
    elif cfg.coef_regime == "const_15":
        beta[support0] = 1.5
    else:
        beta[support0] = rng.uniform(0.0, 2.0, size=cfg.sparsity)
    return beta, support0 + 1


def rho_signal(p: int, support, eta: float) -> np.ndarray:
    """Permutation-sampling weights: eta/(p + (eta-1)|S|) on the signal
    variables and 1/(p + (eta-1)|S|) elsewhere; sums to one. eta > 1 favours
    signal variables early, eta < 1 is adversarial, eta = 1 is uniform."""
    if eta <= 0:
        raise InvalidSchedule("eta must be positive")
    support0 = np.asarray(support, dtype=int) - 1
    denom = p + (eta - 1.0) * support0.shape[0]
    rho = np.full(p, 1.0 / denom)
    rho[support0] = eta / denom
    return rho


def corruption_probs(regime: int, p: int, rng: np.random.Generator) -> np.ndarray:
    """Per-column replacement probabilities for the four corruption regimes,
    order randomised (one permutation drawn from rng)."""
    rho = np.zeros(p)
    if regime == 1:
        rho[: int(np.floor(0.2 * p))] = 0.5
    elif regime == 2:
        rho[: int(np.floor(0.5 * p))] = 0.5
    elif regime == 3:
        rho[: int(np.floor(0.8 * p))] = 0.5
    elif regime == 4:
        rho = np.minimum(0.95, np.arange(p) / p)
    else:
        raise InvalidSchedule("corruption regime must be 1..4")
    return rho[rng.permutation(p)]


def corrupt_design(X: np.ndarray, rho, rng: np.random.Generator) -> np.ndarray:
    """Replace each entry of column j with a standard Gaussian draw,
    independently with probability rho_j; untouched entries are returned
    bit-identical."""
    X = np.asarray(X, dtype=float)
    rho = np.asarray(rho, dtype=float)
    if rho.shape != (X.shape[1],):
        raise DimensionMismatch("rho must have one entry per column")
    if np.any((rho < 0) | (rho > 1)):
        raise InvalidSchedule("rho entries must lie in [0, 1]")
    hit = rng.uniform(size=X.shape) < rho
    out = X.copy()
    out[hit] = rng.standard_normal(int(hit.sum()))
    return out


def missingness_probs(regime: int, p: int, rng: np.random.Generator) -> np.ndarray:
    """Per-column missingness probabilities for the three regimes (constant
    0.25; linear up to (p-1)/(3p), randomised; 0.3 on half, randomised)."""
    if regime == 1:
        return np.full(p, 0.25)
    if regime == 2:
        rho = np.arange(p) / (3.0 * p)
    elif regime == 3:
        rho = np.zeros(p)
        rho[: int(np.floor(0.5 * p))] = 0.3
    else:
        raise InvalidSchedule("missingness regime must be 1..3")
    return rho[rng.permutation(p)]


def mask_missing(X: np.ndarray, rho, rng: np.random.Generator):
    """Hide entries of column j independently with probability rho_j.

    Returns (X, mask) with mask True where the entry stays observed; the
    values themselves are unchanged.
    """
    X = np.asarray(X, dtype=float)
    rho = np.asarray(rho, dtype=float)
    if rho.shape != (X.shape[1],):
        raise DimensionMismatch("rho must have one entry per column")
    if np.any((rho < 0) | (rho >= 1)):
        raise InvalidSchedule("rho entries must lie in [0, 1)")
    mask = rng.uniform(size=X.shape) >= rho
    return X, mask


def pve(y_true, y_pred) -> float:
    """Proportion of variance explained, 1 - SS_res/SS_tot (larger is
    better; negative when predictions are worse than the mean)."""
    y_true = np.asarray(y_true, dtype=float)
    y_pred = np.asarray(y_pred, dtype=float)
    if y_true.shape != y_pred.shape:
        raise DimensionMismatch("length mismatch")
    ss_tot = float(np.sum((y_true - y_true.mean()) ** 2))
    if ss_tot <= 0:
        raise ZeroVariance("y_true has zero variance")
    ss_res = float(np.sum((y_true - y_pred) ** 2))
    return 1.0 - ss_res / ss_tot

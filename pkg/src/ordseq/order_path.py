"""Grid of Lasso solutions over nested variable subsets.

For subsets S_1 > ... > S_K (from an ordering and cutoff schedule) and a
decreasing lambda grid, each cell (k, l) holds the subset-restricted Lasso
solution. Three mechanisms keep the cost far below K*L independent fits:

* skip rule: if the recorded active set at (k-1, l) is contained in S_k,
  the previous solution is already optimal for S_k and is copied;
* warm starts: a solved cell starts from its left neighbour (k, l-1);
* early stopping: once the left neighbour's residual/lambda ratio passes
  the square-root-Lasso threshold, the rest of the row duplicates it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data_model import Dataset, Ordering, StandardizationInfo, SubsetSchedule
from .errors import DimensionMismatch
from .lasso_engine import (
    DEFAULT_MAX_SWEEPS,
    DEFAULT_TOL,
    CovProblem,
    DataProblem,
    LambdaGrid,
    SparseCoef,
    SqrtLassoConfig,
    sqrt_lasso_stop,
)


def active_set(coef: SparseCoef) -> frozenset:
    """Nonzero support of a coefficient vector (1-based ids)."""
    return coef.support()


@dataclass
class CoefficientGrid:
    """K x L array of sparse solutions plus bookkeeping flags.

    skipped marks cells copied from the row above (containment rule);
    early_stopped marks cells that duplicate their left neighbour because
    the path stop criterion fired (or that copy such a cell). Cells with
    both flags False were solved and satisfy the stationarity conditions.
    """

    coefs: list
    active: list
    skipped: np.ndarray
    early_stopped: np.ndarray
    ordering: Ordering
    schedule: SubsetSchedule
    grid: LambdaGrid
    n: int
    std_info: StandardizationInfo | None = None
    resid_norms: np.ndarray | None = None
    n_coord_updates: int = 0
    converged: bool = True

    @property
    def K(self) -> int:
        return self.schedule.K

    @property
    def L(self) -> int:
        return self.grid.L

    @property
    def p(self) -> int:
        return self.ordering.p

    def cell(self, k: int, l: int) -> SparseCoef:
        """Solution at 1-based grid position (k, l)."""
        return self.coefs[k - 1][l - 1]

    def candidate_mask(self) -> np.ndarray:
        """Cells eligible for model selection (early-stopped duplicates out)."""
        return ~self.early_stopped

    def subset_ids(self, k: int) -> np.ndarray:
        """Variables of S_k (1-based), most important first."""
        return self.ordering.perm[: self.schedule.cutoffs[k - 1]]


def _fit_grid(problem, p, n, ordering, schedule, grid, cfg, tol, max_sweeps,
              std_info, skip_rule):
    K, L = schedule.K, grid.L
    lams = grid.values
    perm0 = ordering.perm0()
    coefs = [[None] * L for _ in range(K)]
    act = [[None] * L for _ in range(K)]
    skipped = np.zeros((K, L), dtype=bool)
    early = np.zeros((K, L), dtype=bool)
    resid = np.zeros((K, L))
    total_updates = 0
    all_converged = True

    prev_active = [None] * L  # None is the k=0 sentinel superset {1..p+1}
    b = np.zeros(p)  # dense warm-start buffer, reused row by row
    for k in range(K):
        cut = int(schedule.cutoffs[k])
        subset0 = np.sort(perm0[:cut])
        subset_ids = frozenset(int(j) + 1 for j in subset0)
        b[:] = 0.0
        row_resid = np.empty(L)
        for l in range(L):
            above = act[k - 1][l] if k > 0 else prev_active[l]
            if skip_rule and above is not None and above <= subset_ids:
                coefs[k][l] = coefs[k - 1][l]
                act[k][l] = above
                skipped[k, l] = True
                early[k, l] = early[k - 1, l]
                row_resid[l] = resid[k - 1, l]
                continue
            # a residual that has degenerated to zero means the path is past
            # anything the stop criterion could admit (the covariance
            # surrogate clips its residual estimate at zero there)
            if l > 0 and cfg.enabled and (
                row_resid[l - 1] <= 0.0
                or not sqrt_lasso_stop(row_resid[l - 1], lams[l - 1], n, cfg)
            ):
                coefs[k][l] = coefs[k][l - 1]
                act[k][l] = act[k][l - 1]
                early[k, l] = True
                row_resid[l] = row_resid[l - 1]
                continue
            if l == 0:
                b[:] = 0.0
            else:
                b[:] = 0.0
                prev = coefs[k][l - 1]
                b[prev.indices0()] = prev.values
            b, rnorm, stats = problem.solve(subset0, lams[l], b, tol=tol,
                                            max_sweeps=max_sweeps)
            total_updates += stats.n_updates
            all_converged &= stats.converged
            coef = SparseCoef.from_dense(b)
            coefs[k][l] = coef
            act[k][l] = coef.support()
            row_resid[l] = rnorm
        resid[k] = row_resid
    return CoefficientGrid(
        coefs=coefs,
        active=act,
        skipped=skipped,
        early_stopped=early,
        ordering=ordering,
        schedule=schedule,
        grid=grid,
        n=n,
        std_info=std_info,
        resid_norms=resid,
        n_coord_updates=total_updates,
        converged=all_converged,
    )


def fit_order_path(data: Dataset, ordering: Ordering, schedule: SubsetSchedule,
                   grid: LambdaGrid, cfg: SqrtLassoConfig | None = None,
                   tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_SWEEPS,
                   std_info: StandardizationInfo | None = None,
                   skip_rule: bool = True) -> CoefficientGrid:
    """Fit the full K x L grid on (already standardized) data.

    The k=1 row is always solved (the initialisation sentinel is a superset
    of every S_k), and within a row the l=1 cell is always solved when the
    skip rule does not apply.
    """
    _check_consistency(data.p, ordering, schedule, grid)
    if cfg is None:
        cfg = SqrtLassoConfig.disabled()
    problem = DataProblem(data.X, data.Y)
    return _fit_grid(problem, data.p, data.n, ordering, schedule, grid, cfg,
                     tol, max_iter, std_info, skip_rule)


def fit_order_path_cov(surrogate, ordering: Ordering, schedule: SubsetSchedule,
                       grid: LambdaGrid, cfg: SqrtLassoConfig | None = None,
                       tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_SWEEPS,
                       std_info: StandardizationInfo | None = None) -> CoefficientGrid:
    """Covariance-form grid over nested subsets for missing-data surrogates.

    Takes the raw (uncorrected) surrogate: each subset row restricts
    (Gamma, gamma) to its variables and applies its own PSD correction, so
    well-observed subsets are fitted with a much smaller forced ridge shift
    than the full matrix. Because the shift differs between rows the
    containment skip rule does not apply; within a row warm starts and the
    early-stop criterion work as in the data form (using the surrogate
    residual norm implied by (Gamma, gamma, y'y), which reduces to the exact
    residual for a fully observed design).
    """
    from .errors import InvalidSchedule
    from .missing_data import CovSurrogate, psd_correct

    if not isinstance(surrogate, CovSurrogate):
        raise DimensionMismatch("expected a CovSurrogate")
    if surrogate.corrected and surrogate.ridge_shift > 0:
        raise InvalidSchedule("pass the uncorrected surrogate; per-subset "
                              "corrections are applied internally")
    p = surrogate.gamma.shape[0]
    _check_consistency(p, ordering, schedule, grid)
    if cfg is None:
        cfg = SqrtLassoConfig.disabled()
    K, L = schedule.K, grid.L
    lams = grid.values
    perm0 = ordering.perm0()
    n = surrogate.n
    coefs = [[None] * L for _ in range(K)]
    act = [[None] * L for _ in range(K)]
    skipped = np.zeros((K, L), dtype=bool)
    early = np.zeros((K, L), dtype=bool)
    resid = np.zeros((K, L))
    total_updates = 0
    all_converged = True
    for k in range(K):
        cut = int(schedule.cutoffs[k])
        subset0 = np.sort(perm0[:cut])
        sub_corr = psd_correct(surrogate.restrict(subset0))
        problem = CovProblem(sub_corr.Gamma, sub_corr.gamma, n, surrogate.yty)
        local_all = np.arange(cut)
        b = np.zeros(cut)
        row_resid = np.empty(L)
        for l in range(L):
            if l > 0 and cfg.enabled and (
                row_resid[l - 1] <= 0.0
                or not sqrt_lasso_stop(row_resid[l - 1], lams[l - 1], n, cfg)
            ):
                coefs[k][l] = coefs[k][l - 1]
                act[k][l] = act[k][l - 1]
                early[k, l] = True
                row_resid[l] = row_resid[l - 1]
                continue
            if l == 0:
                b[:] = 0.0
            b, rnorm, stats = problem.solve(local_all, lams[l], b, tol=tol,
                                            max_sweeps=max_iter)
            total_updates += stats.n_updates
            all_converged &= stats.converged
            nz = np.flatnonzero(b)
            coef = SparseCoef(subset0[nz] + 1, b[nz], p)
            coefs[k][l] = coef
            act[k][l] = coef.support()
            row_resid[l] = rnorm
        resid[k] = row_resid
    return CoefficientGrid(
        coefs=coefs,
        active=act,
        skipped=skipped,
        early_stopped=early,
        ordering=ordering,
        schedule=schedule,
        grid=grid,
        n=n,
        std_info=std_info,
        resid_norms=resid,
        n_coord_updates=total_updates,
        converged=all_converged,
    )


def _check_consistency(p, ordering, schedule, grid):
    if ordering.p != p:
        raise DimensionMismatch("ordering length does not match the data")
    if int(schedule.cutoffs[0]) != p:
        raise DimensionMismatch("schedule must start at the full variable set")
    if grid.L < 1:
        raise DimensionMismatch("empty lambda grid")


def grid_predict(gridfit: CoefficientGrid, newX: np.ndarray) -> np.ndarray:
    """Predictions for every grid cell, shape (K, L, n'), in original
    response units.

    newX is in original column units; the grid's StandardizationInfo (when
    present) is applied internally.
    """
    newX = np.asarray(newX, dtype=float)
    if newX.ndim != 2 or newX.shape[1] != gridfit.p:
        raise DimensionMismatch(f"newX must have {gridfit.p} columns")
    info = gridfit.std_info
    if info is not None:
        Xs = info.transform_X(newX)
        offset = info.y_center
    else:
        Xs = newX
        offset = 0.0
    K, L = gridfit.K, gridfit.L
    out = np.empty((K, L, newX.shape[0]))
    for k in range(K):
        for l in range(L):
            coef = gridfit.coefs[k][l]
            if coef.n_nonzero:
                out[k, l] = Xs[:, coef.indices0()] @ coef.values + offset
            else:
                out[k, l] = offset
    return out

"""Model selection over the (subset, lambda) grid.

Provides K-fold cross-validation, a single train/validate split, the
chronological train/validate/retrain protocol for time-ordered data, the
simulation-only oracle selector, and an evaluator plus Monte-Carlo checker
for the log(M)-price bound on test-set selection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data_model import (
    Dataset,
    Ordering,
    StandardizationInfo,
    SubsetSchedule,
    standardize,
)
from .errors import (
    DimensionMismatch,
    EmptyCandidates,
    FoldTooSmall,
    InvalidConstants,
    OverlapError,
)
from .lasso_engine import (
    DEFAULT_TOL,
    CovProblem,
    DataProblem,
    LambdaGrid,
    SparseCoef,
    SqrtLassoConfig,
)
from .order_path import fit_order_path, fit_order_path_cov, grid_predict

TIE_TOL = 1e-10


@dataclass(frozen=True)
class CVPlan:
    """Disjoint folds covering rows 0..n-1 (0-based numpy positions)."""

    n: int
    folds: tuple
    mode: str
    seed: int | None = None

    def __post_init__(self):
        folds = tuple(np.asarray(f, dtype=int) for f in self.folds)
        allidx = np.concatenate(folds) if folds else np.empty(0, dtype=int)
        if np.unique(allidx).shape[0] != allidx.shape[0]:
            raise OverlapError("folds must be disjoint")
        if not np.array_equal(np.sort(allidx), np.arange(self.n)):
            raise OverlapError("folds must cover all rows")
        if self.mode == "kfold" and len(folds) < 2:
            raise FoldTooSmall("kfold needs at least 2 folds")
        if self.mode == "chronological":
            for f in folds:
                if f.shape[0] and not np.array_equal(f, np.arange(f[0], f[-1] + 1)):
                    raise OverlapError("chronological folds must be contiguous")
            starts = [int(f[0]) for f in folds if f.shape[0]]
            if starts != sorted(starts):
                raise OverlapError("chronological folds must be ordered")
        for f in folds:
            if f.shape[0] < 2:
                raise FoldTooSmall("every fold needs at least 2 observations")
        # canonical fold order makes score aggregation independent of the
        # order folds were supplied in
        folds = tuple(sorted(folds, key=lambda f: int(f[0])))
        object.__setattr__(self, "folds", folds)

    @property
    def n_folds(self) -> int:
        return len(self.folds)


def make_kfold_plan(n: int, n_folds: int = 5, seed: int | None = 0) -> CVPlan:
    """Shuffled K-fold plan with near-equal fold sizes."""
    if n_folds < 2 or n_folds > n:
        raise FoldTooSmall("need 2 <= n_folds <= n")
    idx = np.arange(n)
    if seed is not None:
        np.random.default_rng(seed).shuffle(idx)
    return CVPlan(n, tuple(np.sort(f) for f in np.array_split(idx, n_folds)),
                  "kfold", seed)


def make_chrono_plan(n: int, sizes: tuple[int, int, int]) -> CVPlan:
    """Contiguous train/validate/test split of time-ordered rows."""
    if sum(sizes) != n:
        raise OverlapError(f"split sizes {sizes} must sum to n={n}")
    bounds = np.cumsum((0,) + tuple(sizes))
    folds = tuple(np.arange(bounds[i], bounds[i + 1]) for i in range(3))
    return CVPlan(n, folds, "chronological")


def make_single_split_plan(n: int, n_train: int, seed: int | None = 0) -> CVPlan:
    """Random train/test split; fold 0 is the training block."""
    if not (2 <= n_train <= n - 2):
        raise FoldTooSmall("need 2 <= n_train <= n - 2")
    idx = np.arange(n)
    if seed is not None:
        np.random.default_rng(seed).shuffle(idx)
    return CVPlan(n, (np.sort(idx[:n_train]), np.sort(idx[n_train:])),
                  "single_split", seed)


@dataclass
class SelectionResult:
    """Chosen grid cell, its CV/validation scores and the refit coefficients
    (original scale, intercept included)."""

    k_star: int
    l_star: int
    scores: np.ndarray
    chosen: SparseCoef
    candidates_considered: int
    test_mse: float | None = None


def _pick_cell(scores: np.ndarray, candidate_mask: np.ndarray):
    """Minimiser with ties (within TIE_TOL) broken towards larger k then
    larger lambda (smaller l)."""
    masked = np.where(candidate_mask, scores, np.inf)
    best = float(np.min(masked))
    if not np.isfinite(best):
        raise EmptyCandidates("no candidate cells to select from")
    ks, ls = np.nonzero(candidate_mask & (masked <= best + TIE_TOL))
    order = np.lexsort((ls, -ks))
    pick = order[0]
    return int(ks[pick]), int(ls[pick])


def _refit_cell(data, ordering, schedule, grid, k0, l0, mode, policy, tol):
    """Refit the selected (k, l) on a dataset and return original-scale
    coefficients."""
    cut = int(schedule.cutoffs[k0])
    subset0 = np.sort(ordering.perm0()[:cut])
    lam = float(grid.values[l0])
    if mode == "lasso-missing":
        from .missing_data import estimate_surrogate, psd_correct

        surr = estimate_surrogate(data, policy)
        sub = psd_correct(surr.restrict(subset0))
        prob = CovProblem(sub.Gamma, sub.gamma, sub.n, sub.yty)
        b_local, _, _ = prob.solve(np.arange(subset0.shape[0]), lam, tol=tol)
        b = np.zeros(data.p)
        b[subset0] = b_local
        info = surr.info
    else:
        std, info = standardize(data, policy)
        prob = DataProblem(std.X, std.Y)
        b, _, _ = prob.solve(subset0, lam, tol=tol)
    idx0 = np.flatnonzero(b)
    values, intercept = info.coef_to_original(idx0 + 1, b[idx0])
    return SparseCoef(idx0 + 1, values, data.p, intercept)


def _fit_fold(train, ordering, schedule, grid, cfg, mode, policy, tol):
    if mode == "lasso-missing":
        from .missing_data import estimate_surrogate

        surr = estimate_surrogate(train, policy)
        gridfit = fit_order_path_cov(surr, ordering, schedule, grid,
                                     cfg, tol=tol, std_info=surr.info)
        return gridfit, surr.info
    std, info = standardize(train, policy)
    gridfit = fit_order_path(std, ordering, schedule, grid, cfg, tol=tol,
                             std_info=info)
    return gridfit, info


def _score_fold(gridfit, data, val_rows, train_info, mode):
    """Per-cell validation scores on one held-out fold (K, L)."""
    if mode == "lasso-missing":
        from .missing_data import estimate_surrogate, surrogate_cv_score

        val_surr = estimate_surrogate(data.take_rows(val_rows), info=train_info)
        K, L = gridfit.K, gridfit.L
        out = np.empty((K, L))
        for k in range(K):
            for l in range(L):
                out[k, l] = surrogate_cv_score(gridfit.coefs[k][l], val_surr)
        return out
    preds = grid_predict(gridfit, data.X[val_rows])
    resid = preds - data.Y[val_rows]
    return np.mean(resid**2, axis=2)


def _fold_job(args):
    data, fold, ordering, schedule, grid, cfg, mode, policy, tol = args
    train_rows = np.setdiff1d(np.arange(data.n), fold)
    gridfit, info = _fit_fold(data.take_rows(train_rows), ordering, schedule,
                              grid, cfg, mode, policy, tol)
    return _score_fold(gridfit, data, fold, info, mode), gridfit.early_stopped


def kfold_cv_select(data: Dataset, ordering: Ordering, schedule: SubsetSchedule,
                    grid: LambdaGrid, plan: CVPlan, cfg: SqrtLassoConfig | None = None,
                    mode: str = "lasso", policy: str = "center_and_scale",
                    tol: float = DEFAULT_TOL, threads: int = 1) -> SelectionResult:
    """Average per-fold validation scores over the grid, pick the minimiser
    and refit it on the full data.

    Scores are held-out mean squared error, or the covariance surrogate
    score in lasso-missing mode. Cells that hit the path early-stop in any
    fold are duplicates of their neighbour and drop out of the candidate
    set. Folds run in parallel worker processes when threads > 1; the
    aggregation order is fixed by the plan, so results do not depend on
    scheduling.
    """
    if plan.mode != "kfold":
        raise OverlapError("plan mode must be 'kfold'")
    if plan.n != data.n:
        raise DimensionMismatch("plan does not match the data")
    K, L = schedule.K, grid.L
    scores = np.zeros((K, L))
    excluded = np.zeros((K, L), dtype=bool)
    jobs = [(data, fold, ordering, schedule, grid, cfg, mode, policy, tol)
            for fold in plan.folds]
    if threads > 1 and len(jobs) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_fold_job, jobs))
    else:
        results = [_fold_job(job) for job in jobs]
    for fold_scores, fold_early in results:
        scores += fold_scores
        excluded |= fold_early
    scores /= plan.n_folds
    k0, l0 = _pick_cell(scores, ~excluded)
    chosen = _refit_cell(data, ordering, schedule, grid, k0, l0, mode, policy, tol)
    return SelectionResult(
        k_star=k0 + 1,
        l_star=l0 + 1,
        scores=scores,
        chosen=chosen,
        candidates_considered=int((~excluded).sum()),
    )


def chrono_select(data: Dataset, split, ordering: Ordering, schedule: SubsetSchedule,
                  grid: LambdaGrid, cfg: SqrtLassoConfig | None = None,
                  policy: str = "center_and_scale", tol: float = DEFAULT_TOL) -> SelectionResult:
    """Chronological protocol: fit the grid on the train block, choose the
    cell with minimal validation RSS, refit it on train+validate and report
    the test error. The test block plays no part in selection.
    """
    if isinstance(split, CVPlan):
        plan = split
    else:
        train, val, test = (np.asarray(s, dtype=int) for s in split)
        if (np.intersect1d(train, val).size or np.intersect1d(train, test).size
                or np.intersect1d(val, test).size):
            raise OverlapError("split blocks must not intersect")
        plan = CVPlan(data.n, (train, val, test), "chronological")
    train, val, test = plan.folds
    gridfit, info = _fit_fold(data.take_rows(train), ordering, schedule, grid,
                              cfg, "lasso", policy, tol)
    scores = _score_fold(gridfit, data, val, info, "lasso")
    k0, l0 = _pick_cell(scores, ~gridfit.early_stopped)
    refit_data = data.take_rows(np.concatenate([train, val]))
    chosen = _refit_cell(refit_data, ordering, schedule, grid, k0, l0,
                         "lasso", policy, tol)
    yhat = _predict_sparse(chosen, data.X[test])
    test_mse = float(np.mean((yhat - data.Y[test]) ** 2))
    return SelectionResult(
        k_star=k0 + 1,
        l_star=l0 + 1,
        scores=scores,
        chosen=chosen,
        candidates_considered=int((~gridfit.early_stopped).sum()),
        test_mse=test_mse,
    )


def _predict_sparse(coef: SparseCoef, X: np.ndarray) -> np.ndarray:
    if coef.n_nonzero == 0:
        return np.full(X.shape[0], coef.intercept)
    return X[:, coef.indices0()] @ coef.values + coef.intercept


def ridge_kfold_select(data: Dataset, ordering: Ordering, lgrid: LambdaGrid,
                       plan: CVPlan, cutoffs: np.ndarray | None = None,
                       policy: str = "center_and_scale") -> SelectionResult:
    """K-fold CV over every (lambda, nested subset) ridge fit.

    All p nested subsets are scored per fold through the rank-one-update
    path; cutoffs (subset sizes, decreasing, default p..1) restricts which
    sizes may be selected. The chosen pair is refit on the full data.
    """
    from .ridge_path import ridge_all_subsets_predict, ridge_fit

    if plan.mode != "kfold":
        raise OverlapError("plan mode must be 'kfold'")
    p = data.p
    if cutoffs is None:
        cutoffs = np.arange(p, 0, -1)
    cutoffs = np.asarray(cutoffs, dtype=int)
    scores_all = np.zeros((lgrid.L, p))
    for fold in plan.folds:
        train_rows = np.setdiff1d(np.arange(data.n), fold)
        std, info = standardize(data.take_rows(train_rows), policy)
        preds = ridge_all_subsets_predict(std, ordering, lgrid,
                                          info.transform_X(data.X[fold]))
        resid = preds + info.y_center - data.Y[fold]
        scores_all += np.mean(resid**2, axis=2)
    scores_all /= plan.n_folds
    # rows = candidate subset sizes, columns = lambdas
    scores = scores_all[:, p - cutoffs].T
    k0, l0 = _pick_cell(scores, np.ones_like(scores, dtype=bool))
    size = int(cutoffs[k0])
    lam = float(lgrid.values[l0])
    std_full, info_full = standardize(data, policy)
    subset = [int(j) for j in ordering.perm[:size]]
    b_std = ridge_fit(std_full, subset, lam)
    idx0 = np.flatnonzero(b_std)
    values, intercept = info_full.coef_to_original(idx0 + 1, b_std[idx0])
    chosen = SparseCoef(idx0 + 1, values, p, intercept)
    return SelectionResult(
        k_star=k0 + 1,
        l_star=l0 + 1,
        scores=scores,
        chosen=chosen,
        candidates_considered=int(scores.size),
    )


def _candidate_dense(c):
    if isinstance(c, SparseCoef):
        return c.to_dense(), c.intercept
    arr = np.asarray(c, dtype=float)
    return arr, 0.0


def candidate_test_rss(candidates, testX: np.ndarray, testY: np.ndarray) -> np.ndarray:
    """Residual sum of squares of each candidate on the test block."""
    if len(candidates) == 0:
        raise EmptyCandidates("need at least one candidate")
    testX = np.asarray(testX, dtype=float)
    testY = np.asarray(testY, dtype=float)
    out = np.empty(len(candidates))
    for m, cand in enumerate(candidates):
        b, intercept = _candidate_dense(cand)
        if b.shape[0] != testX.shape[1]:
            raise DimensionMismatch("candidate dimension does not match testX")
        r = testY - testX @ b - intercept
        out[m] = float(r @ r)
    return out


def test_split_select(candidates, testX: np.ndarray, testY: np.ndarray) -> int:
    """1-based position of the candidate with minimal test residual sum of
    squares; ties go to the smallest position."""
    rss = candidate_test_rss(candidates, testX, testY)
    return int(np.argmin(rss)) + 1


def oracle_select(candidates, beta_true: np.ndarray, Sigma: np.ndarray) -> int:
    """1-based position minimising (beta - b)' Sigma (beta - b); ties go to
    the smallest position. Simulation-only: requires the true coefficients."""
    if len(candidates) == 0:
        raise EmptyCandidates("need at least one candidate")
    beta_true = np.asarray(beta_true, dtype=float)
    Sigma = np.asarray(Sigma, dtype=float)
    best_m, best_val = 0, np.inf
    for m, cand in enumerate(candidates):
        b, _ = _candidate_dense(cand)
        d = b - beta_true
        val = float(d @ Sigma @ d)
        if val < best_val:
            best_m, best_val = m, val
    return best_m + 1


@dataclass(frozen=True)
class Theorem1Report:
    """All quantities of the selection-risk bound

        lhs <= (1+Psi)/(1-Psi) * oracle_term
               + 2*sqrt(2)*sigma*sqrt(1+c2)*sqrt(log(M)/n) / (1-Psi)

    with Psi = 2*sqrt(2)*nu*(1+c1)^(1/4)*(log(M)/n)^(1/4). When Psi >= 1
    the bound carries no content; vacuous is set and holds defaults True.
    """

    M: float
    n: int
    nu: float
    sigma: float
    c1: float
    c2: float
    Psi: float
    lhs: float
    oracle_term: float
    rhs: float
    holds: bool
    vacuous: bool
    prob_floor: float

    @property
    def violated(self) -> bool:
        return (not self.vacuous) and (not self.holds)


def theorem1_bound(lhs: float, oracle_term: float, M: float, n: int, nu: float,
                   sigma: float, c1: float, c2: float) -> Theorem1Report:
    """Evaluate the selection-risk bound for observed lhs/oracle values."""
    if M < 1:
        raise InvalidConstants("M must be >= 1")
    if c1 <= 0 or c2 <= 0:
        raise InvalidConstants("c1 and c2 must be positive")
    log_m = math.log(M)
    if log_m > 0 and c1 >= n / log_m - 1:
        raise InvalidConstants(f"need c1 < n/log(M) - 1 = {n / log_m - 1:.4f}")
    ratio = log_m / n
    psi = 2.0 * math.sqrt(2.0) * nu * (1.0 + c1) ** 0.25 * ratio**0.25
    vacuous = psi >= 1.0
    if vacuous:
        rhs = float("nan")
        holds = True
    else:
        rhs = ((1.0 + psi) / (1.0 - psi) * oracle_term
               + 2.0 * math.sqrt(2.0) * sigma * math.sqrt(1.0 + c2)
               * math.sqrt(ratio) / (1.0 - psi))
        holds = lhs <= rhs
    prob_floor = 1.0 - 2.0 * M ** (-c1) - 2.0 * M ** (-c2)
    return Theorem1Report(M=float(M), n=n, nu=nu, sigma=sigma, c1=c1, c2=c2,
                          Psi=psi, lhs=lhs, oracle_term=oracle_term, rhs=rhs,
                          holds=holds, vacuous=vacuous, prob_floor=prob_floor)


def make_fixed_candidates(p: int, M: int, beta: np.ndarray, rng: np.random.Generator,
                          d_min: float = 0.1, d_max: float = 2.0) -> np.ndarray:
    """Fixed candidate pool for the Monte-Carlo checker: beta plus random
    directions at spread-out distances. Nested prefixes of the pool give
    comparable sweeps over M."""
    out = np.empty((M, p))
    for m in range(M):
        u = rng.standard_normal(p)
        u /= np.linalg.norm(u)
        out[m] = beta + rng.uniform(d_min, d_max) * u
    return out


def theorem1_replicate(candidates: np.ndarray, beta: np.ndarray, n: int,
                       sigma: float, rng: np.random.Generator,
                       sigma_half: np.ndarray | None = None):
    """One draw of (X, Y); returns (lhs, oracle_term) for the candidate pool.

    Rows of X are W Sigma^{1/2} with standard normal W (identity Sigma when
    sigma_half is None).
    """
    M, p = candidates.shape
    W = rng.standard_normal((n, p))
    X = W if sigma_half is None else W @ sigma_half
    Y = X @ beta + sigma * rng.standard_normal(n)
    m_hat = test_split_select(list(candidates), X, Y) - 1
    if sigma_half is None:
        risks = np.linalg.norm(candidates - beta, axis=1)
    else:
        risks = np.linalg.norm((candidates - beta) @ sigma_half.T, axis=1)
    m_star = int(np.argmin(risks))
    return float(risks[m_hat]), float(risks[m_star])

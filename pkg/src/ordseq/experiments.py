"""Simulation suites behind the `simulate` command.

Each suite returns a list of row dicts (replicate, setting, method, metric,
value) that serialise to CSV deterministically for a given seed. Replicates
draw their generators from spawned seed sequences, so results do not depend
on how many worker processes run them.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .data_model import (
    Dataset,
    Ordering,
    make_subset_schedule,
    ordering_from_missingness,
    sample_weighted_ordering,
    standardize,
)
from .errors import InvalidSchedule
from .lasso_engine import SqrtLassoConfig, lambda_grid, lambda_grid_from_gamma
from .missing_data import estimate_surrogate
from .selection import (
    candidate_test_rss,
    kfold_cv_select,
    make_fixed_candidates,
    make_kfold_plan,
    theorem1_bound,
)
from .simgen import (
    SimConfig,
    corrupt_design,
    corruption_probs,
    gen_beta,
    gen_design,
    mask_missing,
    missingness_probs,
    pve,
    rho_signal,
    sigma_matrix,
)

SUITES = ("ordering-quality", "corruption", "missing", "theorem1")

COLUMNS = ("replicate", "setting", "method", "metric", "value")


def run_suite(suite: str, reps: int, seed: int = 0, threads: int = 1, **overrides):
    if suite == "ordering-quality":
        return ordering_quality_suite(reps, seed=seed, threads=threads, **overrides)
    if suite == "corruption":
        return corruption_suite(reps, seed=seed, threads=threads, **overrides)
    if suite == "missing":
        return missing_suite(reps, seed=seed, threads=threads, **overrides)
    if suite == "theorem1":
        return theorem1_suite(reps, seed=seed, **overrides)
    raise InvalidSchedule(f"unknown suite {suite!r}; choose from {SUITES}")


def _pmap(worker, args_list, threads):
    if threads <= 1 or len(args_list) <= 1:
        return [worker(a) for a in args_list]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(worker, args_list, chunksize=1))


def _coef_risk(coef, beta, sigma):
    """Root prediction risk sqrt((b - beta)' Sigma (b - beta)) of an
    original-scale sparse coefficient vector."""
    d = coef.to_dense() - beta
    return float(math.sqrt(max(d @ sigma @ d, 0.0)))


def _sparse_predict(coef, X):
    if coef.n_nonzero == 0:
        return np.full(X.shape[0], coef.intercept)
    return X[:, coef.indices0()] @ coef.values + coef.intercept


# ---------------------------------------------------------------------------
# ordering quality (controlled-informativeness orderings)


def _ordering_quality_rep(args):
    (rep, seed_entropy, log_etas, n, p, sparsity, coef_regime, sigma_spec,
     noise_sd, K, L, n_folds) = args
    rng = np.random.default_rng(seed_entropy)
    cfg = SimConfig(n=n, p=p, sigma_spec=sigma_spec, sparsity=sparsity,
                    coef_regime=coef_regime, noise_sd=noise_sd)
    X = gen_design(cfg, rng)
    beta, support = gen_beta(cfg, rng)
    Y = X @ beta + noise_sd * rng.standard_normal(n)
    data = Dataset(X, Y)
    sigma = sigma_matrix(sigma_spec, p)

    std, _ = standardize(data)
    grid = lambda_grid(std, L)
    plan = make_kfold_plan(n, n_folds, seed=int(rng.integers(2**31)))
    schedule = make_subset_schedule(p, K, min_size=max(1, sparsity))
    rows = []

    baseline = kfold_cv_select(data, Ordering.identity(p),
                               make_subset_schedule(p, 1), grid, plan,
                               cfg=SqrtLassoConfig.disabled())
    rows.append({"replicate": rep, "setting": "baseline", "method": "lasso",
                 "metric": "risk",
                 "value": _coef_risk(baseline.chosen, beta, sigma)})

    stop_cfg = SqrtLassoConfig.default(n, p)
    for log_eta in log_etas:
        rho = rho_signal(p, support, math.exp(log_eta))
        ordering = sample_weighted_ordering(rho, rng)
        sel = kfold_cv_select(data, ordering, schedule, grid, plan, cfg=stop_cfg)
        rows.append({"replicate": rep, "setting": f"log_eta={log_eta:g}",
                     "method": "grid", "metric": "risk",
                     "value": _coef_risk(sel.chosen, beta, sigma)})
        rows.append({"replicate": rep, "setting": f"log_eta={log_eta:g}",
                     "method": "grid", "metric": "subset_size",
                     "value": float(schedule.cutoffs[sel.k_star - 1])})
    return rows


def ordering_quality_suite(reps, seed=0, threads=1, log_etas=(-4.0, 0.0, 4.0),
                           n=100, p=500, sparsity=5, coef_regime="const_15",
                           sigma_spec="identity", noise_sd=1.0, K=10, L=100,
                           n_folds=5):
    """Prediction risk of the grid fit under orderings of varying quality,
    against a plain CV Lasso baseline on the same data."""
    seeds = np.random.SeedSequence(seed).spawn(reps)
    args = [(rep, seeds[rep], tuple(log_etas), n, p, sparsity, coef_regime,
             sigma_spec, noise_sd, K, L, n_folds) for rep in range(reps)]
    rows = []
    for chunk in _pmap(_ordering_quality_rep, args, threads):
        rows.extend(chunk)
    return rows


# ---------------------------------------------------------------------------
# corrupted designs (ordering = known corruption ranking)


def _corruption_rep(args):
    (rep, seed_entropy, regimes, n, p, n_test, sparsity, coef_regime,
     sigma_spec, noise_sd, K, L, n_folds) = args
    rng = np.random.default_rng(seed_entropy)
    cfg = SimConfig(n=n + n_test, p=p, sigma_spec=sigma_spec, sparsity=sparsity,
                    coef_regime=coef_regime, noise_sd=noise_sd)
    Xall = gen_design(cfg, rng)
    beta, _ = gen_beta(cfg, rng)
    Yall = Xall @ beta + noise_sd * rng.standard_normal(n + n_test)
    rows = []
    for regime in regimes:
        rho = corruption_probs(regime, p, rng)
        Xc = corrupt_design(Xall, rho, rng)
        ordering = Ordering(np.lexsort((np.arange(p), rho)) + 1)
        train = Dataset(Xc[:n], Yall[:n])
        std, _ = standardize(train)
        grid = lambda_grid(std, L)
        plan = make_kfold_plan(n, n_folds, seed=int(rng.integers(2**31)))
        for method, sched, order, stop in (
            ("grid", make_subset_schedule(p, K), ordering,
             SqrtLassoConfig.default(n, p)),
            ("lasso", make_subset_schedule(p, 1), Ordering.identity(p),
             SqrtLassoConfig.disabled()),
        ):
            sel = kfold_cv_select(train, order, sched, grid, plan, cfg=stop)
            yhat = _sparse_predict(sel.chosen, Xc[n:])
            rows.append({"replicate": rep, "setting": f"regime={regime}",
                         "method": method, "metric": "pve",
                         "value": pve(Yall[n:], yhat)})
    return rows


def corruption_suite(reps, seed=0, threads=1, regimes=(1, 2, 3, 4), n=150, p=400,
                     n_test=300, sparsity=10, coef_regime="unif_02",
                     sigma_spec="identity", noise_sd=1.0, K=25, L=50, n_folds=5):
    """Held-out PVE on designs with column-wise Gaussian replacement noise;
    the grid method orders columns by their known corruption probability."""
    seeds = np.random.SeedSequence(seed).spawn(reps)
    args = [(rep, seeds[rep], tuple(regimes), n, p, n_test, sparsity,
             coef_regime, sigma_spec, noise_sd, K, L, n_folds) for rep in range(reps)]
    rows = []
    for chunk in _pmap(_corruption_rep, args, threads):
        rows.extend(chunk)
    return rows


# ---------------------------------------------------------------------------
# heterogeneous missingness


def _missing_rep(args):
    (rep, seed_entropy, regimes, n, p, n_test, sparsity, coef_regime,
     sigma_spec, noise_sd, K, L, n_folds) = args
    rng = np.random.default_rng(seed_entropy)
    cfg = SimConfig(n=n + n_test, p=p, sigma_spec=sigma_spec, sparsity=sparsity,
                    coef_regime=coef_regime, noise_sd=noise_sd)
    Xall = gen_design(cfg, rng)
    beta, _ = gen_beta(cfg, rng)
    Yall = Xall @ beta + noise_sd * rng.standard_normal(n + n_test)
    Xtr, Xte = Xall[:n], Xall[n:]
    rows = []
    for regime in regimes:
        rho = missingness_probs(regime, p, rng)
        _, mask = mask_missing(Xtr, rho, rng)
        train = Dataset(Xtr, Yall[:n], mask=mask)
        ordering = ordering_from_missingness(mask)
        surr = estimate_surrogate(train)
        grid = lambda_grid_from_gamma(surr.gamma, L, ratio=0.01)
        plan = make_kfold_plan(n, n_folds, seed=int(rng.integers(2**31)))
        for method, sched, order in (
            ("grid", make_subset_schedule(p, K), ordering),
            ("cov_lasso", make_subset_schedule(p, 1), Ordering.identity(p)),
        ):
            sel = kfold_cv_select(train, order, sched, grid, plan,
                                  cfg=SqrtLassoConfig.default(n, p),
                                  mode="lasso-missing")
            yhat = _sparse_predict(sel.chosen, Xte)
            rows.append({"replicate": rep, "setting": f"regime={regime}",
                         "method": method, "metric": "pve",
                         "value": pve(Yall[n:], yhat)})
    return rows


def missing_suite(reps, seed=0, threads=1, regimes=(1, 2, 3), n=150, p=300,
                  n_test=600, sparsity=30, coef_regime="unif_02",
                  sigma_spec="ar_09", noise_sd=1.0, K=25, L=40, n_folds=5):
    """Fresh-test PVE of the missingness-ordered grid versus a plain
    covariance Lasso under the three missingness regimes."""
    seeds = np.random.SeedSequence(seed).spawn(reps)
    args = [(rep, seeds[rep], tuple(regimes), n, p, n_test, sparsity,
             coef_regime, sigma_spec, noise_sd, K, L, n_folds) for rep in range(reps)]
    rows = []
    for chunk in _pmap(_missing_rep, args, threads):
        rows.extend(chunk)
    return rows


# ---------------------------------------------------------------------------
# wall-time benchmark of the grid fit


def bench_grid(sizes=((71, 1000),), k_list=(1, 4, 16, 64), L=100, seed=0,
               sparsity=10, noise_sd=1.0, eta=20.0, min_size=1, repeats=1,
               **_ignored):
    """Time the grid fit for several subset counts on one fixed instance
    per size; with repeats > 1 the fastest of the runs is reported.
    Rows carry (n, p, K, seconds, solved, updates)."""
    import time as _time

    from .order_path import fit_order_path

    rows = []
    for n, p in sizes:
        rng = np.random.default_rng(seed)
        cfg = SimConfig(n=n, p=p, sparsity=min(sparsity, p), noise_sd=noise_sd)
        X = gen_design(cfg, rng)
        beta, support = gen_beta(cfg, rng)
        Y = X @ beta + noise_sd * rng.standard_normal(n)
        std, _ = standardize(Dataset(X, Y))
        grid = lambda_grid(std, L)
        ordering = sample_weighted_ordering(rho_signal(p, support, eta), rng)
        stop = SqrtLassoConfig.default(n, p)
        fit_order_path(std, ordering, make_subset_schedule(p, 1), grid, stop)  # warm caches
        for K in k_list:
            schedule = make_subset_schedule(p, int(K), min_size)
            best = np.inf
            for _ in range(max(1, repeats)):
                t0 = _time.perf_counter()
                fit = fit_order_path(std, ordering, schedule, grid, stop)
                best = min(best, _time.perf_counter() - t0)
            rows.append({"n": n, "p": p, "K": int(K), "seconds": best,
                         "solved": int((~fit.skipped & ~fit.early_stopped).sum()),
                         "updates": int(fit.n_coord_updates)})
    return rows


BENCH_COLUMNS = ("n", "p", "K", "seconds", "solved", "updates")


# ---------------------------------------------------------------------------
# selection-risk bound


def theorem1_suite(reps, seed=0, n=200, p=50, M=20, c1=1.0, c2=1.0, nu=1.0,
                   sigma=1.0, m_sweep=(2, 8, 32), d_min=0.5, d_max=0.65,
                   **_ignored):
    """Monte-Carlo check of the log(M)-price bound.

    Per replicate one fresh (X, Y) is drawn; the bound is evaluated for the
    selection among the first M fixed candidates, and the excess risk of the
    test-split winner over the oracle is recorded for every nested prefix in
    m_sweep on the same draw.
    """
    root = np.random.SeedSequence(seed)
    beta_rng = np.random.default_rng(root.spawn(1)[0])
    beta = beta_rng.standard_normal(p) / math.sqrt(p)
    max_m = max(int(M), max(m_sweep) if m_sweep else 0)
    seeds = root.spawn(reps + 1)[1:]
    rows = []
    for rep in range(reps):
        rng = np.random.default_rng(seeds[rep])
        # the replicate's candidate pool is drawn before and independently of
        # its test data, so the bound's conditioning on fixed candidates holds
        pool = make_fixed_candidates(p, max_m, beta, rng, d_min, d_max)
        risks = np.linalg.norm(pool - beta, axis=1)  # Sigma = identity
        X = rng.standard_normal((n, p))
        Y = X @ beta + sigma * rng.standard_normal(n)
        rss = candidate_test_rss(list(pool), X, Y)
        m_hat = int(np.argmin(rss[: int(M)]))
        lhs = float(risks[m_hat])
        oracle = float(np.min(risks[: int(M)]))
        report = theorem1_bound(lhs, oracle, M, n, nu, sigma, c1, c2)
        for metric, value in (("lhs", lhs), ("oracle", oracle),
                              ("rhs", report.rhs), ("psi", report.Psi),
                              ("holds", float(report.holds)),
                              ("vacuous", float(report.vacuous)),
                              ("violated", float(report.violated))):
            rows.append({"replicate": rep, "setting": f"M={int(M)}",
                         "method": "bound", "metric": metric, "value": value})
        for m in m_sweep:
            m_hat_m = int(np.argmin(rss[: int(m)]))
            rows.append({"replicate": rep, "setting": f"M={int(m)}",
                         "method": "sweep", "metric": "excess",
                         "value": float(risks[m_hat_m] - np.min(risks[: int(m)]))})
    return rows

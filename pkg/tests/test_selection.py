import math

import numpy as np
import pytest

from ordseq.data_model import (
    Dataset,
    Ordering,
    build_lag_matrix,
    make_subset_schedule,
    ordering_from_lags,
    standardize,
)
from ordseq.errors import (
    EmptyCandidates,
    FoldTooSmall,
    InvalidConstants,
    OverlapError,
)
from ordseq.lasso_engine import LambdaGrid, SparseCoef, SqrtLassoConfig, lambda_grid
from ordseq.selection import (
    CVPlan,
    chrono_select,
    kfold_cv_select,
    make_chrono_plan,
    make_fixed_candidates,
    make_kfold_plan,
    make_single_split_plan,
    oracle_select,
    theorem1_bound,
    theorem1_replicate,
)
from ordseq.selection import test_split_select as split_select


class TestCVPlan:
    def test_kfold_structure(self):
        plan = make_kfold_plan(100, 5, seed=1)
        assert plan.n_folds == 5
        sizes = [f.shape[0] for f in plan.folds]
        assert sizes == [20] * 5
        allidx = np.concatenate(plan.folds)
        np.testing.assert_array_equal(np.sort(allidx), np.arange(100))

    def test_overlap_rejected(self):
        with pytest.raises(OverlapError):
            CVPlan(4, (np.array([0, 1]), np.array([1, 2, 3])), "kfold")

    def test_small_fold_rejected(self):
        with pytest.raises(FoldTooSmall):
            make_kfold_plan(10, 8)

    def test_single_split_plan(self):
        plan = make_single_split_plan(50, 30, seed=2)
        assert plan.mode == "single_split"
        assert plan.folds[0].shape[0] == 30 and plan.folds[1].shape[0] == 20
        with pytest.raises(FoldTooSmall):
            make_single_split_plan(10, 9)

    def test_chrono_plan_contiguous(self):
        plan = make_chrono_plan(117, (39, 39, 39))
        assert [f.shape[0] for f in plan.folds] == [39, 39, 39]
        assert plan.folds[1][0] == 39
        with pytest.raises(OverlapError):
            make_chrono_plan(100, (39, 39, 39))


def informative_instance(seed=0, n=60, p=20, s=2, noise=1e-4):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    beta = np.zeros(p)
    beta[:s] = 2.0
    Y = X @ beta + noise * rng.standard_normal(n)
    perm = np.argsort(-np.abs(beta), kind="stable") + 1
    return Dataset(X, Y), Ordering(perm), beta


class TestKfoldCvSelect:
    def test_single_candidate_selected(self):
        data, ordering, _ = informative_instance()
        std, _ = standardize(data)
        grid = lambda_grid(std, 1)
        plan = make_kfold_plan(data.n, 5, seed=0)
        sel = kfold_cv_select(data, ordering, make_subset_schedule(data.p, 1),
                              grid, plan)
        assert (sel.k_star, sel.l_star) == (1, 1)
        assert sel.candidates_considered == 1

    def test_noiseless_informative_ordering_recovers_signal(self):
        hits = 0
        runs = 25
        for seed in range(runs):
            data, ordering, beta = informative_instance(seed=seed, noise=1e-6)
            std, _ = standardize(data)
            grid = lambda_grid(std, 25, ratio=1e-4)
            plan = make_kfold_plan(data.n, 5, seed=seed)
            sel = kfold_cv_select(data, ordering, make_subset_schedule(data.p, 5),
                                  grid, plan)
            score = sel.scores[sel.k_star - 1, sel.l_star - 1]
            if {1, 2} <= set(sel.chosen.indices.tolist()) and score < 1e-4:
                hits += 1
        assert hits >= 0.95 * runs

    def test_fold_count_and_sizes(self):
        data, ordering, _ = informative_instance(n=100)
        plan = make_kfold_plan(100, 5, seed=3)
        assert all(f.shape[0] == 20 for f in plan.folds)
        std, _ = standardize(data)
        grid = lambda_grid(std, 4, ratio=0.1)
        sched = make_subset_schedule(data.p, 3)
        sel = kfold_cv_select(data, ordering, sched, grid, plan)
        assert sel.scores.shape == (3, 4)
        assert sel.candidates_considered == 12

    def test_scores_invariant_to_fold_order(self):
        data, ordering, _ = informative_instance(seed=5)
        std, _ = standardize(data)
        grid = lambda_grid(std, 5, ratio=0.05)
        sched = make_subset_schedule(data.p, 2)
        plan = make_kfold_plan(data.n, 4, seed=7)
        shuffled = CVPlan(plan.n, tuple(plan.folds[::-1]), "kfold", plan.seed)
        a = kfold_cv_select(data, ordering, sched, grid, plan)
        b = kfold_cv_select(data, ordering, sched, grid, shuffled)
        np.testing.assert_array_equal(a.scores, b.scores)
        assert (a.k_star, a.l_star) == (b.k_star, b.l_star)

    def test_early_stopped_cells_not_candidates(self):
        data, ordering, _ = informative_instance(seed=11, noise=1.5)
        std, _ = standardize(data)
        grid = lambda_grid(std, 40, ratio=1e-4)
        plan = make_kfold_plan(data.n, 5, seed=2)
        sel = kfold_cv_select(data, ordering, make_subset_schedule(data.p, 2),
                              grid, plan, cfg=SqrtLassoConfig.default(data.n, data.p))
        assert sel.candidates_considered < 2 * 40


class TestTestSplitSelect:
    def test_single_candidate(self):
        assert split_select([np.zeros(3)], np.eye(3), np.ones(3)) == 1

    def test_picks_truth_on_noiseless_data(self):
        rng = np.random.default_rng(0)
        p = 6
        beta = rng.standard_normal(p)
        X = rng.standard_normal((30, p))
        Y = X @ beta
        assert split_select([np.zeros(p), beta], X, Y) == 2

    def test_matches_bruteforce(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            M, n, p = 10, 50, 7
            cands = [rng.standard_normal(p) for _ in range(M)]
            X = rng.standard_normal((n, p))
            Y = rng.standard_normal(n)
            rss = [np.sum((Y - X @ b) ** 2) for b in cands]
            assert split_select(cands, X, Y) == int(np.argmin(rss)) + 1

    def test_scale_invariance_of_argmin(self):
        # rescaling all residuals by a positive constant keeps the argmin
        rng = np.random.default_rng(2)
        cands = [rng.standard_normal(4) for _ in range(5)]
        X = rng.standard_normal((20, 4))
        Y = rng.standard_normal(20)
        base = split_select(cands, X, Y)
        rss = np.array([np.sum((Y - X @ b) ** 2) for b in cands])
        assert int(np.argmin(rss * 7.5)) + 1 == base
        assert split_select([3.0 * c for c in cands], 3.0 * X, 9.0 * Y) == base

    def test_ties_to_smallest_index(self):
        b = np.array([1.0, 0.0])
        assert split_select([b, b.copy()], np.eye(2), np.ones(2)) == 1

    def test_empty_rejected(self):
        with pytest.raises(EmptyCandidates):
            split_select([], np.eye(2), np.ones(2))


class TestOracleSelect:
    def test_exact_candidate_wins(self):
        rng = np.random.default_rng(3)
        beta = rng.standard_normal(5)
        cands = [beta + rng.standard_normal(5), beta, beta - 1]
        assert oracle_select(cands, beta, np.eye(5)) == 2

    def test_identity_sigma_is_euclidean(self):
        beta = np.zeros(3)
        cands = [np.array([2.0, 0, 0]), np.array([0.5, 0.5, 0.5]), np.ones(3)]
        dists = [np.sum((c - beta) ** 2) for c in cands]
        assert oracle_select(cands, beta, np.eye(3)) == int(np.argmin(dists)) + 1

    def test_matches_bruteforce_general_sigma(self):
        rng = np.random.default_rng(4)
        A = rng.standard_normal((6, 6))
        Sigma = A @ A.T / 6
        beta = rng.standard_normal(6)
        cands = [rng.standard_normal(6) for _ in range(8)]
        vals = [(c - beta) @ Sigma @ (c - beta) for c in cands]
        assert oracle_select(cands, beta, Sigma) == int(np.argmin(vals)) + 1


class TestTheorem1Bound:
    def test_vacuous_at_small_n(self):
        # Psi = 2*sqrt(2)*2^(1/4)*(1/16)^(1/4) ~= 1.6818 >= 1
        rep = theorem1_bound(lhs=1.0, oracle_term=0.5, M=math.e, n=16,
                             nu=1.0, sigma=1.0, c1=1.0, c2=1.0)
        assert rep.Psi == pytest.approx(1.6818, abs=2e-4)
        assert rep.vacuous and rep.holds and not rep.violated
        assert math.isnan(rep.rhs)

    def test_zero_nu_reduces_to_additive_bound(self):
        M, n, c2, sigma = 8.0, 100, 1.0, 2.0
        rep = theorem1_bound(lhs=0.1, oracle_term=0.7, M=M, n=n, nu=0.0,
                             sigma=sigma, c1=1.0, c2=c2)
        assert rep.Psi == 0.0
        expect = 0.7 + 2 * math.sqrt(2) * sigma * math.sqrt(1 + c2) * math.sqrt(math.log(M) / n)
        assert rep.rhs == pytest.approx(expect, rel=1e-12)

    def test_single_candidate_bound_is_oracle(self):
        rep = theorem1_bound(lhs=0.42, oracle_term=0.42, M=1, n=50, nu=1.0,
                             sigma=1.0, c1=1.0, c2=1.0)
        assert rep.Psi == 0.0
        assert rep.rhs == pytest.approx(0.42)
        assert rep.holds

    def test_probability_floor(self):
        rep = theorem1_bound(0.0, 0.0, M=20, n=4000, nu=1.0, sigma=1.0,
                             c1=1.0, c2=1.0)
        assert rep.prob_floor == pytest.approx(1 - 4 / 20)

    def test_constant_validation(self):
        with pytest.raises(InvalidConstants):
            theorem1_bound(0.0, 0.0, M=100, n=10, nu=1.0, sigma=1.0,
                           c1=5.0, c2=1.0)
        with pytest.raises(InvalidConstants):
            theorem1_bound(0.0, 0.0, M=10, n=100, nu=1.0, sigma=1.0,
                           c1=-1.0, c2=1.0)

    def test_nonvacuous_bound_rarely_violated(self):
        # constants chosen so Psi < 1 and the probability floor is meaningful
        M, n, c1, c2 = 20, 1000, 1.0, 1.0
        rng = np.random.default_rng(0)
        beta = rng.standard_normal(30) / math.sqrt(30)
        pool = make_fixed_candidates(30, M, beta, rng)
        violations = 0
        for _ in range(100):
            lhs, oracle = theorem1_replicate(pool, beta, n, 1.0, rng)
            rep = theorem1_bound(lhs, oracle, M, n, 1.0, 1.0, c1, c2)
            assert not rep.vacuous
            violations += rep.violated
        assert violations / 100 <= 2 * M**-c1 + 2 * M**-c2


class TestChronoSelect:
    def test_split_overlap_rejected(self):
        data, ordering, _ = informative_instance(n=30)
        std, _ = standardize(data)
        grid = lambda_grid(std, 3, ratio=0.1)
        sched = make_subset_schedule(data.p, 1)
        with pytest.raises(OverlapError):
            chrono_select(data, (np.arange(12), np.arange(10, 20),
                                 np.arange(20, 30)), ordering, sched, grid)

    def test_single_candidate_protocol(self):
        data, ordering, _ = informative_instance(n=45, noise=0.01)
        std, _ = standardize(data)
        grid = lambda_grid(std, 1)
        sched = make_subset_schedule(data.p, 1)
        sel = chrono_select(data, (np.arange(15), np.arange(15, 30),
                                   np.arange(30, 45)), ordering, sched, grid)
        assert (sel.k_star, sel.l_star) == (1, 1)
        assert sel.test_mse is not None and sel.test_mse >= 0

    def test_ar1_lag_signal_recovered(self):
        # lag-1 autoregression: the target's first lag should be selected
        hits = 0
        runs = 200
        for seed in range(runs):
            rng = np.random.default_rng(seed)
            T = 75
            y = np.zeros(T)
            for t in range(1, T):
                y[t] = 0.8 * y[t - 1] + 0.3 * rng.standard_normal()
            data = build_lag_matrix(y.reshape(-1, 1), max_lag=5, target_series=1)
            ordering = ordering_from_lags(1, 5, target_series=1, season_lag=None)
            std, _ = standardize(data)
            grid = lambda_grid(std, 20, ratio=0.01)
            sched = make_subset_schedule(data.p, 3)
            n = data.n
            third = n // 3
            sel = chrono_select(data, (np.arange(third), np.arange(third, 2 * third),
                                       np.arange(2 * third, n)), ordering, sched, grid)
            if 1 in set(sel.chosen.indices.tolist()):
                hits += 1
        assert hits >= 0.95 * runs

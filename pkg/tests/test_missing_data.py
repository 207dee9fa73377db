import numpy as np
import pytest

from ordseq.data_model import (
    Dataset,
    Ordering,
    StandardizationInfo,
    make_subset_schedule,
    standardize,
)
from ordseq.errors import ConstantColumn, EigenFailure, EmptyPairOverlap
from ordseq.lasso_engine import (
    LambdaGrid,
    SparseCoef,
    cov_cd_lasso,
    lambda_grid,
)
from ordseq.missing_data import (
    CovSurrogate,
    estimate_surrogate,
    psd_correct,
    smallest_eigenvalue,
    surrogate_cv_score,
    surrogate_from_full_data,
)
from ordseq.order_path import fit_order_path, fit_order_path_cov

from .reference import fista_cov


def full_mask_dataset(rng, n=30, p=5):
    X = rng.standard_normal((n, p))
    Y = rng.standard_normal(n)
    return Dataset(X, Y, mask=np.ones((n, p), dtype=bool))


class TestEstimateSurrogate:
    def test_no_missing_reduces_to_exact_moments(self):
        rng = np.random.default_rng(0)
        d = full_mask_dataset(rng)
        surr = estimate_surrogate(d)
        std, info = standardize(Dataset(d.X, d.Y))
        np.testing.assert_allclose(surr.Gamma, std.X.T @ std.X / d.n, atol=1e-12)
        np.testing.assert_allclose(surr.gamma, std.X.T @ std.Y / d.n, atol=1e-12)
        assert np.all(surr.pairwise_counts == d.n)

    def test_single_column_half_missing_by_hand(self):
        # observed entries of x: rows 0 and 2; centered on their mean
        X = np.array([[2.0], [np.nan], [4.0], [np.nan]])
        mask = np.array([[True], [False], [True], [False]])
        Y = np.array([1.0, 2.0, 3.0, 4.0])
        surr = estimate_surrogate(Dataset(X, Y, mask=mask), policy="center_only")
        # x observed: (2, 4), mean 3 -> centered (-1, 1); y centered by 2.5
        # gamma = ((-1)(1-2.5) + (1)(3-2.5)) / 2 = (1.5 + 0.5)/2 = 1.0
        assert surr.gamma[0] == pytest.approx(1.0)
        # Gamma_11 = ((-1)^2 + 1^2) / 2 = 1
        assert surr.Gamma[0, 0] == pytest.approx(1.0)
        assert surr.pairwise_counts[0, 0] == 2

    def test_matches_bruteforce_double_loop(self):
        rng = np.random.default_rng(1)
        n, p = 50, 3
        X = rng.standard_normal((n, p))
        Y = rng.standard_normal(n)
        mask = rng.uniform(size=(n, p)) > 0.3
        surr = estimate_surrogate(Dataset(X, Y, mask=mask))
        means = np.array([X[mask[:, j], j].mean() for j in range(p)])
        sds = np.array([X[mask[:, j], j].std() for j in range(p)])
        Xt = np.where(mask, (X - means) / sds, 0.0)
        Yc = Y - Y.mean()
        for j in range(p):
            cnt_j = 0
            acc = 0.0
            for i in range(n):
                if mask[i, j]:
                    cnt_j += 1
                    acc += Xt[i, j] * Yc[i]
            assert surr.gamma[j] == pytest.approx(acc / cnt_j, abs=1e-12)
            for k in range(p):
                cnt = 0
                acc = 0.0
                for i in range(n):
                    if mask[i, j] and mask[i, k]:
                        cnt += 1
                        acc += Xt[i, j] * Xt[i, k]
                assert surr.pairwise_counts[j, k] == cnt
                assert surr.Gamma[j, k] == pytest.approx(acc / cnt, abs=1e-12)

    def test_empty_pair_overlap_detected(self):
        X = np.array([[1.0, np.nan], [2.0, np.nan], [np.nan, 1.0], [np.nan, 2.0]])
        mask = ~np.isnan(X)
        with pytest.raises(EmptyPairOverlap) as exc:
            estimate_surrogate(Dataset(X, np.zeros(4), mask=mask))
        assert {exc.value.j, exc.value.k} == {1, 2}

    def test_column_needs_two_observations(self):
        X = np.ones((4, 2))
        X[:, 0] = [1.0, 2.0, 3.0, 4.0]
        mask = np.ones((4, 2), dtype=bool)
        mask[1:, 1] = False
        with pytest.raises(ConstantColumn):
            estimate_surrogate(Dataset(X, np.zeros(4), mask=mask))

    def test_external_info_used_for_transform(self):
        rng = np.random.default_rng(2)
        d = full_mask_dataset(rng, n=20, p=3)
        info = StandardizationInfo(np.zeros(3), np.ones(3), 0.0, "center_only")
        surr = estimate_surrogate(d, info=info)
        np.testing.assert_allclose(surr.Gamma, d.X.T @ d.X / d.n, atol=1e-12)
        np.testing.assert_allclose(surr.gamma, d.X.T @ d.Y / d.n, atol=1e-12)


class TestSmallestEigenvalue:
    def test_matches_dense_solver(self):
        rng = np.random.default_rng(3)
        for p in (2, 3, 10, 40):
            A = rng.standard_normal((p, p))
            G = 0.5 * (A + A.T)
            exact = np.linalg.eigvalsh(G)[0]
            got = smallest_eigenvalue(G)
            assert got == pytest.approx(exact, rel=1e-6, abs=1e-9)

    def test_failure_when_no_budget(self):
        rng = np.random.default_rng(4)
        A = rng.standard_normal((60, 60))
        G = 0.5 * (A + A.T)
        with pytest.raises(EigenFailure):
            smallest_eigenvalue(G, tol=1e-14, maxiter=1)


class TestPsdCorrect:
    def test_already_psd_untouched(self):
        G = np.diag([2.0, 1.0, 0.5])
        surr = CovSurrogate(G, np.zeros(3), 0.0, np.ones((3, 3), int), 10, 1.0,
                            StandardizationInfo.identity(3))
        out = psd_correct(surr)
        assert out.ridge_shift == 0.0
        np.testing.assert_array_equal(out.Gamma, G)
        assert out.corrected

    def test_diagonal_example(self):
        G = np.diag([1.0, -0.5])
        surr = CovSurrogate(G, np.zeros(2), 0.0, np.ones((2, 2), int), 10, 1.0,
                            StandardizationInfo.identity(2))
        out = psd_correct(surr)
        assert out.ridge_shift == pytest.approx(0.5, abs=1e-8)
        np.testing.assert_allclose(np.diag(out.Gamma), [1.5, 0.0], atol=1e-8)

    def test_random_indefinite_becomes_psd(self):
        rng = np.random.default_rng(5)
        for _ in range(5):
            A = rng.standard_normal((10, 10))
            G = 0.5 * (A + A.T)
            surr = CovSurrogate(G, np.zeros(10), 0.0, np.ones((10, 10), int),
                                10, 1.0, StandardizationInfo.identity(10))
            out = psd_correct(surr)
            assert np.linalg.eigvalsh(out.Gamma)[0] >= -1e-8

    def test_shift_is_nonneg_identity_multiple(self):
        rng = np.random.default_rng(6)
        A = rng.standard_normal((8, 8))
        G = 0.5 * (A + A.T)
        surr = CovSurrogate(G, np.zeros(8), 0.0, np.ones((8, 8), int), 10, 1.0,
                            StandardizationInfo.identity(8))
        out = psd_correct(surr)
        diff = out.Gamma - G
        assert out.ridge_shift >= 0
        np.testing.assert_allclose(diff, out.ridge_shift * np.eye(8), atol=1e-14)
        assert np.all(np.linalg.eigvalsh(out.Gamma) >= np.linalg.eigvalsh(G) - 1e-12)


class TestEquivalenceWithRidgeTerm:
    def test_corrected_solve_equals_uncorrected_plus_ridge(self):
        rng = np.random.default_rng(7)
        n, p = 25, 8
        X = rng.standard_normal((n, p))
        Y = rng.standard_normal(n)
        mask = rng.uniform(size=(n, p)) > 0.45
        surr = estimate_surrogate(Dataset(X, Y, mask=mask))
        corr = psd_correct(surr)
        assert corr.ridge_shift > 0
        for lam in (0.3, 0.15, 0.05):
            via_corrected = cov_cd_lasso(corr, None, lam, tol=1e-11).to_dense()
            via_ridge_term = fista_cov(surr.Gamma, surr.gamma, lam,
                                       ridge=corr.ridge_shift, n_iter=500_000)
            np.testing.assert_allclose(via_corrected, via_ridge_term, atol=1e-8)


class TestSurrogateCvScore:
    def test_zero_coef_scores_zero(self):
        rng = np.random.default_rng(8)
        surr = estimate_surrogate(full_mask_dataset(rng))
        assert surrogate_cv_score(SparseCoef.zero(5), surr) == 0.0

    def test_fully_observed_matches_mse_shift(self):
        rng = np.random.default_rng(9)
        d = full_mask_dataset(rng, n=25, p=4)
        surr = estimate_surrogate(d)
        std, _ = standardize(Dataset(d.X, d.Y))
        for _ in range(5):
            b = rng.standard_normal(4) * (rng.uniform(size=4) > 0.3)
            coef = SparseCoef.from_dense(b)
            score = surrogate_cv_score(coef, surr)
            resid = std.Y - std.X @ b
            expect = (resid @ resid - std.Y @ std.Y) / d.n
            assert score == pytest.approx(expect, abs=1e-10)

    def test_dimension_mismatch_rejected(self):
        rng = np.random.default_rng(11)
        surr = estimate_surrogate(full_mask_dataset(rng, n=20, p=3))
        from ordseq.errors import DimensionMismatch
        with pytest.raises(DimensionMismatch):
            surrogate_cv_score(SparseCoef.zero(7), surr)

    def test_quadratic_scaling(self):
        rng = np.random.default_rng(10)
        surr = estimate_surrogate(full_mask_dataset(rng, n=20, p=3))
        b = rng.standard_normal(3)
        s1 = surrogate_cv_score(SparseCoef.from_dense(b), surr)
        s2 = surrogate_cv_score(SparseCoef.from_dense(2 * b), surr)
        lin = float(b @ surr.gamma)
        quad = float(b @ surr.Gamma @ b)
        assert s1 == pytest.approx(-2 * lin + quad, abs=1e-12)
        assert s2 == pytest.approx(-4 * lin + 4 * quad, abs=1e-12)


class TestCovOrderPath:
    def test_fully_observed_grid_matches_data_form(self):
        rng = np.random.default_rng(11)
        n, p = 40, 10
        X = rng.standard_normal((n, p))
        beta = np.zeros(p)
        beta[:3] = [2.0, -1.0, 1.5]
        Y = X @ beta + 0.4 * rng.standard_normal(n)
        std, info = standardize(Dataset(X, Y))
        grid = lambda_grid(std, 12, ratio=0.05)
        ordering = Ordering(rng.permutation(p) + 1)
        schedule = make_subset_schedule(p, 4)
        data_fit = fit_order_path(std, ordering, schedule, grid)
        surr = estimate_surrogate(Dataset(X, Y, mask=np.ones((n, p), bool)))
        cov_fit = fit_order_path_cov(surr, ordering, schedule, grid)
        for k in range(schedule.K):
            for l in range(grid.L):
                np.testing.assert_allclose(cov_fit.coefs[k][l].to_dense(),
                                           data_fit.coefs[k][l].to_dense(),
                                           atol=1e-8)

    def test_per_subset_shift_shrinks_for_clean_subsets(self):
        rng = np.random.default_rng(12)
        n, p = 80, 40
        X = rng.standard_normal((n, p))
        Y = rng.standard_normal(n)
        mask = np.ones((n, p), dtype=bool)
        mask[:, 20:] = rng.uniform(size=(n, 20)) > 0.4  # dirty second half
        surr = estimate_surrogate(Dataset(X, Y, mask=mask))
        full_shift = psd_correct(surr).ridge_shift
        clean_shift = psd_correct(surr.restrict(np.arange(20))).ridge_shift
        assert clean_shift < full_shift

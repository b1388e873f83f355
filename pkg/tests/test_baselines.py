import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import make_design
from oracles import gcv_explicit, ic_explicit
from ridge_mml.baselines import (
    GridSpec,
    _cv_summary,
    cv10_select,
    cv_folds,
    cv_lambda_max,
    cv_score,
    gcv_select,
    gibbs_log_joint,
    gibbs_rr,
    hkb_classic,
    hkb_extended,
    ic_select,
)
from ridge_mml.core import estimate_rr
from ridge_mml.data import StandardizedDesign
from ridge_mml.exceptions import EmptyGrid, NonPositiveHyperparameter, SingularDesign, TooFewRows
from ridge_mml.posterior import posterior_fit


class TestGrid:
    def test_default_grid(self):
        g = GridSpec().values()
        assert g[0] == 0.0 and g[-1] == pytest.approx(500.0) and g.size == 100_001

    def test_invalid(self):
        with pytest.raises(EmptyGrid):
            GridSpec(0, 1, 0).values()
        with pytest.raises(EmptyGrid):
            gcv_select(make_design(0), [])


class TestCriteria:
    @given(st.integers(0, 10_000))
    def test_gcv_matches_explicit(self, seed):
        D = make_design(seed, n=14, p=4)
        grid = np.array([0.01, 0.3, 1.0, 4.0, 25.0])
        trace = gcv_select(D, grid)
        ref = [gcv_explicit(D.X, D.y, g) for g in grid]
        np.testing.assert_allclose(trace.criterion, ref, rtol=1e-9)
        assert trace.chosen == grid[int(np.argmin(ref))]

    @pytest.mark.parametrize("name,penalty", [("BIC", np.log(14)), ("AIC", 2.0)])
    def test_ic_matches_explicit(self, name, penalty):
        D = make_design(8, n=14, p=4)
        grid = np.array([0.0, 0.2, 2.0, 20.0])
        trace = ic_select(D, name, grid)
        ref = [ic_explicit(D.X, D.y, g, penalty) for g in grid]
        np.testing.assert_allclose(trace.criterion, ref, rtol=1e-9)

    def test_gcv_skips_saturated_points(self):
        # square full-rank design: zero shrinkage gives df = n
        D = StandardizedDesign.from_arrays(np.diag([3.0, 2.0, 1.0]), np.array([1.0, -1, 2]))
        trace = gcv_select(D, np.array([0.0, 0.5, 1.0]))
        np.testing.assert_array_equal(trace.grid, [0.5, 1.0])

    def test_ic_rejects_unknown(self):
        with pytest.raises(ValueError):
            ic_select(make_design(0), "HQ")

    def test_trace_csv(self):
        trace = gcv_select(make_design(0), np.array([0.1, 1.0]))
        lines = trace.to_csv().splitlines()
        assert lines[0] == "lambda,gcv" and len(lines) == 3

    def test_iris_gcv(self, iris_design):
        assert gcv_select(iris_design).chosen == pytest.approx(0.07, abs=0.005)


class TestHkb:
    def test_hand_example(self):
        # orthonormal-style design with d = (2, 1)
        U = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0], [0.0, 0.0]])
        X = U * np.array([2.0, 1.0])
        y = np.array([2.0, 1.0, 1.0, 1.0])
        D = StandardizedDesign.from_arrays(X, y)
        # alpha_hat = (1, 1), rss = 2, sigma2 = 2 / 2 = 1, lambda = 2 * 1 / 2
        assert hkb_classic(D) == pytest.approx(1.0)

    def test_singular(self):
        X = np.random.default_rng(0).normal(size=(4, 6))
        with pytest.raises(SingularDesign):
            hkb_classic(StandardizedDesign.from_arrays(X, np.arange(4.0)))

    def test_iris_value(self, iris_design):
        assert hkb_classic(iris_design) == pytest.approx(0.1613, abs=5e-4)

    def test_close_to_marginal_likelihood_choice(self, iris_design):
        rr = estimate_rr(iris_design).lambda_hat
        assert abs(hkb_classic(iris_design) - rr) <= 0.2 * rr

    @given(st.integers(0, 10_000))
    def test_extended_matches_enumeration(self, seed):
        D = make_design(seed, n=12, p=6, noise=1.0)
        best = None
        for r in range(1, min(D.q, D.n - 1) + 1):
            fit = np.sum(D.uty[:r] ** 2)
            s2 = (D.yty - fit) / (D.n - r)
            lam = r * s2 / np.sum(D.alpha_hat[:r] ** 2)
            dfv = sum(dk**4 / (dk**2 + lam) ** 2 for dk in D.d)
            crit = abs(r - dfv)
            if best is None or crit < best[0]:
                best = (crit, lam, r)
        lam, r = hkb_extended(D, return_rank=True)
        assert r == best[2]
        assert lam == pytest.approx(best[1], rel=1e-10)

    def test_extended_handles_wide_design(self):
        X = np.random.default_rng(2).normal(size=(6, 20))
        D = StandardizedDesign.from_arrays(X, np.random.default_rng(3).normal(size=6))
        assert hkb_extended(D) > 0


class TestCrossValidation:
    def test_folds_partition(self):
        folds = cv_folds(23, seed=4)
        assert len(folds) == 10
        joined = np.sort(np.concatenate(folds))
        np.testing.assert_array_equal(joined, np.arange(23))
        sizes = sorted(len(f) for f in folds)
        assert sizes[-1] - sizes[0] <= 1

    def test_folds_deterministic(self):
        a = cv_folds(40, seed=7)
        b = cv_folds(40, seed=7)
        assert all(np.array_equal(x, y) for x, y in zip(a, b))
        c = cv_folds(40, seed=8)
        assert not all(np.array_equal(x, y) for x, y in zip(a, c))

    def test_leave_one_out_when_small(self):
        folds = cv_folds(10, seed=0)
        assert sorted(len(f) for f in folds) == [1] * 10
        assert len(cv_folds(5, seed=0)) == 5
        with pytest.raises(TooFewRows):
            cv_folds(2)

    def test_score_matches_manual_folds(self):
        D = make_design(12, n=23, p=4)
        lam = 0.8
        cv, se = cv_score(D, lambda d: np.full(d.size, lam), seed=3)
        errs = []
        for test in cv_folds(D.n, seed=3):
            train = np.setdiff1d(np.arange(D.n), test)
            Xt, yt = D.X[train], D.y[train]
            beta = np.linalg.solve(Xt.T @ Xt + lam * np.eye(D.p), Xt.T @ yt)
            errs.append(np.mean((D.y[test] - D.X[test] @ beta) ** 2))
        assert cv == pytest.approx(np.mean(errs), rel=1e-10)
        assert se == pytest.approx(np.std(errs, ddof=1) / np.sqrt(10), rel=1e-10)

    def test_single_fold_has_zero_se(self):
        cv, se = _cv_summary(np.array([[1.0, 2.0]]))
        np.testing.assert_array_equal(se, 0.0)
        np.testing.assert_array_equal(cv, [1.0, 2.0])

    def test_lambda_max_rule(self, iris_design):
        lmax = cv_lambda_max(iris_design)
        D = iris_design
        ref = np.max(np.abs(D.W @ D.alpha_hat))

        def biggest(lam):
            return np.max(np.abs(D.W @ (D.alpha_hat * D.d2 / (D.d2 + lam))))

        assert biggest(lmax) < 1e-4 * ref
        assert biggest(lmax / 10) >= 1e-4 * ref

    def test_cv10_grid_and_choice(self, iris_design):
        trace = cv10_select(iris_design)
        assert trace.grid.size == 101 and trace.grid[0] == 0.0
        assert np.all(np.diff(trace.grid[1:]) > 0)
        assert trace.grid[-1] == cv_lambda_max(iris_design)
        assert trace.se.shape == trace.criterion.shape
        assert trace.chosen == trace.grid[np.argmin(trace.criterion)]
        assert 0 < trace.chosen < 5


class TestGibbs:
    def test_fixed_lambda_matches_closed_form(self, iris_design):
        lam = 0.5
        res = gibbs_rr(iris_design, iterations=20_000, burn_in=0, fixed_lambda=lam,
                       seed=1)
        post = posterior_fit(iris_design, np.full(iris_design.q, lam))
        mc_se = np.sqrt(res.beta_var / res.retained)
        assert np.all(np.abs(res.beta_mean - post.beta_bar) < 5 * mc_se)
        # exact marginal variance of each coefficient
        exact_var = post.b_bar / (post.a_bar - 1) * (
            iris_design.W**2 @ (1 / (lam + iris_design.d2)))
        np.testing.assert_allclose(res.beta_var, exact_var, rtol=0.05)
        sig_se = np.sqrt(res.sigma2_var / res.retained)
        assert abs(res.sigma2_mean - post.sigma2_mean) < 5 * sig_se
        assert res.lambda_mean == lam and res.lambda_var == 0.0

    def test_inverse_gamma_moment(self):
        D = make_design(3, n=30, p=3)
        res = gibbs_rr(D, iterations=30_000, burn_in=0, fixed_lambda=1.0, seed=5)
        post = posterior_fit(D, np.ones(D.q))
        ref_var = post.b_bar**2 / ((post.a_bar - 1) ** 2 * (post.a_bar - 2))
        assert res.sigma2_var == pytest.approx(ref_var, rel=0.05)

    def test_deterministic_for_seed(self, iris_design):
        a = gibbs_rr(iris_design, iterations=3000, burn_in=500, seed=9)
        b = gibbs_rr(iris_design, iterations=3000, burn_in=500, seed=9)
        c = gibbs_rr(iris_design, iterations=3000, burn_in=500, seed=10)
        np.testing.assert_array_equal(a.beta_mean, b.beta_mean)
        assert a.lambda_mean == b.lambda_mean
        assert a.lambda_mean != c.lambda_mean

    def test_samples_and_shapes(self, iris_design):
        res = gibbs_rr(iris_design, iterations=1500, burn_in=500, seed=0,
                       keep_samples=True)
        assert res.retained == 1000
        assert res.samples["beta"].shape == (1000, iris_design.p)
        np.testing.assert_allclose(res.samples["beta"].mean(axis=0), res.beta_mean)
        assert np.all(res.samples["lambda"] > 0) and np.all(res.samples["sigma2"] > 0)

    def test_free_lambda_near_marginal_likelihood_choice(self, iris_design):
        res = gibbs_rr(iris_design, iterations=20_000, burn_in=2000, seed=0)
        rr = estimate_rr(iris_design).lambda_hat
        assert 0.2 * rr < res.lambda_mean < 5 * rr

    def test_rank_deficient_variance_includes_null_space(self):
        X = np.random.default_rng(4).normal(size=(5, 8))
        D = StandardizedDesign.from_arrays(X, np.random.default_rng(5).normal(size=5))
        res = gibbs_rr(D, iterations=20_000, burn_in=0, fixed_lambda=2.0, seed=3)
        post = posterior_fit(D, np.full(D.q, 2.0))
        leak = 1 - np.sum(D.W**2, axis=1)
        exact = post.sigma2_mean * (D.W**2 @ (1 / (2.0 + D.d2)) + leak / 2.0)
        np.testing.assert_allclose(res.beta_var, exact, rtol=0.06)

    def test_validation(self, iris_design):
        with pytest.raises(NonPositiveHyperparameter):
            gibbs_rr(iris_design, a=0.0, iterations=10, burn_in=0)
        with pytest.raises(ValueError):
            gibbs_rr(iris_design, iterations=10, burn_in=10)

    def test_log_joint_finite(self, iris_design):
        val = gibbs_log_joint(iris_design, np.zeros(iris_design.p), 1.0, 0.5)
        assert np.isfinite(val)
        better = gibbs_log_joint(iris_design, posterior_fit(
            iris_design, np.full(3, 0.5)).beta_bar, 1.0, 0.5)
        assert better > val

"""Selection, intervals, BIC tuning, oracle OLS, and shape diagnostics."""

import math

import numpy as np
import pytest

from bcs import (
    CovStructure,
    Dataset,
    PosteriorDraws,
    SamplerConfig,
    SigmaPrior,
    StudentT,
    TrueModel,
    bic_score,
    bvm_diagnostics,
    credible_intervals,
    evaluate_metrics,
    generate_dataset,
    inclusion_probabilities,
    mean_bic,
    oracle_ols,
    prior_to_dict,
    select,
    solve_threshold,
    tune_gamma,
)
from bcs.sampler import ChainState, run_chain


def draws_from(beta, sigma2=None, prior=None):
    beta = np.asarray(beta, dtype=float)
    if beta.ndim == 1:
        beta = beta[:, None]
    kept = beta.shape[0]
    sigma2 = np.ones(kept) if sigma2 is None else np.asarray(sigma2, dtype=float)
    meta = {"kept": kept}
    if prior is not None:
        meta["prior"] = prior_to_dict(prior)
    return PosteriorDraws(beta=beta, sigma2=sigma2, meta=meta)


class TestInclusionProbabilities:
    def test_direct_count(self):
        d = draws_from([0.5, 0.2, -0.6, 0.1])
        assert inclusion_probabilities(d, 0.3)[0] == 0.5

    def test_zero_threshold_counts_any_nonzero(self):
        d = draws_from([0.5, -0.1, 0.0001])
        assert inclusion_probabilities(d, 0.0)[0] == 1.0

    def test_null_chain(self):
        d = draws_from(np.zeros((10, 3)))
        assert np.all(inclusion_probabilities(d, 0.0) == 0.0)

    def test_scale_invariance(self):
        rng = np.random.default_rng(0)
        beta = rng.standard_normal((50, 4))
        s2 = rng.uniform(0.5, 2.0, size=50)
        base = inclusion_probabilities(draws_from(beta, s2), 0.7)
        c = 3.7
        scaled = inclusion_probabilities(draws_from(c * beta, c**2 * s2), 0.7)
        np.testing.assert_array_equal(base, scaled)


class TestSelect:
    def test_separated_chain(self):
        prior = StudentT(1.5, 1.5)
        p = 5
        a = solve_threshold(prior, 1.0 / p)
        beta = np.zeros((40, p))
        beta[:, 3] = 2 * a  # always past the threshold
        d = draws_from(beta)
        rep = select(d, prior)
        assert rep.selected.tolist() == [3]
        assert rep.q[3] == 1.0
        assert rep.sparsified_mean[3] == pytest.approx(2 * a)
        assert np.all(rep.sparsified_mean[:3] == 0.0)

    def test_degenerate_cut_selects_nothing(self):
        prior = StudentT(1.5, 1.5)
        beta = np.zeros((40, 4))
        beta[:20, 1] = 100.0  # q = 0.5, never above t = 1
        rep = select(draws_from(beta), prior, t=1.0)
        assert rep.selected.size == 0

    def test_threshold_uses_expected_model_size_one(self):
        prior = StudentT(1.5, 0.01)
        d = draws_from(np.zeros((10, 7)))
        rep = select(d, prior)
        assert rep.a == pytest.approx(solve_threshold(prior, 1.0 / 7.0), rel=1e-12)

    def test_monotone_in_t(self):
        rng = np.random.default_rng(1)
        prior = StudentT(1.5, 1.0)
        d = draws_from(rng.standard_normal((200, 6)) * 2)
        sizes = [select(d, prior, t=t).selected.size for t in (0.2, 0.5, 0.8)]
        assert sizes[0] >= sizes[1] >= sizes[2]

    def test_monotone_in_threshold_u(self):
        rng = np.random.default_rng(2)
        prior = StudentT(1.5, 1.0)
        d = draws_from(rng.standard_normal((200, 6)) * 2)
        q0 = inclusion_probabilities(d, select(d, prior, u=0.0).a)
        q1 = inclusion_probabilities(d, select(d, prior, u=1.0).a)
        assert np.all(q1 <= q0)


class TestCredibleIntervals:
    def test_nearest_rank_order_statistics(self):
        rng = np.random.default_rng(3)
        vals = rng.permutation(np.arange(1.0, 101.0))
        rep = credible_intervals(draws_from(vals), 0.05)
        assert rep.lower[0] == 3.0
        assert rep.upper[0] == 98.0

    def test_constant_chain(self):
        rep = credible_intervals(draws_from(np.full(50, 2.5)), 0.1)
        assert rep.lower[0] == 2.5 and rep.upper[0] == 2.5

    def test_affine_equivariance(self):
        rng = np.random.default_rng(4)
        beta = rng.standard_normal((101, 3))
        rep = credible_intervals(draws_from(beta), 0.07)
        a, b = 2.5, -1.0
        rep2 = credible_intervals(draws_from(a * beta + b), 0.07)
        np.testing.assert_allclose(rep2.lower, a * rep.lower + b, atol=1e-12)
        np.testing.assert_allclose(rep2.upper, a * rep.upper + b, atol=1e-12)

    def test_alpha_validation(self):
        d = draws_from(np.arange(10.0))
        with pytest.raises(ValueError):
            credible_intervals(d, 0.0)
        with pytest.raises(ValueError):
            credible_intervals(d, 1.0)
        with pytest.raises(ValueError):
            credible_intervals(draws_from(np.ones(1)), 0.1)


class TestBicScore:
    def test_empty_model_unit_mean_square(self):
        n = 8
        y = np.zeros(n)
        y[:4] = np.sqrt(2.0)  # ||y||^2 = n
        ds = Dataset(y=y, X=np.ones((n, 1)))
        st = ChainState(beta=np.zeros(1), sigma2=1.0, lambda2=np.ones(1))
        assert bic_score(st, ds, a=10.0) == pytest.approx(0.0, abs=1e-14)

    def test_direct_arithmetic(self):
        # n=4, one kept coefficient, residual norm^2 = 4
        X = np.eye(4)
        beta = np.array([3.0, 0.0, 0.0, 0.0])
        y = np.array([3.0, 1.0, 1.0, np.sqrt(2.0)])
        ds = Dataset(y=y, X=X)
        st = ChainState(beta=beta, sigma2=1.0, lambda2=np.ones(4))
        got = bic_score(st, ds, a=1.0)
        assert got == pytest.approx(4 * math.log(1.0) + math.log(4.0), rel=1e-12)
        assert got == pytest.approx(1.3863, abs=1e-4)

    def test_zero_residual_is_floored(self):
        ds = Dataset(y=np.array([1.0, 2.0]), X=np.eye(2))
        st = ChainState(beta=np.array([1.0, 2.0]), sigma2=1.0, lambda2=np.ones(2))
        got = bic_score(st, ds, a=0.001)
        assert math.isfinite(got)

    def test_mean_bic_matches_per_draw_recomputation(self):
        ds = generate_dataset(
            20, 5, CovStructure.independent(),
            TrueModel(np.array([1.0, 0, 0, 0, 0.5]), 0.5), seed=0,
        )
        draws = run_chain(
            ds, StudentT(1.5, 0.05), SigmaPrior(),
            SamplerConfig(burn_in=50, iterations=300, thin=3, seed=2),
        )
        a = 0.2
        per_draw = [bic_score(draws.state(i), ds, a) for i in range(draws.kept)]
        assert mean_bic(draws, ds, a) == pytest.approx(float(np.mean(per_draw)), abs=1e-10)

    def test_tradeoff_direction(self):
        # adding a strong predictor lowers the score; adding a useless one
        # (costing log n against no fit gain) raises it
        n = 16
        x = np.ones(n)
        y_strong = 5 * x + 0.01 * np.linspace(-1, 1, n)
        ds = Dataset(y=y_strong, X=x[:, None])
        st = ChainState(beta=np.array([5.0]), sigma2=1.0, lambda2=np.ones(1))
        assert bic_score(st, ds, a=1.0) < bic_score(st, ds, a=10.0)
        y_noise = np.linspace(-1, 1, n)
        ds2 = Dataset(y=y_noise, X=x[:, None])
        st2 = ChainState(beta=np.array([1e-3]), sigma2=1.0, lambda2=np.ones(1))
        assert bic_score(st2, ds2, a=1e-4) > bic_score(st2, ds2, a=10.0)


def tiny_dataset(seed=0):
    truth = TrueModel(np.array([1.5, 0.0, 0.0, -1.0, 0.0, 0.0]), 0.5)
    return generate_dataset(40, 6, CovStructure.independent(), truth, seed=seed), truth


TINY_CFG = SamplerConfig(burn_in=100, iterations=600, thin=3, seed=10)


class TestTuneGamma:
    def test_singleton_grid(self):
        ds, _ = tiny_dataset()
        rep = tune_gamma(ds, lambda n, p, g: StudentT(1.5, 0.05), SigmaPrior(), [0.4], TINY_CFG)
        assert rep.gamma_hat == 0.4
        assert rep.best_index == 0
        assert rep.per_gamma_seeds == (10,)

    def test_duplicate_grid_points_resolve_to_that_value(self):
        ds, _ = tiny_dataset()
        rep = tune_gamma(
            ds, lambda n, p, g: StudentT(1.5, 0.05), SigmaPrior(), [0.4, 0.4], TINY_CFG
        )
        assert rep.gamma_hat == 0.4

    def test_decreasing_grid_rejected(self):
        ds, _ = tiny_dataset()
        with pytest.raises(ValueError):
            tune_gamma(ds, lambda n, p, g: StudentT(1.5, 0.05), SigmaPrior(), [0.5, 0.1], TINY_CFG)

    def test_parallel_equals_sequential(self):
        ds, _ = tiny_dataset()

        def family(n, p, g):
            return StudentT(1.5, 0.02 * (1 + g))

        grid = [0.0, 0.5, 1.0]
        seq = tune_gamma(ds, family, SigmaPrior(), grid, TINY_CFG, jobs=1)
        par = tune_gamma(ds, family, SigmaPrior(), grid, TINY_CFG, jobs=2)
        assert seq.to_dict() == par.to_dict()
        assert np.array_equal(seq.best_draws.beta, par.best_draws.beta)

    def test_per_gamma_seeds_offset_by_index(self):
        ds, _ = tiny_dataset()
        rep = tune_gamma(
            ds, lambda n, p, g: StudentT(1.5, 0.05), SigmaPrior(), [0.0, 0.3, 0.6], TINY_CFG
        )
        assert rep.per_gamma_seeds == (10, 11, 12)
        assert rep.best_draws.meta["gamma"] == rep.gamma_hat

    def test_failed_points_are_annotated_and_excluded(self):
        ds, _ = tiny_dataset()

        def family(n, p, g):
            if g > 0.5:
                return StudentT(1.5, -1.0)  # invalid, raises at construction
            return StudentT(1.5, 0.05)

        rep = tune_gamma(ds, family, SigmaPrior(), [0.0, 1.0], TINY_CFG)
        assert rep.errors[0] is None
        assert "ValueError" in rep.errors[1]
        assert math.isnan(rep.mean_bic[1])
        assert rep.gamma_hat == 0.0

    def test_all_points_failing_is_an_error(self):
        ds, _ = tiny_dataset()
        with pytest.raises(RuntimeError):
            tune_gamma(
                ds, lambda n, p, g: StudentT(1.5, -1.0), SigmaPrior(), [0.0, 1.0], TINY_CFG
            )


class TestOracleOls:
    def test_saturated_identity_design(self):
        ds = Dataset(y=np.array([2.0, 4.0]), X=np.eye(2))
        fit = oracle_ols(ds, [0, 1])
        np.testing.assert_allclose(fit.beta_hat, [2.0, 4.0], atol=1e-14)
        assert fit.sigma2_hat == 0.0

    def test_intercept_only(self):
        y = np.array([1.0, 3.0, 5.0, 7.0])
        ds = Dataset(y=y, X=np.ones((4, 1)))
        fit = oracle_ols(ds, [0])
        assert fit.beta_hat[0] == pytest.approx(y.mean(), rel=1e-14)

    def test_dense_solver_oracle(self):
        rng = np.random.default_rng(5)
        X = rng.standard_normal((10, 6))
        y = rng.standard_normal(10)
        sup = [1, 3, 4]
        fit = oracle_ols(Dataset(y=y, X=X), sup)
        Xs = X[:, sup]
        want = np.linalg.solve(Xs.T @ Xs, Xs.T @ y)
        np.testing.assert_allclose(fit.beta_hat, want, atol=1e-10)
        rss = float(np.sum((y - Xs @ want) ** 2))
        assert fit.sigma2_hat == pytest.approx(rss / 7, rel=1e-12)
        np.testing.assert_allclose(
            fit.cov, fit.sigma2_hat * np.linalg.inv(Xs.T @ Xs), atol=1e-10
        )

    def test_rank_deficiency_rejected(self):
        X = np.ones((5, 2))
        ds = Dataset(y=np.arange(5.0), X=X)
        with pytest.raises(ValueError):
            oracle_ols(ds, [0, 1])

    def test_oversized_support_rejected(self):
        ds = Dataset(y=np.arange(3.0), X=np.random.default_rng(0).standard_normal((3, 5)))
        with pytest.raises(ValueError):
            oracle_ols(ds, [0, 1, 2, 3])


class TestBvmDiagnostics:
    def test_orthonormal_design_oracle_sd(self):
        # orthonormal support columns make the oracle sd equal sigma_hat;
        # the residual is built to give sigma_hat exactly 1
        n, s = 6, 2
        Q, _ = np.linalg.qr(np.random.default_rng(6).standard_normal((n, n)))
        Xs = Q[:, :s]
        resid_dir = Q[:, s]
        y = Xs @ np.array([2.0, -1.0]) + resid_dir * math.sqrt(n - s)
        X = np.hstack([Xs, np.zeros((n, 1)) + Q[:, [3]]])
        ds = Dataset(y=y, X=X)
        fit = oracle_ols(ds, [0, 1])
        assert fit.sigma2_hat == pytest.approx(1.0, rel=1e-12)
        np.testing.assert_allclose(np.sqrt(np.diag(fit.cov)), [1.0, 1.0], rtol=1e-10)

    def test_well_specified_instance(self):
        truth = TrueModel(np.array([2.0, -1.5, 0.0, 0.0, 0.0, 0.0]), 0.5)
        ds = generate_dataset(60, 6, CovStructure.independent(), truth, seed=8)
        draws = run_chain(
            ds, StudentT(1.5, 0.05), SigmaPrior(),
            SamplerConfig(burn_in=500, iterations=4000, thin=4, seed=3),
        )
        rep = bvm_diagnostics(draws, ds, truth)
        assert {c.index for c in rep.on_support} == {0, 1}
        for c in rep.on_support:
            assert 0.5 < c.sd_ratio < 1.5
            assert c.ks_distance < 0.12
            assert not c.degenerate
        assert rep.off_support_indices.tolist() == [2, 3, 4, 5]
        assert rep.prior_marginal_sd == pytest.approx(
            math.sqrt(0.05 / 1.5) * math.sqrt(3), rel=1e-12
        )

    def test_degenerate_noise_free_is_flagged(self):
        truth = TrueModel(np.array([1.0, 0.0, 0.0]), 0.0)
        ds = generate_dataset(50, 3, CovStructure.independent(), truth, seed=9)
        draws = run_chain(
            ds, StudentT(1.5, 0.05), SigmaPrior(a0=1.0, b0=1e-12),
            SamplerConfig(burn_in=500, iterations=2000, thin=2, seed=4),
        )
        rep = bvm_diagnostics(draws, ds, truth)
        c = rep.on_support[0]
        assert abs(c.posterior_mean - 1.0) < 1e-3
        assert c.degenerate

    def test_requires_enough_draws_and_support(self):
        truth = TrueModel(np.array([1.0, 0.0]), 1.0)
        ds = generate_dataset(20, 2, CovStructure.independent(), truth, seed=1)
        short = run_chain(
            ds, StudentT(1.5, 0.05), SigmaPrior(),
            SamplerConfig(burn_in=10, iterations=50, thin=1, seed=0),
        )
        with pytest.raises(ValueError):
            bvm_diagnostics(short, ds, truth)
        empty = TrueModel(np.zeros(2), 1.0)
        long = run_chain(
            ds, StudentT(1.5, 0.05), SigmaPrior(),
            SamplerConfig(burn_in=10, iterations=200, thin=1, seed=0),
        )
        with pytest.raises(ValueError):
            bvm_diagnostics(long, ds, empty)


class TestEvaluateMetrics:
    def test_degenerate_perfect_chain(self):
        truth = TrueModel(np.array([1.0, 0.0, -2.0]), 1.0)
        beta = np.tile(truth.beta_star, (50, 1))
        d = draws_from(beta, prior=StudentT(1.5, 1.0))
        prior = StudentT(1.5, 1.0)
        rep = select(d, prior)
        ivl = credible_intervals(d, 0.05)
        m = evaluate_metrics(rep, ivl, d, truth)
        assert m.l1_true == 0.0
        assert m.coverage_true == 1.0
        assert m.coverage_false == 1.0
        assert m.length_true == 0.0

    def test_containment(self):
        truth = TrueModel(np.array([1.0]), 1.0)
        beta = np.linspace(0.9, 1.1, 101)[:, None]
        d = draws_from(beta)
        prior = StudentT(1.5, 1.0)
        rep = select(d, prior)
        ivl = credible_intervals(d, 0.05)
        m = evaluate_metrics(rep, ivl, d, truth)
        assert m.coverage_true == 1.0
        assert m.l1_true == pytest.approx(0.0, abs=1e-12)

    def test_group_splits(self):
        truth = TrueModel(np.array([2.0, 0.0]), 1.0)
        beta = np.column_stack([np.full(40, 1.5), np.full(40, 0.25)])
        d = draws_from(beta)
        rep = select(d, StudentT(1.5, 1.0))
        ivl = credible_intervals(d, 0.05)
        m = evaluate_metrics(rep, ivl, d, truth)
        assert m.l1_true == pytest.approx(0.5)
        assert m.l1_false == pytest.approx(0.25)
        assert m.coverage_true == 0.0  # constant chain at 1.5 misses 2.0
        assert m.coverage_false == 0.0  # constant chain at 0.25 misses 0

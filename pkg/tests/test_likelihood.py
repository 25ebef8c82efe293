import numpy as np
import pytest
from scipy.special import gammaln

from hss.eof import ScoreSet
from hss.likelihood import (CoefficientField, HurdleParams, linear_predictors, phm_logpmf,
                            phm_mean, phm_simulate, poisson_loglik, sample_truncated_poisson)


def _beta_xi(J=2, K=1, L=1, R=1, N=2, M=2, T=3, seed=0, scale=0.3):
    rng = np.random.default_rng(seed)
    beta = CoefficientField(rng.normal(scale=scale, size=(J, K, L, R, N, M)))
    xi = ScoreSet(rng.normal(size=(L, R, T, M)), ["v"] * L, np.arange(T))
    return beta, xi


class TestLinearPredictors:
    def test_zero_beta(self):
        beta, xi = _beta_xi()
        beta.beta[:] = 0.0
        params = linear_predictors(beta, xi)
        assert np.allclose(params.p, 0.5)
        assert np.allclose(params.lam, 1.0)

    def test_single_unit_coefficient(self):
        beta = CoefficientField(np.zeros((2, 1, 1, 1, 1, 1)))
        beta.beta[:, 0, 0, 0, 0, 0] = 1.0
        xi = ScoreSet(np.ones((1, 1, 1, 1)), ["v"], np.arange(1))
        params = linear_predictors(beta, xi)
        assert params.p[0, 0, 0] == pytest.approx(0.7310585786300049, abs=1e-9)
        assert params.lam[0, 0, 0] == pytest.approx(2.718281828459045, abs=1e-9)

    def test_negation_symmetry(self):
        beta, xi = _beta_xi(seed=1)
        p1 = linear_predictors(beta, xi)
        p2 = linear_predictors(CoefficientField(-beta.beta), xi)
        assert np.allclose(p2.p, 1.0 - p1.p, atol=1e-12)
        assert np.allclose(p2.lam, 1.0 / p1.lam, rtol=1e-12)

    def test_linearity_before_link(self):
        b1, xi = _beta_xi(seed=2)
        b2, _ = _beta_xi(seed=3)
        eta = lambda b: np.einsum("jklrsw,lrtw->jkst", b.beta, xi.xi)
        combined = eta(CoefficientField(b1.beta + b2.beta))
        assert np.allclose(combined, eta(b1) + eta(b2), atol=1e-12)

    def test_clamp_counted(self):
        beta = CoefficientField(np.full((2, 1, 1, 1, 1, 1), 100.0))
        xi = ScoreSet(np.ones((1, 1, 1, 1)), ["v"], np.arange(1))
        params = linear_predictors(beta, xi)
        assert params.n_clamped == 2
        assert params.p[0, 0, 0] < 1.0
        assert np.isfinite(params.lam).all()


class TestLogPmf:
    def test_zero_branch(self):
        assert phm_logpmf(0, 0.3, 1.0) == pytest.approx(np.log(0.7), abs=1e-12)

    def test_one(self):
        assert phm_logpmf(1, 0.5, 1.0) == pytest.approx(np.log(0.2909883534346632), abs=1e-9)

    def test_two(self):
        assert phm_logpmf(2, 0.5, 1.0) == pytest.approx(np.log(0.14549417671733158), abs=1e-9)

    def test_normalizes(self):
        m = np.arange(0, 201)
        for p in (0.1, 0.5, 0.9):
            for lam in (0.1, 1.0, 5.0):
                total = np.exp(phm_logpmf(m, p, lam)).sum()
                assert total == pytest.approx(1.0, abs=1e-10)

    def test_large_lambda_stable(self):
        val = phm_logpmf(40, 0.5, 50.0)
        assert np.isfinite(val)

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            phm_logpmf(1, 1.5, 1.0)
        with pytest.raises(ValueError):
            phm_logpmf(1, 0.5, -1.0)
        with pytest.raises(ValueError):
            phm_logpmf(-1, 0.5, 1.0)


class TestMean:
    def test_p_zero_limit(self):
        assert phm_mean(0.0, 1.0) == 0.0

    def test_unit(self):
        assert phm_mean(1.0, 1.0) == pytest.approx(1.5819767068693265, abs=1e-9)

    def test_half(self):
        assert phm_mean(0.5, 2.0) == pytest.approx(1.1565176427496657, abs=1e-9)

    def test_matches_series(self):
        m = np.arange(0, 201)
        for p in (0.1, 0.5, 0.9):
            for lam in (0.1, 1.0, 5.0):
                series = np.sum(m * np.exp(phm_logpmf(m, p, lam)))
                assert phm_mean(p, lam) == pytest.approx(series, abs=1e-8)


class TestPoissonLoglik:
    def test_zero_count(self):
        beta = CoefficientField(np.zeros((1, 1, 1, 1, 1, 1)))
        xi = ScoreSet(np.ones((1, 1, 1, 1)), ["v"], np.arange(1))
        assert poisson_loglik(np.zeros((1, 1), dtype=int), beta, xi) == pytest.approx(-1.0)

    def test_one_count(self):
        beta = CoefficientField(np.zeros((1, 1, 1, 1, 1, 1)))
        xi = ScoreSet(np.ones((1, 1, 1, 1)), ["v"], np.arange(1))
        assert poisson_loglik(np.ones((1, 1), dtype=int), beta, xi) == pytest.approx(-1.0)

    def test_two_at_log_two(self):
        beta = CoefficientField(np.full((1, 1, 1, 1, 1, 1), np.log(2.0)))
        xi = ScoreSet(np.ones((1, 1, 1, 1)), ["v"], np.arange(1))
        y = np.full((1, 1), 2, dtype=int)
        assert poisson_loglik(y, beta, xi) == pytest.approx(-1.3068528194400544, abs=1e-10)

    def test_matches_cell_oracle(self):
        rng = np.random.default_rng(4)
        beta = CoefficientField(rng.normal(scale=0.2, size=(1, 1, 2, 3, 5, 4)))
        xi = ScoreSet(rng.normal(size=(2, 3, 5, 4)), ["a", "b"], np.arange(5))
        y = rng.poisson(1.0, size=(5, 5))
        eta = np.zeros((5, 5))
        for s in range(5):
            for t in range(5):
                for l in range(2):
                    for r in range(3):
                        for w in range(4):
                            eta[s, t] += beta.beta[0, 0, l, r, s, w] * xi.xi[l, r, t, w]
        oracle = sum(y[s, t] * eta[s, t] - np.exp(eta[s, t]) - gammaln(y[s, t] + 1.0)
                     for s in range(5) for t in range(5))
        assert poisson_loglik(y, beta, xi) == pytest.approx(oracle, abs=1e-10)

    def test_negative_counts(self):
        beta, xi = _beta_xi(J=1)
        with pytest.raises(ValueError):
            poisson_loglik(np.array([[-1]]), beta, xi)


class TestSimulate:
    def test_p_small_all_zero(self):
        params = HurdleParams(np.full((1, 3, 4), 1e-12), np.ones((1, 3, 4)))
        c = phm_simulate(params, 0)
        assert c.values.sum() == 0

    def test_tiny_lambda_gives_ones(self):
        params = HurdleParams(np.full((1, 100, 100), 1 - 1e-12), np.full((1, 100, 100), 1e-3))
        c = phm_simulate(params, 1)
        assert (c.values == 1).mean() > 0.999

    def test_zero_fraction(self):
        p = 0.37
        params = HurdleParams(np.full((1, 1, 100000), p), np.full((1, 1, 100000), 2.0))
        c = phm_simulate(params, 2)
        assert (c.values == 0).mean() == pytest.approx(1 - p, abs=0.01)

    def test_truncated_sampler_matches_pmf(self):
        rng = np.random.default_rng(3)
        lam = 1.5
        draws = sample_truncated_poisson(np.full(200000, lam), rng)
        assert draws.min() >= 1
        m = np.arange(1, 30)
        pmf = np.exp(m * np.log(lam) - lam - gammaln(m + 1)) / (1 - np.exp(-lam))
        hist = np.bincount(draws, minlength=30)[1:30] / draws.size
        assert np.max(np.abs(hist - pmf)) < 0.005

    def test_truncated_sampler_large_lambda(self):
        rng = np.random.default_rng(4)
        draws = sample_truncated_poisson(np.full(2000, 50.0), rng)
        assert draws.min() >= 1
        assert abs(draws.mean() - 50.0) < 1.0

    def test_seed_reproducible(self):
        params = HurdleParams(np.full((2, 5, 5), 0.6), np.full((2, 5, 5), 2.0))
        a = phm_simulate(params, 42)
        b = phm_simulate(params, 42)
        assert np.array_equal(a.values, b.values)


class TestHurdleParamsValidation:
    def test_bounds(self):
        with pytest.raises(ValueError):
            HurdleParams(np.array([0.0]), np.array([1.0]))
        with pytest.raises(ValueError):
            HurdleParams(np.array([0.5]), np.array([0.0]))

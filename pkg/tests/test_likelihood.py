"""AIS and CSL estimators against exact enumeration; KL divergence."""

import numpy as np
import pytest
from scipy.special import expit

import oracles
from flowtrain import likelihood, model
from flowtrain.exceptions import CapacityError, ConfigurationError
from flowtrain.likelihood import (AisConfig, CslConfig, LikelihoodEstimate,
                                  ais_avg_log_likelihood, ais_log_partition,
                                  base_biases_from_data, csl_log_likelihood,
                                  kl_visible)
from flowtrain.model import RbmParams


def zero_params(d, h):
    return RbmParams(np.zeros((d, h)), np.zeros(d), np.zeros(h))


class TestAis:
    def test_target_equal_to_base_is_exact(self):
        rng = np.random.default_rng(300)
        base_bias = rng.normal(0, 1, 5)
        params = RbmParams(np.zeros((5, 3)), base_bias.copy(), np.zeros(3))
        cfg = AisConfig(n_temperatures=50, n_chains=20, seed=1,
                        base_visible_bias=base_bias)
        estimate = ais_log_partition(params, cfg)
        expected = 3 * np.log(2) + model.softplus(base_bias).sum()
        assert estimate.value == expected
        assert estimate.std_error == 0.0
        assert estimate.value == pytest.approx(model.exact_log_partition(params),
                                               rel=1e-12)

    def test_uniform_target_recovers_closed_form(self):
        params = zero_params(6, 4)
        for temps in (2, 17, 301):
            cfg = AisConfig(n_temperatures=temps, n_chains=5, seed=2)
            estimate = ais_log_partition(params, cfg)
            assert abs(estimate.value - 10 * np.log(2)) < 1e-10

    def test_close_to_exact_on_tiny_model(self):
        rng = np.random.default_rng(301)
        params = oracles.random_params(rng, 6, 4)
        cfg = AisConfig(n_temperatures=1000, n_chains=100, seed=3)
        estimate = ais_log_partition(params, cfg)
        exact = model.exact_log_partition(params)
        assert abs(estimate.value - exact) < 0.05
        assert estimate.std_error > 0.0

    def test_data_matched_base_biases(self):
        rows = np.array([[1, 1, 0], [1, 0, 0], [1, 1, 0], [1, 0, 0]], dtype=np.uint8)
        bias = base_biases_from_data(rows)
        assert bias[0] == pytest.approx(4.0)            # constant pixel, clipped
        assert bias[1] == pytest.approx(0.0, abs=1e-12)  # half on
        assert bias[2] == pytest.approx(-4.0)           # constant off, clipped

    def test_avg_log_likelihood_near_exact(self):
        rng = np.random.default_rng(302)
        params = oracles.random_params(rng, 6, 3)
        rows = rng.integers(0, 2, (40, 6)).astype(np.uint8)
        cfg = AisConfig(n_temperatures=800, n_chains=80, seed=4,
                        base_visible_bias=base_biases_from_data(rows))
        estimate = ais_avg_log_likelihood(params, rows, cfg)
        exact = model.exact_avg_log_likelihood(params, rows)
        assert abs(estimate.value - exact) < 0.1

    def test_ladder_refinement_does_not_worsen_bias(self):
        rng = np.random.default_rng(303)
        params = oracles.random_params(rng, 5, 3)
        exact = model.exact_log_partition(params)

        def bias_and_se(temps):
            values = [ais_log_partition(
                params, AisConfig(n_temperatures=temps, n_chains=40, seed=s)).value
                for s in range(8)]
            values = np.asarray(values)
            return abs(values.mean() - exact), values.std(ddof=1) / np.sqrt(8)

        bias_coarse, se_coarse = bias_and_se(60)
        bias_fine, se_fine = bias_and_se(120)
        assert bias_fine <= bias_coarse + 3 * np.hypot(se_coarse, se_fine)

    def test_config_validation(self):
        with pytest.raises(ConfigurationError):
            AisConfig(n_temperatures=1)
        with pytest.raises(ConfigurationError):
            AisConfig(n_chains=0)
        params = zero_params(3, 2)
        with pytest.raises(ConfigurationError):
            ais_log_partition(params, AisConfig(base_visible_bias=np.zeros(7)))


class TestCsl:
    def test_uniform_model_scores_exactly(self):
        params = zero_params(5, 3)
        rows = np.array([[0, 1, 0, 1, 1], [1, 1, 1, 1, 1]], dtype=np.uint8)
        cfg = CslConfig(n_hidden_samples=7, burn_in=3, thinning=2, seed=5)
        estimate = csl_log_likelihood(params, rows, cfg)
        assert estimate.value == pytest.approx(-5 * np.log(2), abs=1e-12)
        assert estimate.std_error == pytest.approx(0.0, abs=1e-12)

    def test_single_sample_reduces_to_one_conditional(self):
        rng = np.random.default_rng(304)
        params = oracles.random_params(rng, 4, 3)
        rows = rng.integers(0, 2, (3, 4)).astype(np.uint8)
        cfg = CslConfig(n_hidden_samples=1, burn_in=10, thinning=3, seed=6)
        estimate = csl_log_likelihood(params, rows, cfg)
        # Replay the chain to recover the single hidden sample.
        replay = np.random.default_rng(6)
        v = (replay.random(4) < 0.5).astype(np.uint8)
        h = None
        for _ in range(10 + 3):
            v, h = model.gibbs_step(params, v, replay)
        pv = model.visible_conditional(params, h)
        scores = (rows * np.log(pv) + (1 - rows) * np.log1p(-pv)).sum(axis=1)
        assert estimate.value == pytest.approx(scores.mean(), rel=1e-12)

    def test_conservative_against_exact(self):
        rng = np.random.default_rng(305)
        params = oracles.random_params(rng, 6, 4)
        rows = rng.integers(0, 2, (30, 6)).astype(np.uint8)
        exact = model.exact_avg_log_likelihood(params, rows)
        values, ses = [], []
        for seed in range(20):
            est = csl_log_likelihood(params, rows, CslConfig(
                n_hidden_samples=300, burn_in=300, thinning=2, seed=seed))
            values.append(est.value)
            ses.append(est.std_error)
        mean = np.mean(values)
        pooled_se = np.mean(ses) / np.sqrt(len(values))
        assert mean <= exact + 3 * pooled_se

    def test_thinning_invariance(self):
        rng = np.random.default_rng(306)
        params = oracles.random_params(rng, 5, 3)
        rows = rng.integers(0, 2, (20, 5)).astype(np.uint8)

        def estimates(thinning, seeds):
            return np.array([csl_log_likelihood(params, rows, CslConfig(
                n_hidden_samples=300, burn_in=200, thinning=thinning,
                seed=s)).value for s in seeds])

        a = estimates(2, range(5))
        b = estimates(6, range(5, 10))
        spread = np.hypot(a.std(ddof=1) / np.sqrt(5), b.std(ddof=1) / np.sqrt(5))
        assert abs(a.mean() - b.mean()) <= 3 * spread + 1e-3

    def test_config_validation(self):
        with pytest.raises(ConfigurationError):
            CslConfig(n_hidden_samples=0)
        with pytest.raises(ConfigurationError):
            CslConfig(burn_in=-1)
        with pytest.raises(ConfigurationError):
            CslConfig(thinning=0)


class TestBracketing:
    def test_csl_below_exact_below_ais(self):
        rng = np.random.default_rng(307)
        params = oracles.random_params(rng, 6, 4)
        rows = rng.integers(0, 2, (25, 6)).astype(np.uint8)
        exact = model.exact_avg_log_likelihood(params, rows)
        base = base_biases_from_data(rows)

        csl_vals, csl_ses, ais_vals, ais_ses = [], [], [], []
        for seed in range(8):
            c = csl_log_likelihood(params, rows, CslConfig(
                n_hidden_samples=250, burn_in=250, thinning=2, seed=seed))
            a = ais_avg_log_likelihood(params, rows, AisConfig(
                n_temperatures=300, n_chains=40, seed=seed, base_visible_bias=base))
            csl_vals.append(c.value)
            csl_ses.append(c.std_error)
            ais_vals.append(a.value)
            ais_ses.append(a.std_error)

        csl_se = np.mean(csl_ses) / np.sqrt(8)
        ais_se = np.mean(ais_ses) / np.sqrt(8)
        assert np.mean(csl_vals) <= exact + 3 * csl_se
        assert exact <= np.mean(ais_vals) + 3 * ais_se


class TestKl:
    def test_identical_models_zero(self):
        rng = np.random.default_rng(308)
        params = oracles.random_params(rng, 5, 3)
        assert abs(kl_visible(params, params.copy())) < 1e-12

    def test_nonnegative_on_random_pairs(self):
        rng = np.random.default_rng(309)
        for _ in range(100):
            p = oracles.random_params(rng, 4, 2)
            q = oracles.random_params(rng, 4, 2)
            assert kl_visible(p, q) >= 0.0

    def test_two_state_dominant_hand_arithmetic(self):
        # Both models put essentially all mass on v1 = 1; only v2 differs.
        p = RbmParams(np.zeros((2, 1)), np.array([20.0, 0.0]), np.zeros(1))
        q = RbmParams(np.zeros((2, 1)), np.array([20.0, 3.0]), np.zeros(1))
        s = expit(3.0)
        expected = 0.5 * np.log(0.5 / (1 - s)) + 0.5 * np.log(0.5 / s)
        assert kl_visible(p, q) == pytest.approx(expected, abs=1e-7)

    def test_dimension_and_capacity_errors(self):
        with pytest.raises(ValueError):
            kl_visible(zero_params(3, 2), zero_params(4, 2))
        with pytest.raises(CapacityError):
            kl_visible(zero_params(13, 2), zero_params(13, 2))


class TestLikelihoodEstimate:
    def test_exact_estimates_have_zero_error(self):
        with pytest.raises(ValueError):
            LikelihoodEstimate(1.0, 0.5, "exact")
        with pytest.raises(ValueError):
            LikelihoodEstimate(1.0, -0.1, "AIS")

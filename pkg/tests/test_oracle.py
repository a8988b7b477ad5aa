"""Explicit-chain ground truth: balance, stationarity, evolution, Taylor check."""

import numpy as np
import pytest

import oracles
from flowtrain import model, oracle
from flowtrain.exceptions import CapacityError, ConfigurationError
from flowtrain.flow import (Factorized, FullEnumeration, ODD_FUNCTIONS,
                            OneBitFlip, TransitionSpec)
from flowtrain.model import RbmParams
from flowtrain.oracle import (ExplicitChain, build_chain, check_detailed_balance,
                              empirical_distribution, evolve, is_irreducible,
                              stationarity_residual, taylor_check)


def zero_params(d, h):
    return RbmParams(np.zeros((d, h)), np.zeros(d), np.zeros(h))


ONE_BIT = TransitionSpec(OneBitFlip())


class TestBuildChain:
    def test_uniform_two_cube(self):
        chain = build_chain(zero_params(2, 2), ONE_BIT)
        expected = np.array([
            [-2.0, 1.0, 1.0, 0.0],
            [1.0, -2.0, 0.0, 1.0],
            [1.0, 0.0, -2.0, 1.0],
            [0.0, 1.0, 1.0, -2.0],
        ])
        np.testing.assert_allclose(chain.rates, expected, atol=1e-15)

    def test_column_sums_vanish(self):
        rng = np.random.default_rng(70)
        for trial in range(50):
            d = int(rng.integers(2, 7))
            params = oracles.random_params(rng, d, int(rng.integers(1, 5)))
            chain = build_chain(params, ONE_BIT)
            col = np.abs(chain.rates.sum(axis=0))
            scale = np.maximum(1.0, np.abs(chain.rates).max(axis=0))
            assert np.all(col <= 1e-12 * scale), f"trial {trial}"

    def test_matches_naive_pairwise_evaluation(self):
        rng = np.random.default_rng(71)
        params = oracles.random_params(rng, 3, 2)
        for tag, odd in ODD_FUNCTIONS.items():
            chain = build_chain(params, TransitionSpec(OneBitFlip(), odd))
            naive = oracles.naive_rate_matrix(params, odd, one_bit_only=True)
            off = chain.rates.copy()
            np.fill_diagonal(off, 0.0)
            assert oracles.rel_err(off, naive) < 1e-12, tag

    def test_full_connectivity_matches_naive(self):
        rng = np.random.default_rng(72)
        params = oracles.random_params(rng, 3, 2, sigma=0.7)
        odd = ODD_FUNCTIONS["tanh"]
        chain = build_chain(params, TransitionSpec(FullEnumeration(), odd))
        naive = oracles.naive_rate_matrix(params, odd, one_bit_only=False)
        off = chain.rates.copy()
        np.fill_diagonal(off, 0.0)
        assert oracles.rel_err(off, naive) < 1e-12

    def test_capacity_and_connectivity_errors(self):
        with pytest.raises(CapacityError):
            build_chain(zero_params(13, 2), ONE_BIT)
        with pytest.raises(ConfigurationError):
            build_chain(zero_params(3, 2), TransitionSpec(Factorized(4)))


class TestDetailedBalance:
    def test_holds_for_every_odd_function(self):
        rng = np.random.default_rng(73)
        for trial in range(60):
            d = int(rng.integers(2, 7))
            h = int(rng.integers(1, 5))
            params = oracles.random_params(rng, d, h)
            odd = list(ODD_FUNCTIONS.values())[trial % 3]
            conn = OneBitFlip() if trial % 2 else FullEnumeration()
            chain = build_chain(params, TransitionSpec(conn, odd))
            assert check_detailed_balance(chain, params) < 1e-10, f"trial {trial}"

    def test_detects_corruption(self):
        rng = np.random.default_rng(74)
        params = oracles.random_params(rng, 4, 3)
        chain = build_chain(params, ONE_BIT)
        i, j = 1, 0   # neighbors in the hypercube
        chain.rates[i, j] *= 1.01
        assert check_detailed_balance(chain, params) > 1e-3

    def test_uniform_model_is_exact(self):
        chain = build_chain(zero_params(4, 3), ONE_BIT)
        assert check_detailed_balance(chain, zero_params(4, 3)) < 1e-15


class TestStationarity:
    def test_residual_small_for_random_models(self):
        rng = np.random.default_rng(75)
        for trial in range(20):
            params = oracles.random_params(rng, int(rng.integers(2, 7)), 3)
            chain = build_chain(params, ONE_BIT)
            assert stationarity_residual(chain, params) < 1e-10, f"trial {trial}"

    def test_uniform_model_residual_tiny(self):
        params = zero_params(5, 2)
        chain = build_chain(params, ONE_BIT)
        assert stationarity_residual(chain, params) < 1e-14

    def test_detects_perturbed_distribution(self):
        rng = np.random.default_rng(76)
        params = oracles.random_params(rng, 4, 3)
        chain = build_chain(params, ONE_BIT)
        p = oracle.stationary_distribution(params)
        moved = p.copy()
        src, dst = np.argmax(p), np.argmin(p)
        moved[src] -= 0.01
        moved[dst] += 0.01
        assert np.abs(chain.rates @ moved).max() > 1e-4


class TestEvolve:
    def test_zero_time_is_identity(self):
        chain = build_chain(zero_params(3, 2), ONE_BIT)
        p0 = np.zeros(8)
        p0[2] = 1.0
        np.testing.assert_array_equal(evolve(chain, p0, 0.0), p0)

    def test_long_time_reaches_stationarity(self):
        rng = np.random.default_rng(77)
        params = oracles.random_params(rng, 5, 3, sigma=0.5)
        chain = build_chain(params, ONE_BIT)
        p0 = np.zeros(32)
        p0[0] = 1.0
        t = 1e3 / np.abs(chain.rates).max()
        p_t = evolve(chain, p0, t)
        p_inf = oracle.stationary_distribution(params)
        assert 0.5 * np.abs(p_t - p_inf).sum() < 1e-6

    def test_probability_conserved(self):
        rng = np.random.default_rng(78)
        params = oracles.random_params(rng, 4, 2)
        chain = build_chain(params, ONE_BIT)
        p0 = rng.random(16)
        p0 /= p0.sum()
        for t in (1e-3, 0.1, 1.0, 10.0):
            p_t = evolve(chain, p0, t)
            assert abs(p_t.sum() - 1.0) < 1e-9
            assert np.all(p_t >= 0.0)

    def test_input_validation(self):
        chain = build_chain(zero_params(2, 1), ONE_BIT)
        with pytest.raises(ValueError):
            evolve(chain, np.array([0.5, 0.5, 0.5, 0.5]), 1.0)
        with pytest.raises(ValueError):
            evolve(chain, np.array([0.25, 0.25, 0.25, 0.25]), -1.0)


class TestTaylorCheck:
    def test_zero_epsilon_row(self):
        chain = build_chain(zero_params(3, 2), ONE_BIT)
        rows = np.array([[0, 0, 0]], dtype=np.uint8)
        table = taylor_check(chain, rows, [0.0])
        assert table[0] == (0.0, 0.0, 0.0)

    def test_ratio_converges_to_flow_objective(self):
        rng = np.random.default_rng(79)
        for trial in range(5):
            d = int(rng.integers(3, 6))
            params = oracles.random_params(rng, d, 3, sigma=0.8)
            chain = build_chain(params, ONE_BIT)
            idx = rng.choice(1 << d, size=3, replace=False)
            rows = model.enumerate_states(d)[idx]
            table = taylor_check(chain, rows, [1e-2, 1e-3, 1e-4])
            j = table[0].linear_prediction / table[0].epsilon
            ratios = [abs(row.kl_divergence / row.epsilon - j) / j for row in table]
            assert ratios[0] > ratios[1] > ratios[2], f"trial {trial}: {ratios}"

    def test_disconnected_data_has_no_outflow(self):
        # Rates live only among non-data states; data mass cannot move.
        d = 3
        n = 1 << d
        rates = np.zeros((n, n))
        for a, b in [(2, 3), (3, 7), (7, 2), (4, 5)]:
            rates[a, b] = rates[b, a] = 1.0
        np.fill_diagonal(rates, -rates.sum(axis=0))
        chain = ExplicitChain(rates, d, ONE_BIT)
        rows = model.enumerate_states(d)[[0, 1]]
        table = taylor_check(chain, rows, [1e-2, 1e-1, 1.0])
        for row in table:
            assert abs(row.kl_divergence) < 1e-12
            assert row.linear_prediction == 0.0

    def test_requires_strict_subset(self):
        chain = build_chain(zero_params(2, 1), ONE_BIT)
        with pytest.raises(ValueError):
            taylor_check(chain, model.enumerate_states(2), [1e-3])


class TestReachability:
    def test_one_bit_chains_are_irreducible(self):
        rng = np.random.default_rng(80)
        for _ in range(20):
            params = oracles.random_params(rng, int(rng.integers(2, 7)), 2)
            assert is_irreducible(build_chain(params, ONE_BIT))

    def test_detects_disconnected_chain(self):
        n = 4
        rates = np.zeros((n, n))
        rates[0, 1] = rates[1, 0] = 1.0
        np.fill_diagonal(rates, -rates.sum(axis=0))
        chain = ExplicitChain(rates, 2, ONE_BIT)
        assert not is_irreducible(chain)


class TestEmpiricalDistribution:
    def test_counts_and_order(self):
        rows = np.array([[1, 0, 0], [1, 0, 0], [0, 1, 0]], dtype=np.uint8)
        p0 = empirical_distribution(rows, 3)
        assert p0[1] == pytest.approx(2 / 3)   # bit 0 set -> index 1
        assert p0[2] == pytest.approx(1 / 3)   # bit 1 set -> index 2
        assert p0.sum() == pytest.approx(1.0)

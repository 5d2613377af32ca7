"""Tests for portfolio instances and their Ising encodings."""

import itertools
import json

import numpy as np
import pytest

from ising import bits_to_index
from oracle import auto_penalty, feasible_mask
from portfolio import (
    ANNUALIZATION_FACTOR,
    PENALTY_FLOOR,
    PortfolioProblem,
    SpinLayout,
    annualize,
    build_hard,
    build_soft,
    compute_penalty_coefficient,
    decode,
    decode_index,
    encode_penalty,
    encode_trading_cost,
    markowitz_cost,
    metrics,
    net_investment,
    positions_table,
    short_count,
)


def direct_soft_cost(bits, problem):
    """Markowitz cost + trading-cost lookup + A (sum z - D)^2, straight from positions."""
    x = np.asarray(bits)
    z = decode(x)
    x_short, x_long = x[0::2], x[1::2]
    traded = (z != problem.previous) | ((x_short == 1) & (x_long == 1))
    return (markowitz_cost(z, problem)
            + problem.trading_cost * np.count_nonzero(traded)
            + problem.penalty * (z.sum() - problem.net_lots) ** 2)


class TestLayout:
    """Spin indices and decoding."""

    def test_registers(self):
        layout = SpinLayout(3)
        assert layout.n_spins == 6
        assert layout.short_register() == [0, 2, 4]
        assert layout.long_register() == [1, 3, 5]

    def test_decode(self):
        # (x^-, x^+) per asset: long, short, netted zero, flat
        assert decode([0, 1, 1, 0, 1, 1, 0, 0]).tolist() == [1, -1, 0, 0]

    def test_decode_rejects_odd_length(self):
        with pytest.raises(ValueError):
            decode([1, 0, 1])

    def test_vectorised_helpers_agree(self):
        indices = np.arange(1 << 6)
        table = positions_table(indices, 3)
        for index in indices:
            assert table[index].tolist() == decode_index(int(index), 3).tolist()
        assert np.array_equal(net_investment(indices, 3), table.sum(axis=1))
        assert short_count(np.array([0b010101]), 3)[0] == 3


class TestProblemValidation:
    """PortfolioProblem rejects malformed instances."""

    def test_asymmetric_sigma(self):
        with pytest.raises(ValueError, match="symmetric"):
            PortfolioProblem(mu=[0.1, 0.2], sigma=[[1.0, 0.5], [0.4, 1.0]], net_lots=1, lam=0.5)

    def test_lambda_range(self):
        with pytest.raises(ValueError, match="lam"):
            PortfolioProblem(mu=[0.1], sigma=[[1.0]], net_lots=1, lam=1.5)

    def test_previous_values(self):
        with pytest.raises(ValueError, match="previous"):
            PortfolioProblem(mu=[0.1, 0.2], sigma=np.eye(2), net_lots=1, lam=0.5, previous=[2, 0])

    def test_net_lots_bound(self):
        with pytest.raises(ValueError, match="net_lots"):
            PortfolioProblem(mu=[0.1, 0.2], sigma=np.eye(2), net_lots=3, lam=0.5)

    def test_soft_needs_penalty(self, random_problem):
        with pytest.raises(ValueError, match="penalty"):
            build_soft(random_problem(penalty=None))

    def test_previous_defaults_to_flat(self):
        problem = PortfolioProblem(mu=[0.1, 0.2], sigma=np.eye(2), net_lots=0, lam=0.5)
        assert problem.previous.tolist() == [0, 0]

    def test_json_document(self, random_problem):
        problem = random_problem(n_assets=3, trading_cost=0.01, penalty=2.5, previous=[1, 0, -1])
        payload = json.loads(problem.to_json())
        assert set(payload) == {"N", "D", "lambda", "T", "A", "mu", "sigma", "y"}
        restored = PortfolioProblem.from_json(problem.to_json())
        assert restored.to_dict() == problem.to_dict()

    def test_json_size_mismatch(self, random_problem):
        payload = random_problem(n_assets=2).to_dict()
        payload["N"] = 3
        with pytest.raises(ValueError):
            PortfolioProblem.from_dict(payload)


class TestTradingCostTable:
    """One quadratic expression covers every (previous, encoded state) entry."""

    @pytest.mark.parametrize("y", [-1, 0, 1])
    @pytest.mark.parametrize("x_short, x_long", [(0, 0), (0, 1), (1, 0), (1, 1)])
    def test_entry(self, y, x_short, x_long):
        T = 0.015
        problem = PortfolioProblem(mu=[0.0], sigma=[[0.0]], net_lots=0, lam=0.5,
                                   trading_cost=T, previous=[y])
        model = encode_trading_cost(problem)
        z = x_long - x_short
        expected = T if (z != y or (x_short, x_long) == (1, 1)) else 0.0
        assert model.energies[bits_to_index([x_short, x_long])] == pytest.approx(expected, abs=1e-15)

    def test_zero_cost_is_empty_model(self):
        problem = PortfolioProblem(mu=[0.0, 0.0], sigma=np.zeros((2, 2)), net_lots=0, lam=0.5)
        assert not encode_trading_cost(problem).energies.any()


class TestEncodingEquivalence:
    """The soft Ising model equals the cost computed directly from positions."""

    @pytest.mark.parametrize("n_assets", [1, 2, 3])
    def test_exhaustive(self, random_problem, n_assets):
        for seed in range(3):
            rng = np.random.default_rng(100 + seed)
            problem = random_problem(
                n_assets=n_assets, net_lots=int(rng.integers(-n_assets, n_assets + 1)),
                lam=float(rng.uniform()), trading_cost=float(rng.uniform(0, 0.05)),
                penalty=float(rng.uniform(0.5, 3.0)), seed=seed,
                previous=rng.integers(-1, 2, size=n_assets),
            )
            energies = build_soft(problem).energies
            for bits in itertools.product((0, 1), repeat=2 * n_assets):
                assert energies[bits_to_index(bits)] == pytest.approx(direct_soft_cost(bits, problem), abs=1e-9)

    def test_eight_assets_sampled(self, eight_asset_problem):
        problem = eight_asset_problem.replace(
            trading_cost=0.015, penalty=2.5, previous=[1, 0, -1, 0, 1, 1, 0, -1],
        )
        energies = build_soft(problem).energies
        rng = np.random.default_rng(42)
        for bits in rng.integers(0, 2, size=(10_000, 16)):
            assert energies[bits_to_index(bits)] == pytest.approx(direct_soft_cost(bits, problem), abs=1e-9)

    def test_hard_equals_soft_on_feasible_states(self, random_problem):
        problem = random_problem(n_assets=3, net_lots=1, penalty=4.0, trading_cost=0.02)
        feasible = feasible_mask(3, 1)
        assert np.allclose(build_soft(problem).energies[feasible], build_hard(problem).energies[feasible])

    def test_penalty_vanishes_only_on_feasible(self, random_problem):
        problem = random_problem(n_assets=3, net_lots=1, penalty=1.0)
        penalty = encode_penalty(problem).energies
        feasible = feasible_mask(3, 1)
        assert np.allclose(penalty[feasible], 0.0)
        assert penalty[~feasible].min() == pytest.approx(1.0)


class TestPenaltyCoefficient:
    """Automatic penalty scaling."""

    def test_rounds_up_to_two_significant_figures(self, random_problem):
        # spread 3 -> 3.03 -> 3.1
        assert compute_penalty_coefficient(random_problem(), -1.0, 2.0) == 3.1

    def test_exact_two_figure_target(self, random_problem):
        # spread 0.5 -> 0.505 -> 0.51
        assert compute_penalty_coefficient(random_problem(), 0.0, 0.5) == 0.51

    def test_constant_cost(self, random_problem):
        assert compute_penalty_coefficient(random_problem(), 1.0, 1.0) == PENALTY_FLOOR

    def test_rejects_inverted_range(self, random_problem):
        with pytest.raises(ValueError):
            compute_penalty_coefficient(random_problem(), 2.0, 1.0)

    def test_separates_feasible_from_infeasible(self, eight_asset_problem):
        problem = eight_asset_problem.replace(penalty=auto_penalty(eight_asset_problem))
        energies = build_soft(problem).energies
        feasible = feasible_mask(8, 4)
        assert energies[~feasible].min() > energies[feasible].max()


class TestMetrics:
    """Return, risk and trading bookkeeping for chosen positions."""

    def test_values(self):
        problem = PortfolioProblem(
            mu=[0.2, -0.1, 0.05], sigma=np.diag([0.04, 0.09, 0.01]), net_lots=1, lam=0.5,
            trading_cost=0.01, previous=[1, 1, 0],
        )
        m = metrics([1, -1, 1], problem)
        assert m.expected_return == pytest.approx(0.2 + 0.1 + 0.05)
        assert m.risk == pytest.approx(np.sqrt(0.04 + 0.09 + 0.01))
        assert m.trade_count == 3  # |(-1) - 1| + |1 - 0|
        assert m.trading_cost == pytest.approx(0.02)
        assert m.adjusted_return == pytest.approx(0.35 - 0.02)

    def test_rejects_non_positions(self, random_problem):
        with pytest.raises(ValueError):
            metrics([2, 0], random_problem())


def test_annualize():
    mu, sigma = annualize([0.001, 0.002], np.eye(2) * 1e-4)
    assert ANNUALIZATION_FACTOR == 250
    assert mu.tolist() == pytest.approx([0.25, 0.5])
    assert sigma[0, 0] == pytest.approx(0.025)

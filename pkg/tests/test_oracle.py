"""Tests for the exhaustive classical oracle."""

import numpy as np
import pytest

from ising import IsingBuilder
from oracle import (
    MAX_ORACLE_QUBITS,
    auto_penalty,
    baseline_cumulative,
    best_feasible,
    census,
    cumulative_distribution,
    efficient_frontier,
    enumerate_states,
    extrema,
    feasible_count,
    feasible_count_formula,
    feasible_positions,
    uniform_mean,
)
from portfolio import PortfolioProblem, build_hard, build_soft, decode_index, markowitz_cost
from statevector import CapacityError


class TestCensus:
    """Feasible-state counting."""

    def test_eight_assets(self):
        result = census(8, 4)
        assert result["states"] == 65536
        assert result["feasible"] == 1820
        assert result["closed_form"] == 1820
        assert round(100 * result["fraction"], 2) == 2.78

    @pytest.mark.parametrize("n_assets", range(1, 7))
    def test_formula_matches_enumeration(self, n_assets):
        for net_lots in range(-n_assets, n_assets + 1):
            assert feasible_count(n_assets, net_lots) == feasible_count_formula(n_assets, net_lots)

    def test_capacity(self):
        with pytest.raises(CapacityError):
            census(MAX_ORACLE_QUBITS // 2 + 1, 0)


def test_enumerate_states_order_and_decoding():
    states = list(enumerate_states(2))
    assert [index for index, _, _ in states] == list(range(16))
    index, bits, z = states[0b1001]
    assert bits.tolist() == [1, 0, 0, 1]
    assert z.tolist() == [-1, 1]


def test_extrema_small_model():
    model = IsingBuilder(2).add_term([0], 1.0).add_term([0, 1], 0.5).build()
    # energies: s0 + 0.5 s0 s1 over indices 0..3
    bounds = extrema(model)
    assert bounds.min == pytest.approx(-1.5)
    assert bounds.argmin_bits == 2
    assert bounds.max == pytest.approx(1.5)
    assert bounds.argmax_bits == 3


def test_best_feasible_lowest_index_on_ties():
    # zero cost everywhere: the first feasible index wins
    problem = PortfolioProblem(mu=[0.0, 0.0], sigma=np.zeros((2, 2)), net_lots=1, lam=0.5)
    selected = best_feasible(build_hard(problem), problem)
    assert selected == 0b0010
    assert decode_index(selected, 2).tolist() == [1, 0]


def test_best_feasible_is_true_minimum(random_problem):
    problem = random_problem(n_assets=4, net_lots=2, trading_cost=0.01, previous=[1, 0, -1, 0])
    selected = best_feasible(build_hard(problem), problem)
    z = decode_index(selected, 4)
    assert z.sum() == 2
    best = min(markowitz_cost(c, problem) + 0.01 * np.count_nonzero(c != problem.previous)
               for c in feasible_positions(4, 2))
    assert build_hard(problem).energies[selected] == pytest.approx(best)


def test_feasible_positions_distinct():
    positions = feasible_positions(4, 1)
    assert len({tuple(p) for p in positions}) == len(positions)
    assert np.all(positions.sum(axis=1) == 1)


class TestFrontier:
    """Exact efficient frontier."""

    def test_endpoints(self, eight_asset_problem):
        frontier = efficient_frontier(eight_asset_problem, [0.0, 0.5, 1.0])
        returns, risks = frontier.cloud_returns, frontier.cloud_risks
        first, last = frontier.points[0], frontier.points[-1]
        assert first.lam == 0.0
        assert first.expected_return == pytest.approx(returns.max())
        assert last.lam == 1.0
        assert last.risk == pytest.approx(risks.min())
        assert all(sum(pt.z) == 4 for pt in frontier.points)

    def test_duplicates_collapsed(self):
        problem = PortfolioProblem(mu=[0.1, 0.2], sigma=np.eye(2) * 1e-6, net_lots=2, lam=0.5)
        frontier = efficient_frontier(problem, [0.0, 0.5, 1.0])
        # only z = (1, 1) is feasible
        assert [pt.z for pt in frontier.points] == [(1, 1)]

    def test_rejects_bad_lambda(self, random_problem):
        with pytest.raises(ValueError):
            efficient_frontier(random_problem(), [1.5])


class TestCumulative:
    """Cumulative cost distributions."""

    def test_uniform(self):
        costs, cumulative = cumulative_distribution(np.array([3.0, 1.0, 2.0, 1.0]))
        assert costs.tolist() == [1.0, 1.0, 2.0, 3.0]
        assert cumulative.tolist() == pytest.approx([0.25, 0.5, 0.75, 1.0])

    def test_weighted(self):
        costs, cumulative = cumulative_distribution(np.array([2.0, 1.0]), np.array([0.3, 0.1]))
        assert costs.tolist() == [1.0, 2.0]
        assert cumulative.tolist() == pytest.approx([0.25, 1.0])

    def test_feasible_baseline(self, random_problem):
        problem = random_problem(n_assets=3, net_lots=1, penalty=2.0)
        costs, cumulative = baseline_cumulative(build_soft(problem), True, problem)
        assert len(costs) == feasible_count(3, 1)
        assert np.all(np.diff(costs) >= 0)
        assert cumulative[-1] == pytest.approx(1.0)


def test_uniform_mean_restriction_needs_problem(random_problem):
    model = build_soft(random_problem(penalty=1.0))
    with pytest.raises(ValueError):
        uniform_mean(model, restrict_feasible=True)


def test_auto_penalty_exceeds_spread(random_problem):
    problem = random_problem(n_assets=3, net_lots=1, trading_cost=0.02)
    bounds = extrema(build_hard(problem))
    assert auto_penalty(problem) > bounds.max - bounds.min

"""Exhaustive classical reference over all 2^(2N) encoded portfolio states.

Everything here is a full scan with deterministic lowest-index tie-breaks;
it is the yardstick the QAOA runs are measured against.
"""

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence

import numpy as np

from ising import IsingModel
from portfolio import (
    PortfolioProblem,
    build_hard,
    compute_penalty_coefficient,
    markowitz_cost,
    metrics,
    net_investment,
    positions_table,
)
from statevector import CapacityError

logger = logging.getLogger(__name__)

MAX_ORACLE_QUBITS = 24
CHUNK = 1 << 16


@dataclass(frozen=True)
class Extrema:
    min: float
    argmin_bits: int
    max: float
    argmax_bits: int


@dataclass(frozen=True)
class FrontierPoint:
    lam: float
    z: tuple
    expected_return: float
    risk: float


@dataclass
class Frontier:
    points: list[FrontierPoint]
    cloud_returns: np.ndarray
    cloud_risks: np.ndarray


def _check_size(n_assets: int) -> int:
    n_qubits = 2 * n_assets
    if n_assets < 1 or n_qubits > MAX_ORACLE_QUBITS:
        raise CapacityError(
            f"oracle supports 1 to {MAX_ORACLE_QUBITS // 2} assets, got {n_assets}"
        )
    return n_qubits


def _index_chunks(n_qubits: int) -> Iterator[np.ndarray]:
    total = 1 << n_qubits
    for start in range(0, total, CHUNK):
        yield np.arange(start, min(start + CHUNK, total), dtype=np.int64)


def enumerate_states(n_assets: int) -> Iterator[tuple[int, np.ndarray, np.ndarray]]:
    """Yield (basis index, bits, positions z) for every state, ascending."""
    n_qubits = _check_size(n_assets)
    shifts = np.arange(n_qubits)
    for chunk in _index_chunks(n_qubits):
        table = positions_table(chunk, n_assets)
        for index, z in zip(chunk, table):
            yield int(index), ((index >> shifts) & 1).astype(np.int8), z


def feasible_mask(n_assets: int, net_lots: int) -> np.ndarray:
    n_qubits = _check_size(n_assets)
    return np.concatenate([
        net_investment(chunk, n_assets) == net_lots for chunk in _index_chunks(n_qubits)
    ])


def feasible_count(n_assets: int, net_lots: int) -> int:
    return int(np.count_nonzero(feasible_mask(n_assets, net_lots)))


def feasible_count_formula(n_assets: int, net_lots: int) -> int:
    """Closed form: k shorts, D+k longs and N-D-2k zeros, each zero encodable two ways."""
    total = 0
    for shorts in range(n_assets + 1):
        longs = net_lots + shorts
        zeros = n_assets - longs - shorts
        if longs < 0 or zeros < 0:
            continue
        total += (math.factorial(n_assets)
                  // (math.factorial(longs) * math.factorial(shorts) * math.factorial(zeros))
                  * 2 ** zeros)
    return total


def census(n_assets: int, net_lots: int) -> dict:
    total = 1 << _check_size(n_assets)
    feasible = feasible_count(n_assets, net_lots)
    return {
        "n_assets": n_assets,
        "net_lots": net_lots,
        "states": total,
        "feasible": feasible,
        "fraction": feasible / total,
        "closed_form": feasible_count_formula(n_assets, net_lots),
    }


def extrema(model: IsingModel) -> Extrema:
    if model.n_spins > MAX_ORACLE_QUBITS:
        raise CapacityError(f"oracle supports at most {MAX_ORACLE_QUBITS} spins, got {model.n_spins}")
    energies = model.energies
    lo, hi = int(np.argmin(energies)), int(np.argmax(energies))
    return Extrema(float(energies[lo]), lo, float(energies[hi]), hi)


def auto_penalty(problem: PortfolioProblem) -> float:
    """Penalty A from the exact C_hard range of this instance."""
    bounds = extrema(build_hard(problem))
    penalty = compute_penalty_coefficient(problem, bounds.min, bounds.max)
    logger.info("C_hard range [%.6g, %.6g] -> A = %.6g", bounds.min, bounds.max, penalty)
    return penalty


def best_feasible(model: IsingModel, problem: PortfolioProblem) -> int:
    """Lowest-cost feasible basis state (lowest index on ties)."""
    feasible = feasible_mask(problem.n_assets, problem.net_lots)
    candidates = np.flatnonzero(feasible)
    if candidates.size == 0:
        raise ValueError(f"no feasible state for N={problem.n_assets}, D={problem.net_lots}")
    costs = model.energies[candidates]
    return int(candidates[np.argmin(costs)])


def feasible_positions(n_assets: int, net_lots: int) -> np.ndarray:
    """Every distinct z in {-1, 0, +1}^N with sum z = D, in lexicographic order."""
    _check_size(n_assets)
    grid = np.array(list(itertools.product((-1, 0, 1), repeat=n_assets)), dtype=np.int8)
    return grid[grid.sum(axis=1) == net_lots]


def efficient_frontier(problem: PortfolioProblem, lambda_grid: Sequence[float]) -> Frontier:
    """Feasible Markowitz optimum for each lambda, plus the feasible (return, risk) cloud."""
    grid = list(lambda_grid)
    if not grid:
        raise ValueError("lambda_grid must not be empty")
    candidates = feasible_positions(problem.n_assets, problem.net_lots)
    z = candidates.astype(np.float64)
    returns = z @ problem.mu
    variances = np.einsum("ki,ij,kj->k", z, problem.sigma, z)
    risks = np.sqrt(np.clip(variances, 0.0, None))

    points: list[FrontierPoint] = []
    seen = set()
    for lam in grid:
        if not 0.0 <= lam <= 1.0:
            raise ValueError(f"lambda must be within [0, 1], got {lam}")
        costs = lam * variances - (1.0 - lam) * returns
        best = int(np.argmin(costs))
        key = tuple(int(v) for v in candidates[best])
        if key in seen:
            continue
        seen.add(key)
        points.append(FrontierPoint(float(lam), key, float(returns[best]), float(risks[best])))
    return Frontier(points, returns, risks)


def cumulative_distribution(costs: np.ndarray, weights: Optional[np.ndarray] = None) -> tuple[np.ndarray, np.ndarray]:
    """Sorted costs and the cumulative probability up to each one."""
    costs = np.asarray(costs, dtype=np.float64)
    if weights is None:
        weights = np.full(costs.shape, 1.0 / costs.shape[0])
    order = np.argsort(costs, kind="stable")
    cumulative = np.cumsum(np.asarray(weights, dtype=np.float64)[order])
    if cumulative.size:
        cumulative = cumulative / cumulative[-1]
    return costs[order], cumulative


def baseline_cumulative(model: IsingModel, restrict_feasible: bool,
                        problem: PortfolioProblem) -> tuple[np.ndarray, np.ndarray]:
    """Uniform draw over all (or all feasible) states, as a cumulative cost curve."""
    energies = model.energies
    if restrict_feasible:
        energies = energies[feasible_mask(problem.n_assets, problem.net_lots)]
    return cumulative_distribution(energies)


def uniform_mean(model: IsingModel, restrict_feasible: bool = False,
                 problem: Optional[PortfolioProblem] = None) -> float:
    energies = model.energies
    if restrict_feasible:
        if problem is None:
            raise ValueError("restrict_feasible needs the problem for its constraint")
        energies = energies[feasible_mask(problem.n_assets, problem.net_lots)]
    return float(energies.mean())


def greedy_trajectory_returns(problems: Sequence[PortfolioProblem]) -> float:
    """Total adjusted return of the per-period brute-force choice, carrying y forward.

    Independent of the QAOA tooling: scans distinct feasible z vectors per period
    and scores them with the Markowitz cost plus the trading-cost table.
    """
    total = 0.0
    previous = None
    for problem in problems:
        if previous is not None:
            problem = problem.replace(previous=previous)
        candidates = feasible_positions(problem.n_assets, problem.net_lots)
        scores = [markowitz_cost(z, problem)
                  + problem.trading_cost * np.count_nonzero(z != problem.previous)
                  for z in candidates]
        choice = candidates[int(np.argmin(scores))]
        total += metrics(choice, problem).adjusted_return
        previous = choice
    return total

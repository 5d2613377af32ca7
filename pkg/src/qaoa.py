"""Soft- and hard-constraint QAOA circuits for portfolio rebalancing.

Soft: uniform start, cost layer, transverse-field X mixer, cost C_soft.
Hard: entangled start fixing (#long - #short) = D, cost layer, then an XY
parity-ring mixer on the long register followed by one on the short
register, cost C_hard. Both mixers conserve their register's Hamming weight,
so the hard circuit never leaves the feasible subspace.
"""

import logging
import math
from dataclasses import dataclass
from functools import reduce
from typing import Callable, Optional, Sequence

import numpy as np

from ising import IsingModel
from optimizer import MultiStartResult, OptimizerConfig, multi_start, qaoa_bounds
from portfolio import PortfolioProblem, build_hard, build_soft, net_investment, short_count
from statevector import (
    StateVector,
    apply_diagonal_phase,
    apply_exp_x,
    apply_exp_xxyy,
    init_uniform,
    probabilities,
)

logger = logging.getLogger(__name__)

SOFT = "soft"
HARD = "hard"
VARIANTS = (SOFT, HARD)

# Below this a state is treated as never observed.
PROBABILITY_FLOOR = 1e-12

FeasibilityFilter = Callable[[np.ndarray], np.ndarray]


class NoSolutionError(RuntimeError):
    """No feasible basis state carries measurable probability."""


@dataclass
class QaoaParams:
    """Depth-p angles: beta in [0, pi]^p, gamma in [0, 2 pi]^p (p = 0 is the bare initial state)."""
    beta: np.ndarray
    gamma: np.ndarray

    def __post_init__(self):
        self.beta = np.atleast_1d(np.asarray(self.beta, dtype=np.float64))
        self.gamma = np.atleast_1d(np.asarray(self.gamma, dtype=np.float64))
        if self.beta.shape != self.gamma.shape or self.beta.ndim != 1:
            raise ValueError(
                f"beta and gamma must be equal-length vectors, got {self.beta.shape} and {self.gamma.shape}"
            )
        if np.any(self.beta < 0) or np.any(self.beta > math.pi):
            raise ValueError(f"beta angles must lie in [0, pi], got {self.beta.tolist()}")
        if np.any(self.gamma < 0) or np.any(self.gamma > 2 * math.pi):
            raise ValueError(f"gamma angles must lie in [0, 2 pi], got {self.gamma.tolist()}")

    @property
    def p(self) -> int:
        return int(self.beta.shape[0])

    @classmethod
    def from_vector(cls, x: Sequence[float]) -> "QaoaParams":
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 1 or x.shape[0] % 2:
            raise ValueError(f"angle vector must have even length, got shape {x.shape}")
        p = x.shape[0] // 2
        return cls(beta=x[:p], gamma=x[p:])

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.beta, self.gamma])


@dataclass
class RunResult:
    final_state: StateVector
    expectation: float
    distribution: np.ndarray
    energies: np.ndarray
    selected_bits: Optional[int] = None

    def feasible_probability(self, feasible: np.ndarray) -> float:
        return float(self.distribution[feasible].sum())


def cost_layer(state: StateVector, model: IsingModel, gamma_k: float) -> StateVector:
    """exp(-i gamma_k (C - c)): every Z and ZZ term of the model at once.

    All terms are diagonal and commute, so the product of the per-term
    exponentials equals one diagonal phase. The constant c is a global phase.
    """
    if model.n_spins != state.n_qubits:
        raise ValueError(f"model has {model.n_spins} spins, state has {state.n_qubits} qubits")
    if gamma_k == 0:
        return state
    return apply_diagonal_phase(state, model.energies - model.c, gamma_k)


def x_mixer_layer(state: StateVector, beta_k: float) -> StateVector:
    for qubit in range(state.n_qubits):
        apply_exp_x(state, qubit, beta_k)
    return state


def ring_pairs(register: Sequence[int]) -> list[tuple[int, int]]:
    """XY pairs of a parity ring, in application order.

    Odd-start pairs (1,2), (3,4), ...; then even-start pairs (2,3), (4,5), ...
    which wrap to (R,1) when R is even; then (R,1) alone when R is odd.
    """
    r = len(register)
    if r < 2:
        raise ValueError(f"a parity ring needs at least 2 qubits, got {r}")
    if len(set(register)) != r:
        raise ValueError(f"register indices must be distinct, got {list(register)}")
    odd = [(register[k], register[k + 1]) for k in range(0, r - 1, 2)]
    even = [(register[k], register[(k + 1) % r]) for k in range(1, r, 2)]
    last = [(register[r - 1], register[0])] if r % 2 else []
    return odd + even + last


def parity_mixer_layer(state: StateVector, register: Sequence[int], beta_k: float) -> StateVector:
    for qubit_a, qubit_b in ring_pairs(register):
        apply_exp_xxyy(state, qubit_a, qubit_b, beta_k)
    return state


def init_hard_constrained(n_assets: int, net_lots: int) -> StateVector:
    """|01>^D (x) ((|00> + |11>)/sqrt 2)^(N-D) over pairs |x^- x^+>.

    Assets 0..D-1 hold a long lot; the rest are Bell pairs, so each extra long
    is matched by a short and sum z = D on every branch.
    """
    if not 0 <= net_lots <= n_assets:
        raise ValueError(f"net_lots must be within [0, {n_assets}], got {net_lots}")
    # local pair index = x^- + 2 x^+
    held_long = np.array([0, 0, 1, 0], dtype=np.complex128)
    bell = np.array([1, 0, 0, 1], dtype=np.complex128) / math.sqrt(2)
    pairs = [held_long] * net_lots + [bell] * (n_assets - net_lots)
    # np.kron puts its first argument in the high bits; asset 0 is the lowest pair
    amplitudes = reduce(np.kron, reversed(pairs))
    return StateVector(2 * n_assets, amplitudes)


def feasibility_filter(problem: PortfolioProblem) -> FeasibilityFilter:
    n, d = problem.n_assets, problem.net_lots
    return lambda indices: net_investment(indices, n) == d


def _finish(problem: PortfolioProblem, state: StateVector, model: IsingModel, select: bool) -> RunResult:
    distribution = probabilities(state)
    energies = model.energies
    result = RunResult(
        final_state=state,
        expectation=float(distribution @ energies),
        distribution=distribution,
        energies=energies,
    )
    if select:
        try:
            result.selected_bits = select_solution(result, feasibility_filter(problem))
        except NoSolutionError:
            logger.warning("No feasible state with measurable probability for D=%d", problem.net_lots)
    return result


def run_soft(problem: PortfolioProblem, params: QaoaParams, model_soft: Optional[IsingModel] = None,
             select: bool = True) -> RunResult:
    model = model_soft if model_soft is not None else build_soft(problem)
    n_qubits = problem.layout.n_spins
    if model.n_spins != n_qubits:
        raise ValueError(f"model has {model.n_spins} spins, problem needs {n_qubits}")
    state = init_uniform(n_qubits)
    for beta_k, gamma_k in zip(params.beta, params.gamma):
        cost_layer(state, model, gamma_k)
        x_mixer_layer(state, beta_k)
    return _finish(problem, state, model, select)


def run_hard(problem: PortfolioProblem, params: QaoaParams, model_hard: Optional[IsingModel] = None,
             select: bool = True) -> RunResult:
    model = model_hard if model_hard is not None else build_hard(problem)
    layout = problem.layout
    if model.n_spins != layout.n_spins:
        raise ValueError(f"model has {model.n_spins} spins, problem needs {layout.n_spins}")
    if layout.n_assets < 2:
        raise ValueError(f"hard formulation needs at least 2 assets for its parity rings, got {layout.n_assets}")
    state = init_hard_constrained(layout.n_assets, problem.net_lots)
    long_register = layout.long_register()
    short_register = layout.short_register()
    for beta_k, gamma_k in zip(params.beta, params.gamma):
        cost_layer(state, model, gamma_k)
        parity_mixer_layer(state, long_register, beta_k)
        parity_mixer_layer(state, short_register, beta_k)
    return _finish(problem, state, model, select)


def run(variant: str, problem: PortfolioProblem, params: QaoaParams,
        model: Optional[IsingModel] = None, select: bool = True) -> RunResult:
    if variant == SOFT:
        return run_soft(problem, params, model, select)
    if variant == HARD:
        return run_hard(problem, params, model, select)
    raise ValueError(f"variant must be one of {VARIANTS}, got {variant!r}")


def select_solution(result: RunResult, feasibility_filter: FeasibilityFilter) -> int:
    """Most probable feasible basis state; ties go to lower cost, then lower index."""
    dist = result.distribution
    indices = np.arange(dist.shape[0], dtype=np.int64)
    candidates = indices[feasibility_filter(indices) & (dist > PROBABILITY_FLOOR)]
    if candidates.size == 0:
        raise NoSolutionError("no feasible state has probability above 1e-12")
    top = dist[candidates].max()
    tied = candidates[dist[candidates] >= top - PROBABILITY_FLOOR]
    costs = result.energies[tied]
    cheapest = tied[costs <= costs.min() + PROBABILITY_FLOOR]
    return int(cheapest[0])


def most_probable(result: RunResult) -> int:
    return int(np.argmax(result.distribution))


def band_occupancy(distribution: np.ndarray, n_assets: int, net_lots: int) -> np.ndarray:
    """Feasible probability mass per parity band k = number of shorts, k = 0..N-D."""
    indices = np.arange(distribution.shape[0], dtype=np.int64)
    feasible = net_investment(indices, n_assets) == net_lots
    bands = short_count(indices[feasible], n_assets)
    width = max(n_assets - net_lots + 1, 1)
    return np.bincount(bands, weights=distribution[feasible], minlength=width)[:width]


def parity_bands(n_assets: int, net_lots: int) -> list[dict]:
    """The K = N - D + 1 bands with their counts and initial hard-start probability."""
    if not 0 <= net_lots <= n_assets:
        raise ValueError(f"net_lots must be within [0, {n_assets}], got {net_lots}")
    free = n_assets - net_lots
    rows = []
    for k in range(free + 1):
        rows.append({
            "band": k,
            "long": net_lots + k,
            "short": k,
            "probability": math.comb(free, k) / 2 ** free,
        })
    return rows


def model_for(variant: str, problem: PortfolioProblem) -> IsingModel:
    if variant == SOFT:
        return build_soft(problem)
    if variant == HARD:
        return build_hard(problem)
    raise ValueError(f"variant must be one of {VARIANTS}, got {variant!r}")


def expectation_objective(variant: str, problem: PortfolioProblem,
                          model: Optional[IsingModel] = None) -> Callable[[np.ndarray], float]:
    """Angles [beta..., gamma...] -> <C>. Each call simulates on its own state."""
    model = model if model is not None else model_for(variant, problem)
    _ = model.energies  # build the table once, before any worker threads

    def objective(x: np.ndarray) -> float:
        return run(variant, problem, QaoaParams.from_vector(x), model, select=False).expectation

    return objective


@dataclass
class SolveResult:
    variant: str
    params: QaoaParams
    run: RunResult
    search: MultiStartResult


def solve(variant: str, problem: PortfolioProblem, p: int, config: OptimizerConfig,
          model: Optional[IsingModel] = None) -> SolveResult:
    """Optimize the angles with multi-start Nelder-Mead and rerun at the best point."""
    if p < 1:
        raise ValueError(f"depth p must be >= 1, got {p}")
    model = model if model is not None else model_for(variant, problem)
    expected_bounds = qaoa_bounds(p)
    if list(config.bounds) != expected_bounds:
        raise ValueError(f"optimizer bounds must be the depth-{p} QAOA box")
    search = multi_start(expectation_objective(variant, problem, model), config)
    params = QaoaParams.from_vector(search.best.best_angles)
    return SolveResult(variant, params, run(variant, problem, params, model), search)

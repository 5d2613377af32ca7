"""Portfolio rebalancing instances and their Ising encodings.

Each asset i owns two spins: a short decision at index 2i and a long decision
at index 2i+1. The held position is z_i = x_i^+ - x_i^-, so (x^-, x^+) = (1, 1)
is a netted-off zero that still pays the trading cost.
"""

import json
import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, Optional, Sequence

import numpy as np

from ising import IsingBuilder, IsingModel, add_scaled

logger = logging.getLogger(__name__)

ANNUALIZATION_FACTOR = 250
SYMMETRY_TOLERANCE = 1e-12
# Returned when the cost is constant and any positive penalty separates.
PENALTY_FLOOR = 1e-6
PENALTY_MARGIN = 1.01


@dataclass(frozen=True)
class SpinLayout:
    """Asset i -> (short spin 2i, long spin 2i+1)."""
    n_assets: int

    @property
    def n_spins(self) -> int:
        return 2 * self.n_assets

    def short(self, asset: int) -> int:
        return 2 * asset

    def long(self, asset: int) -> int:
        return 2 * asset + 1

    def short_register(self) -> list[int]:
        return [self.short(i) for i in range(self.n_assets)]

    def long_register(self) -> list[int]:
        return [self.long(i) for i in range(self.n_assets)]


@dataclass(eq=False)
class PortfolioProblem:
    """One rebalancing decision.

    ``net_lots`` is D, ``lam`` the risk/return weight, ``trading_cost`` T per
    traded asset, ``previous`` the held positions y and ``penalty`` the soft
    constraint scale A (only the soft formulation needs it).
    """
    mu: np.ndarray
    sigma: np.ndarray
    net_lots: int
    lam: float
    trading_cost: float = 0.0
    previous: Optional[np.ndarray] = None
    penalty: Optional[float] = None

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=np.float64)
        self.sigma = np.asarray(self.sigma, dtype=np.float64)
        n = self.mu.shape[0] if self.mu.ndim == 1 else -1
        if n < 1:
            raise ValueError(f"mu must be a non-empty vector, got shape {self.mu.shape}")
        if self.sigma.shape != (n, n):
            raise ValueError(f"sigma must be {n}x{n}, got shape {self.sigma.shape}")
        if not np.allclose(self.sigma, self.sigma.T, rtol=0.0, atol=SYMMETRY_TOLERANCE):
            raise ValueError("sigma must be symmetric")
        if self.previous is None:
            self.previous = np.zeros(n, dtype=np.int8)
        self.previous = np.asarray(self.previous)
        if self.previous.shape != (n,) or not np.all(np.isin(self.previous, (-1, 0, 1))):
            raise ValueError(f"previous positions must be {n} values in {{-1, 0, +1}}")
        self.previous = self.previous.astype(np.int8)
        if int(self.net_lots) != self.net_lots or abs(self.net_lots) > n:
            raise ValueError(f"net_lots must be an integer with |D| <= {n}, got {self.net_lots}")
        self.net_lots = int(self.net_lots)
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"lam must be within [0, 1], got {self.lam}")
        if self.trading_cost < 0:
            raise ValueError(f"trading_cost must be non-negative, got {self.trading_cost}")
        if self.penalty is not None and self.penalty <= 0:
            raise ValueError(f"penalty must be positive, got {self.penalty}")

    @property
    def n_assets(self) -> int:
        return int(self.mu.shape[0])

    @property
    def layout(self) -> SpinLayout:
        return SpinLayout(self.n_assets)

    def replace(self, **changes) -> "PortfolioProblem":
        fields = {
            "mu": self.mu, "sigma": self.sigma, "net_lots": self.net_lots,
            "lam": self.lam, "trading_cost": self.trading_cost,
            "previous": self.previous, "penalty": self.penalty,
        }
        fields.update(changes)
        return PortfolioProblem(**fields)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "N": self.n_assets,
            "D": self.net_lots,
            "lambda": float(self.lam),
            "T": float(self.trading_cost),
            "A": None if self.penalty is None else float(self.penalty),
            "mu": [float(v) for v in self.mu],
            "sigma": [[float(v) for v in row] for row in self.sigma],
            "y": [int(v) for v in self.previous],
        }

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "PortfolioProblem":
        problem = cls(
            mu=payload["mu"],
            sigma=payload["sigma"],
            net_lots=payload["D"],
            lam=payload["lambda"],
            trading_cost=payload.get("T", 0.0),
            previous=payload.get("y"),
            penalty=payload.get("A"),
        )
        if "N" in payload and payload["N"] != problem.n_assets:
            raise ValueError(f"N={payload['N']} does not match {problem.n_assets} assets")
        return problem

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "PortfolioProblem":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class PortfolioMetrics:
    expected_return: float
    risk: float
    trading_cost: float
    trade_count: int

    @property
    def adjusted_return(self) -> float:
        return self.expected_return - self.trading_cost


def decode(bits: Sequence[int]) -> np.ndarray:
    """Positions z from a 2N bit vector ordered (x_0^-, x_0^+, x_1^-, ...)."""
    x = np.asarray(bits, dtype=np.int8)
    if x.ndim != 1 or x.shape[0] % 2:
        raise ValueError(f"bit vector must have even length, got shape {x.shape}")
    return (x[1::2] - x[0::2]).astype(np.int8)


def decode_index(index: int, n_assets: int) -> np.ndarray:
    """Positions z encoded by a basis index over 2N qubits."""
    bits = (index >> np.arange(2 * n_assets)) & 1
    return decode(bits)


def positions_table(indices: np.ndarray, n_assets: int) -> np.ndarray:
    """Decoded positions for many basis indices at once, shape (len, N)."""
    indices = np.asarray(indices, dtype=np.int64)
    out = np.empty((indices.shape[0], n_assets), dtype=np.int8)
    for i in range(n_assets):
        out[:, i] = ((indices >> (2 * i + 1)) & 1) - ((indices >> (2 * i)) & 1)
    return out


def net_investment(indices: np.ndarray, n_assets: int) -> np.ndarray:
    """sum_i z_i for each basis index."""
    indices = np.asarray(indices, dtype=np.int64)
    total = np.zeros(indices.shape, dtype=np.int64)
    for i in range(n_assets):
        total += ((indices >> (2 * i + 1)) & 1) - ((indices >> (2 * i)) & 1)
    return total


def short_count(indices: np.ndarray, n_assets: int) -> np.ndarray:
    """|{i : x_i^- = 1}| for each basis index (the parity band of a feasible state)."""
    indices = np.asarray(indices, dtype=np.int64)
    total = np.zeros(indices.shape, dtype=np.int64)
    for i in range(n_assets):
        total += (indices >> (2 * i)) & 1
    return total


def _add_pair_products(builder: IsingBuilder, layout: SpinLayout, i: int, j: int, weight: float) -> None:
    """weight * (s_i^+ s_j^+ - s_i^+ s_j^- - s_i^- s_j^+ + s_i^- s_j^-) = 4 weight z_i z_j."""
    builder.add_term([layout.long(i), layout.long(j)], weight)
    builder.add_term([layout.long(i), layout.short(j)], -weight)
    builder.add_term([layout.short(i), layout.long(j)], -weight)
    builder.add_term([layout.short(i), layout.short(j)], weight)


def encode_risk_return(problem: PortfolioProblem) -> IsingModel:
    """lam * z'sigma z - (1 - lam) * mu.z in spin form."""
    layout = problem.layout
    builder = IsingBuilder(layout.n_spins)
    n = problem.n_assets
    for i in range(n):
        for j in range(n):
            weight = problem.lam * problem.sigma[i, j] / 4.0
            if weight:
                _add_pair_products(builder, layout, i, j, weight)
        linear = (1.0 - problem.lam) * problem.mu[i] / 2.0
        if linear:
            builder.add_term([layout.long(i)], -linear)
            builder.add_term([layout.short(i)], linear)
    return builder.build()


def encode_trading_cost(problem: PortfolioProblem) -> IsingModel:
    """T for every asset whose encoded decision differs from its previous position.

    Coefficients depend on y so the conditional cost table is reproduced by a
    single quadratic expression; the (1, 1) state always pays T.
    """
    layout = problem.layout
    builder = IsingBuilder(layout.n_spins)
    quarter = problem.trading_cost / 4.0
    if not quarter:
        return builder.build()
    for i, y in enumerate(int(v) for v in problem.previous):
        y2 = y * y
        builder.add_term([], 3.0 * quarter)
        builder.add_term([layout.long(i)], quarter * (1 - y2 - y))
        builder.add_term([layout.short(i)], quarter * (1 - y2 + y))
        builder.add_term([layout.long(i), layout.short(i)], quarter * (2 * y2 - 1))
    return builder.build()


def encode_penalty(problem: PortfolioProblem) -> IsingModel:
    """A * (sum z - D)^2 in spin form."""
    if problem.penalty is None or problem.penalty <= 0:
        raise ValueError(f"soft formulation needs a positive penalty A, got {problem.penalty}")
    layout = problem.layout
    builder = IsingBuilder(layout.n_spins)
    a, d = float(problem.penalty), problem.net_lots
    n = problem.n_assets
    for i in range(n):
        for j in range(n):
            _add_pair_products(builder, layout, i, j, a / 4.0)
        if d:
            builder.add_term([layout.long(i)], -a * d)
            builder.add_term([layout.short(i)], a * d)
    builder.add_term([], a * d * d)
    return builder.build()


def build_hard(problem: PortfolioProblem) -> IsingModel:
    """Risk-return plus trading cost; the constraint lives in the circuit."""
    return add_scaled(encode_risk_return(problem), encode_trading_cost(problem))


def build_soft(problem: PortfolioProblem) -> IsingModel:
    """Risk-return plus trading cost plus the investment penalty."""
    return add_scaled(build_hard(problem), encode_penalty(problem))


def compute_penalty_coefficient(problem: PortfolioProblem, oracle_min: float, oracle_max: float) -> float:
    """Penalty A strictly above the C_hard range (max - min) over all spin states.

    A is (max - min) * 1.01 rounded up to two significant figures.
    """
    if oracle_max < oracle_min:
        raise ValueError(f"oracle_max {oracle_max} is below oracle_min {oracle_min}")
    spread = oracle_max - oracle_min
    if spread <= 0:
        return PENALTY_FLOOR
    target = spread * PENALTY_MARGIN
    step = 10.0 ** (math.floor(math.log10(target)) - 1)
    # k * step with k in [10, 100]; the format drops float noise from the product
    value = float(f"{math.ceil(round(target / step, 9)) * step:.2g}")
    logger.debug("Penalty for spread %.6g on %d assets: %.6g", spread, problem.n_assets, value)
    return value


def metrics(z: Sequence[int], problem: PortfolioProblem) -> PortfolioMetrics:
    positions = np.asarray(z, dtype=np.float64)
    if positions.shape != (problem.n_assets,) or not np.all(np.isin(positions, (-1, 0, 1))):
        raise ValueError(f"positions must be {problem.n_assets} values in {{-1, 0, +1}}")
    previous = problem.previous.astype(np.float64)
    variance = float(positions @ problem.sigma @ positions)
    return PortfolioMetrics(
        expected_return=float(problem.mu @ positions),
        risk=math.sqrt(max(variance, 0.0)),
        trading_cost=float(problem.trading_cost * np.count_nonzero(positions != previous)),
        trade_count=int(np.abs(positions - previous).sum()),
    )


def markowitz_cost(z: Sequence[int], problem: PortfolioProblem) -> float:
    """lam * z'sigma z - (1 - lam) * mu.z for positions z."""
    positions = np.asarray(z, dtype=np.float64)
    return float(problem.lam * positions @ problem.sigma @ positions
                 - (1.0 - problem.lam) * problem.mu @ positions)


def annualize(mu_daily, sigma_daily, factor: int = ANNUALIZATION_FACTOR):
    return np.asarray(mu_daily, dtype=np.float64) * factor, np.asarray(sigma_daily, dtype=np.float64) * factor

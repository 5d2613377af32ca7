"""Seeded, bounded Nelder-Mead over QAOA angles.

The simplex itself moves freely; every point handed to the objective is first
reflected back into the bounding box, so the objective only ever sees
in-bounds angles and the simplex keeps its volume at the walls.
"""

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize as scipy_minimize

logger = logging.getLogger(__name__)

DEFAULT_TOLERANCE = 1e-4
# Per-depth evaluation budget when max_evaluations is not given.
EVALUATIONS_PER_LAYER = 500
INITIAL_STEP_FRACTION = 0.1

Objective = Callable[[np.ndarray], float]


class NonFiniteObjectiveError(ValueError):
    """The objective returned NaN or an infinity."""


@dataclass
class OptimizerConfig:
    bounds: Sequence[Tuple[float, float]]
    max_evaluations: Optional[int] = None
    simplex_tolerance: float = DEFAULT_TOLERANCE
    n_starts: int = 20
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        self.bounds = [(float(lo), float(hi)) for lo, hi in self.bounds]
        if not self.bounds:
            raise ValueError("bounds must cover at least one dimension")
        for lo, hi in self.bounds:
            if not hi > lo:
                raise ValueError(f"bound ({lo}, {hi}) is empty")
        if self.max_evaluations is not None and self.max_evaluations < 1:
            raise ValueError(f"max_evaluations must be >= 1, got {self.max_evaluations}")
        if self.simplex_tolerance <= 0:
            raise ValueError(f"simplex_tolerance must be positive, got {self.simplex_tolerance}")
        if self.n_starts < 1:
            raise ValueError(f"n_starts must be >= 1, got {self.n_starts}")

    @property
    def evaluation_budget(self) -> int:
        if self.max_evaluations is not None:
            return self.max_evaluations
        # 2p angles: budget 500 * p
        return EVALUATIONS_PER_LAYER * max(1, len(self.bounds) // 2)


@dataclass
class OptimizeResult:
    best_angles: np.ndarray
    best_value: float
    evaluations: int
    start: np.ndarray
    converged: bool


@dataclass
class MultiStartResult:
    starts: List[OptimizeResult] = field(default_factory=list)

    @property
    def best(self) -> OptimizeResult:
        # first start wins ties so growing n_starts never changes an earlier optimum
        return min(self.starts, key=lambda r: r.best_value)

    @property
    def values(self) -> np.ndarray:
        return np.array([r.best_value for r in self.starts])


def reflect(x: np.ndarray, bounds: Sequence[Tuple[float, float]]) -> np.ndarray:
    """Fold each coordinate back into [lo, hi] by mirror reflection at the walls."""
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])
    width = hi - lo
    u = np.mod(np.asarray(x, dtype=np.float64) - lo, 2.0 * width)
    u = np.where(u > width, 2.0 * width - u, u)
    return lo + u


def start_rng(seed: int, start: int) -> np.random.Generator:
    return np.random.default_rng([seed, start])


def minimize(objective: Objective, config: OptimizerConfig, start: int = 0) -> OptimizeResult:
    """One Nelder-Mead run from a uniform-random point drawn for ``start``."""
    bounds = config.bounds
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])
    x0 = start_rng(config.seed, start).uniform(lo, hi)

    dims = len(bounds)
    simplex = np.tile(x0, (dims + 1, 1))
    for k in range(dims):
        simplex[k + 1, k] += INITIAL_STEP_FRACTION * (hi[k] - lo[k])

    best = {"value": math.inf, "x": x0.copy()}
    evaluations = 0

    def wrapped(x: np.ndarray) -> float:
        nonlocal evaluations
        point = reflect(x, bounds)
        value = float(objective(point))
        evaluations += 1
        if not math.isfinite(value):
            raise NonFiniteObjectiveError(
                f"objective returned {value} at {np.array2string(point, precision=6)}"
            )
        if value < best["value"]:
            best["value"] = value
            best["x"] = point
        return value

    result = scipy_minimize(
        wrapped,
        x0,
        method="Nelder-Mead",
        options={
            "initial_simplex": simplex,
            "xatol": config.simplex_tolerance,
            "fatol": math.inf,  # stop on simplex size alone
            "maxfev": config.evaluation_budget,
            "maxiter": 10 * config.evaluation_budget,
        },
    )
    return OptimizeResult(
        best_angles=best["x"],
        best_value=best["value"],
        evaluations=evaluations,
        start=x0,
        converged=bool(result.success),
    )


def multi_start(objective: Objective, config: OptimizerConfig) -> MultiStartResult:
    """``config.n_starts`` independent runs; start k is seeded by (seed, k)."""
    started = time.perf_counter()
    starts = range(config.n_starts)
    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(lambda k: minimize(objective, config, start=k), starts))
    else:
        results = [minimize(objective, config, start=k) for k in starts]
    outcome = MultiStartResult(results)
    logger.info(
        "Multi-start: %d starts, best %.6g, %d evaluations in %.2fs",
        config.n_starts,
        outcome.best.best_value,
        sum(r.evaluations for r in results),
        time.perf_counter() - started,
    )
    return outcome


def qaoa_bounds(p: int) -> list[Tuple[float, float]]:
    """beta in [0, pi]^p followed by gamma in [0, 2 pi]^p."""
    return [(0.0, math.pi)] * p + [(0.0, 2.0 * math.pi)] * p

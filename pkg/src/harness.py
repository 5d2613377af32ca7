"""Experiment campaigns: angle sweeps, single-period runs and monthly rebalancing.

Every campaign output is a pure function of its inputs and master seed.
Rebalancing cells solved by QAOA are cached on disk, keyed by a signature of
everything that determines them, so interrupted campaigns resume cheaply.
"""

import hashlib
import json
import logging
import os
import platform
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import metadata
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from platformdirs import user_cache_dir

from optimizer import OptimizerConfig, qaoa_bounds
from oracle import auto_penalty, baseline_cumulative, best_feasible, cumulative_distribution, feasible_mask
from portfolio import PortfolioProblem, annualize, build_hard, build_soft, decode_index, metrics
from qaoa import HARD, SOFT, QaoaParams, band_occupancy, most_probable, run, solve
from returns import ReturnsDataset, derive_statistics, monthly_windows

logger = logging.getLogger(__name__)

BRUTE = "brute"
ALGORITHMS = (BRUTE, SOFT, HARD)
DEFAULT_LAMBDA_GRID = tuple(round(0.1 * k, 1) for k in range(11))

# Bump when the cached cell payload changes so stale entries are ignored.
CACHE_SCHEMA_VERSION = 1

# Trade bounds under sum |z - y| counting: opening the book from zero, then per month.
FIRST_MONTH_TRADE_CAP = 8
MONTHLY_TRADE_CAP = 4
TOTAL_TRADE_CAP = 28

PERIOD_COLUMNS = [
    "lambda", "algorithm", "p", "period", "label", "z", "feasible",
    "trade_count", "expected_return", "trading_cost", "adjusted_return", "risk",
    "expectation", "feasible_probability", "band_occupancy",
    "seed_best_mean", "seed_best_min", "seed_best_std", "exceeds_trade_cap",
]
SUMMARY_COLUMNS = [
    "lambda", "algorithm", "p", "total_trades", "total_adjusted_return", "mean_risk",
    "months_over_trade_cap", "exceeds_total_cap", "brute_gap",
]
CURVE_COLUMNS = ["domain", "algorithm", "p", "cost", "cumulative_probability"]
FEASIBILITY_COLUMNS = ["algorithm", "p", "seed", "expectation", "feasible_probability", "band_occupancy"]
SWEEP_COLUMNS = ["beta", "gamma", "expectation"]


# ---------------------------------------------------------------------------
# Solve cache

def cache_enabled() -> bool:
    return os.getenv("QAOA_REBALANCE_NO_CACHE") != "1"


def _cache_dir() -> Path:
    override = os.getenv("QAOA_REBALANCE_CACHE_DIR")
    if override:
        return Path(override).expanduser()
    return Path(user_cache_dir("qaoa-rebalance")) / "solves"


def _signature(payload: Dict[str, Any]) -> str:
    canonical = json.dumps({"schema": CACHE_SCHEMA_VERSION, **payload}, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _load_cached(signature: str) -> Optional[dict]:
    path = _cache_dir() / f"{signature}.json"
    if not path.exists():
        return None
    try:
        return json.loads(path.read_text())
    except Exception as exc:
        logger.warning("Ignoring unreadable cache entry %s: %s", path.name, exc)
        return None


def _save_cached(signature: str, payload: dict) -> None:
    path = _cache_dir() / f"{signature}.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, separators=(",", ":")))


# ---------------------------------------------------------------------------
# Angle sweep

def sweep_beta_gamma(problem: PortfolioProblem, grid_beta: Sequence[float],
                     grid_gamma: Sequence[float]) -> np.ndarray:
    """<C_soft> after one soft layer at every (beta, gamma); rows follow grid_beta."""
    model = build_soft(problem)
    surface = np.empty((len(grid_beta), len(grid_gamma)))
    started = time.perf_counter()
    for a, beta in enumerate(grid_beta):
        for b, gamma in enumerate(grid_gamma):
            params = QaoaParams(beta=[beta], gamma=[gamma])
            surface[a, b] = run(SOFT, problem, params, model, select=False).expectation
    logger.info("Swept %dx%d angle grid in %.2fs", len(grid_beta), len(grid_gamma),
                time.perf_counter() - started)
    return surface


def sweep_frame(grid_beta: Sequence[float], grid_gamma: Sequence[float], surface: np.ndarray) -> pd.DataFrame:
    beta, gamma = np.meshgrid(np.asarray(grid_beta), np.asarray(grid_gamma), indexing="ij")
    return pd.DataFrame({
        "beta": beta.ravel(), "gamma": gamma.ravel(), "expectation": surface.ravel(),
    }, columns=SWEEP_COLUMNS)


# ---------------------------------------------------------------------------
# Single-period campaign

@dataclass
class SinglePeriodReport:
    curves: pd.DataFrame
    feasibility: pd.DataFrame
    mean_distributions: Dict[tuple, np.ndarray] = field(default_factory=dict)


def _curve_rows(domain: str, algorithm: str, p: int, sorted_costs: np.ndarray,
                cumulative: np.ndarray) -> pd.DataFrame:
    # one step per distinct cost level
    levels, last = np.unique(sorted_costs[::-1], return_index=True)
    cumulative = cumulative[::-1][last]
    return pd.DataFrame({
        "domain": domain, "algorithm": algorithm, "p": p,
        "cost": levels, "cumulative_probability": cumulative,
    }, columns=CURVE_COLUMNS)


def _weighted_curve(costs: np.ndarray, weights: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    keep = weights > 1e-15
    return cumulative_distribution(costs[keep], weights[keep])


def _seed_for(*parts: int) -> int:
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


def run_single_period_campaign(problem: PortfolioProblem, p_list: Sequence[int], n_seeds: int,
                               seed: int = 0, max_evaluations: Optional[int] = None,
                               simplex_tolerance: float = 1e-4, workers: int = 1) -> SinglePeriodReport:
    """Per variant and depth: optimize each seed, average final distributions, build curves.

    All curves are evaluated with C_soft (equal to C_hard on feasible states);
    the feasible-domain curves renormalise each distribution over its feasible mass.
    """
    if n_seeds < 1:
        raise ValueError(f"n_seeds must be >= 1, got {n_seeds}")
    soft_model = build_soft(problem)
    hard_model = build_hard(problem)
    feasible = feasible_mask(problem.n_assets, problem.net_lots)
    costs = soft_model.energies

    frames = []
    for restrict, domain in ((False, "all"), (True, "feasible")):
        frames.append(_curve_rows(domain, BRUTE, 0, *baseline_cumulative(soft_model, restrict, problem)))

    feasibility_rows = []
    distributions = {}
    for variant_index, (variant, model) in enumerate(((SOFT, soft_model), (HARD, hard_model))):
        for p in p_list:
            config = OptimizerConfig(
                bounds=qaoa_bounds(p), max_evaluations=max_evaluations,
                simplex_tolerance=simplex_tolerance, n_starts=n_seeds,
                seed=_seed_for(seed, variant_index, p), workers=workers,
            )
            outcome = solve(variant, problem, p, config, model)
            runs = [run(variant, problem, QaoaParams.from_vector(start.best_angles), model, select=False)
                    for start in outcome.search.starts]
            mean = np.mean([r.distribution for r in runs], axis=0)
            distributions[(variant, p)] = mean
            for k, r in enumerate(runs):
                feasibility_rows.append({
                    "algorithm": variant, "p": p, "seed": k,
                    "expectation": r.expectation,
                    "feasible_probability": r.feasible_probability(feasible),
                    "band_occupancy": _format_bands(band_occupancy(r.distribution, problem.n_assets, problem.net_lots)),
                })
            frames.append(_curve_rows("all", variant, p, *_weighted_curve(costs, mean)))
            frames.append(_curve_rows("feasible", variant, p, *_weighted_curve(costs[feasible], mean[feasible])))
            mass = float(mean[feasible].sum())
            logger.info("%s p=%d: mean feasible probability %.3f over %d seeds", variant, p, mass, n_seeds)
            if variant == SOFT and not 0.33 <= mass <= 0.66:
                logger.info("Soft feasibility %.3f lies outside the 33%%-66%% range seen for annualised data", mass)

    curves = pd.concat(frames, ignore_index=True)
    feasibility = pd.DataFrame(feasibility_rows, columns=FEASIBILITY_COLUMNS)
    return SinglePeriodReport(curves, feasibility, distributions)


# ---------------------------------------------------------------------------
# Rebalancing campaign

@dataclass(frozen=True)
class Period:
    label: str
    mu: np.ndarray
    sigma: np.ndarray


@dataclass
class RebalanceScenario:
    periods: List[Period]
    net_lots: int = 4
    trading_cost: float = 0.015
    lambda_grid: Sequence[float] = DEFAULT_LAMBDA_GRID
    penalty: Optional[float] = None  # None: per-instance automatic scaling
    p_values: Sequence[int] = (4,)
    n_seeds: int = 20
    algorithms: Sequence[str] = ALGORITHMS
    seed: int = 0
    max_evaluations: Optional[int] = None
    simplex_tolerance: float = 1e-4
    workers: int = 1

    def __post_init__(self):
        if not self.periods:
            raise ValueError("scenario needs at least one period")
        for algorithm in self.algorithms:
            if algorithm not in ALGORITHMS:
                raise ValueError(f"algorithm must be one of {ALGORITHMS}, got {algorithm!r}")
        if self.n_seeds < 1:
            raise ValueError(f"n_seeds must be >= 1, got {self.n_seeds}")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "periods": [p.label for p in self.periods],
            "D": self.net_lots, "T": self.trading_cost,
            "lambda_grid": [float(v) for v in self.lambda_grid],
            "A": self.penalty, "p_values": [int(p) for p in self.p_values],
            "n_seeds": self.n_seeds, "algorithms": list(self.algorithms),
            "seed": self.seed, "max_evaluations": self.max_evaluations,
            "simplex_tolerance": self.simplex_tolerance,
        }


def scenario_periods(dataset: ReturnsDataset, months: Optional[int] = 6,
                     annualized: bool = True) -> List[Period]:
    """Per-month mean/covariance, annualised by default."""
    periods = []
    for window in monthly_windows(dataset, months):
        mu, sigma = derive_statistics(dataset, window.rows)
        if annualized:
            mu, sigma = annualize(mu, sigma)
        periods.append(Period(window.label, mu, sigma))
    return periods


@dataclass
class PeriodResult:
    period: int
    label: str
    lam: float
    algorithm: str
    p: int
    z: np.ndarray
    feasible: bool
    trade_count: int
    expected_return: float
    trading_cost: float
    adjusted_return: float
    risk: float
    expectation: Optional[float] = None
    feasible_probability: Optional[float] = None
    band_occupancy: List[float] = field(default_factory=list)
    seed_values: List[float] = field(default_factory=list)

    @property
    def trade_cap(self) -> int:
        return FIRST_MONTH_TRADE_CAP if self.period == 0 else MONTHLY_TRADE_CAP

    def to_record(self) -> Dict[str, Any]:
        seeds = np.array(self.seed_values) if self.seed_values else None
        return {
            "lambda": self.lam,
            "algorithm": self.algorithm,
            "p": self.p,
            "period": self.period,
            "label": self.label,
            "z": " ".join(f"{int(v):+d}" for v in self.z),
            "feasible": self.feasible,
            "trade_count": self.trade_count,
            "expected_return": self.expected_return,
            "trading_cost": self.trading_cost,
            "adjusted_return": self.adjusted_return,
            "risk": self.risk,
            "expectation": self.expectation,
            "feasible_probability": self.feasible_probability,
            "band_occupancy": _format_bands(self.band_occupancy),
            "seed_best_mean": None if seeds is None else float(seeds.mean()),
            "seed_best_min": None if seeds is None else float(seeds.min()),
            "seed_best_std": None if seeds is None else float(seeds.std()),
            "exceeds_trade_cap": self.trade_count > self.trade_cap,
        }


@dataclass
class RebalanceReport:
    periods: List[PeriodResult]
    summary: pd.DataFrame

    def period_records(self) -> List[Dict[str, Any]]:
        return [r.to_record() for r in self.periods]

    def summary_records(self) -> List[Dict[str, Any]]:
        return self.summary.to_dict(orient="records")


def _format_bands(bands) -> str:
    return ";".join(repr(float(v)) for v in bands)


def _solve_cell(problem: PortfolioProblem, algorithm: str, p: int, scenario: RebalanceScenario,
                cell_seed: int) -> dict:
    """Optimize one (period, lambda, algorithm, p) cell; cached by signature."""
    signature = _signature({
        "problem": problem.to_dict(), "algorithm": algorithm, "p": p,
        "n_seeds": scenario.n_seeds, "seed": cell_seed,
        "max_evaluations": scenario.max_evaluations,
        "simplex_tolerance": scenario.simplex_tolerance,
    })
    if cache_enabled():
        cached = _load_cached(signature)
        if cached is not None:
            logger.info("Cache hit for %s p=%d", algorithm, p)
            return cached

    config = OptimizerConfig(
        bounds=qaoa_bounds(p), max_evaluations=scenario.max_evaluations,
        simplex_tolerance=scenario.simplex_tolerance, n_starts=scenario.n_seeds,
        seed=cell_seed,
    )
    outcome = solve(algorithm, problem, p, config)
    result = outcome.run
    selected = result.selected_bits
    feasible = selected is not None
    if not feasible:
        selected = most_probable(result)
        logger.warning("%s p=%d found no feasible state; keeping most probable state %d",
                       algorithm, p, selected)
    mask = feasible_mask(problem.n_assets, problem.net_lots)
    payload = {
        "selected": int(selected),
        "feasible": feasible,
        "expectation": float(result.expectation),
        "feasible_probability": result.feasible_probability(mask),
        "band_occupancy": [float(v) for v in band_occupancy(result.distribution, problem.n_assets, problem.net_lots)],
        "seed_values": [float(v) for v in outcome.search.values],
    }
    if cache_enabled():
        _save_cached(signature, payload)
    return payload


def _trajectory(scenario: RebalanceScenario, lam_index: int, lam: float, algorithm: str, p: int) -> List[PeriodResult]:
    """One lambda/algorithm path through every period, carrying positions forward."""
    n_assets = scenario.periods[0].mu.shape[0]
    previous = np.zeros(n_assets, dtype=np.int8)  # zero initial holdings
    results = []
    for t, period in enumerate(scenario.periods):
        problem = PortfolioProblem(
            mu=period.mu, sigma=period.sigma, net_lots=scenario.net_lots, lam=lam,
            trading_cost=scenario.trading_cost, previous=previous, penalty=scenario.penalty,
        )
        if algorithm == BRUTE:
            selected = best_feasible(build_hard(problem), problem)
            z = decode_index(selected, n_assets)
            one_hot = np.zeros(1 << (2 * n_assets))
            one_hot[selected] = 1.0
            bands = band_occupancy(one_hot, n_assets, scenario.net_lots)
            cell = {"feasible": True, "expectation": None, "feasible_probability": None,
                    "band_occupancy": bands.tolist(), "seed_values": []}
        else:
            if algorithm == SOFT and problem.penalty is None:
                problem = problem.replace(penalty=auto_penalty(problem))
            cell = _solve_cell(problem, algorithm, p, scenario,
                               _seed_for(scenario.seed, lam_index, ALGORITHMS.index(algorithm), p, t))
            selected = cell["selected"]
            z = decode_index(selected, n_assets)

        m = metrics(z, problem)
        results.append(PeriodResult(
            period=t, label=period.label, lam=float(lam), algorithm=algorithm, p=p, z=z,
            feasible=bool(cell["feasible"]), trade_count=m.trade_count,
            expected_return=m.expected_return, trading_cost=m.trading_cost,
            adjusted_return=m.adjusted_return, risk=m.risk,
            expectation=cell["expectation"], feasible_probability=cell["feasible_probability"],
            band_occupancy=list(cell["band_occupancy"]), seed_values=list(cell["seed_values"]),
        ))
        if m.trade_count > results[-1].trade_cap:
            logger.warning("%s lambda=%.2f %s: %d trades exceeds the %d-trade bound",
                           algorithm, lam, period.label, m.trade_count, results[-1].trade_cap)
        previous = z
    return results


def _summarize(results: List[PeriodResult]) -> pd.DataFrame:
    rows = []
    groups: Dict[tuple, List[PeriodResult]] = {}
    for r in results:
        groups.setdefault((r.lam, r.algorithm, r.p), []).append(r)
    brute_totals = {
        lam: sum(r.adjusted_return for r in rs)
        for (lam, algorithm, _), rs in groups.items() if algorithm == BRUTE
    }
    for (lam, algorithm, p), rs in groups.items():
        total_trades = sum(r.trade_count for r in rs)
        total_return = sum(r.adjusted_return for r in rs)
        brute = brute_totals.get(lam)
        gap = None
        if brute is not None and algorithm != BRUTE and brute != 0:
            gap = (brute - total_return) / abs(brute)
        if total_trades > TOTAL_TRADE_CAP:
            logger.warning("%s lambda=%.2f: %d total trades exceeds %d", algorithm, lam, total_trades, TOTAL_TRADE_CAP)
        rows.append({
            "lambda": lam, "algorithm": algorithm, "p": p,
            "total_trades": total_trades,
            "total_adjusted_return": total_return,
            "mean_risk": float(np.mean([r.risk for r in rs])),
            "months_over_trade_cap": sum(r.trade_count > r.trade_cap for r in rs),
            "exceeds_total_cap": total_trades > TOTAL_TRADE_CAP,
            "brute_gap": gap,
        })
    return pd.DataFrame(rows, columns=SUMMARY_COLUMNS)


def run_rebalance_campaign(scenario: RebalanceScenario) -> RebalanceReport:
    """Every lambda x algorithm (x depth) trajectory; output order is fixed by the scenario."""
    jobs = []
    for lam_index, lam in enumerate(scenario.lambda_grid):
        for algorithm in scenario.algorithms:
            depths = [0] if algorithm == BRUTE else list(scenario.p_values)
            for p in depths:
                jobs.append((lam_index, float(lam), algorithm, p))

    started = time.perf_counter()
    if scenario.workers > 1:
        with ThreadPoolExecutor(max_workers=scenario.workers) as pool:
            trajectories = list(pool.map(lambda job: _trajectory(scenario, *job), jobs))
    else:
        trajectories = [_trajectory(scenario, *job) for job in jobs]
    results = [r for trajectory in trajectories for r in trajectory]
    logger.info("Rebalanced %d trajectories over %d periods in %.2fs",
                len(jobs), len(scenario.periods), time.perf_counter() - started)
    return RebalanceReport(results, _summarize(results))


# ---------------------------------------------------------------------------
# Persistence

def emit_results(records: Sequence[Dict[str, Any]], path, fmt: str = "csv",
                 columns: Optional[Sequence[str]] = None) -> Path:
    """Write records with a fixed column order; identical inputs give identical bytes."""
    path = Path(path)
    if columns is None:
        if not records:
            raise ValueError("columns are required to write an empty result set")
        columns = list(records[0].keys())
    columns = list(columns)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        if fmt == "csv":
            pd.DataFrame(list(records), columns=columns).to_csv(path, index=False, lineterminator="\n")
        elif fmt == "json":
            rows = [{c: _jsonable(r.get(c)) for c in columns} for r in records]
            path.write_text(json.dumps({"columns": columns, "records": rows}, indent=2) + "\n")
        else:
            raise ValueError(f"format must be 'csv' or 'json', got {fmt!r}")
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc}") from exc
    logger.info("Wrote %d record(s) to %s", len(records), path)
    return path


def read_results(path) -> List[Dict[str, Any]]:
    """Load a JSON results document written by emit_results."""
    payload = json.loads(Path(path).read_text())
    columns = payload["columns"]
    return [{c: row.get(c) for c in columns} for row in payload["records"]]


def _jsonable(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, float) and not np.isfinite(value):
        return None
    if isinstance(value, float) and pd.isna(value):
        return None
    return value


def frame_records(frame: pd.DataFrame) -> List[Dict[str, Any]]:
    return [{k: _jsonable(v) for k, v in row.items()} for row in frame.to_dict(orient="records")]


def write_manifest(out_dir, command: str, config: Dict[str, Any], seed: int) -> Path:
    """Run manifest: command, configuration, master seed and software versions."""
    versions = {"python": platform.python_version()}
    for package in ("qaoa-rebalance", "numpy", "scipy", "pandas"):
        try:
            versions[package] = metadata.version(package)
        except metadata.PackageNotFoundError:
            versions[package] = None
    manifest = {"command": command, "seed": seed, "config": config, "versions": versions}
    path = Path(out_dir) / "manifest.json"
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(manifest, indent=2, default=_jsonable) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write manifest to {path}: {exc}") from exc
    return path

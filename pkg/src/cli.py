"""Command-line interface for qaoa-rebalance.

Runs the experiment campaigns (`frontier`, `sweep`, `single`, `rebalance`)
and a few inspection helpers (`census`, `bands`, `generate`) from a shell.
The returns CSV comes from --data or the QAOA_REBALANCE_DATA environment
variable; without one, the bundled reference statistics (or a seeded
synthetic year, for `rebalance`) stand in.
"""

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from harness import (
    ALGORITHMS,
    CURVE_COLUMNS,
    DEFAULT_LAMBDA_GRID,
    FEASIBILITY_COLUMNS,
    PERIOD_COLUMNS,
    SUMMARY_COLUMNS,
    SWEEP_COLUMNS,
    RebalanceScenario,
    emit_results,
    frame_records,
    run_rebalance_campaign,
    run_single_period_campaign,
    scenario_periods,
    sweep_beta_gamma,
    sweep_frame,
    write_manifest,
)
from oracle import auto_penalty, census, efficient_frontier
from portfolio import PortfolioProblem, annualize
from qaoa import parity_bands
from returns import (
    DEFAULT_ASSETS,
    derive_statistics,
    ingest_returns,
    reference_statistics,
    resolve_data_path,
    synthetic_returns,
    write_returns_csv,
)

logger = logging.getLogger(__name__)

MAX_GRID = 201


def _float_list(text):
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("list must not be empty")
    return values


def _int_list(text):
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("list must not be empty")
    return values


def _penalty(text):
    """`auto` (None) or a positive real."""
    if text.lower() == "auto":
        return None
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"--a must be a positive number or 'auto', got {text!r}") from None
    if not value > 0:
        raise argparse.ArgumentTypeError(f"--a must be positive, got {value}")
    return value


def _assets(args):
    if args.assets:
        return [s.strip() for s in args.assets.split(",") if s.strip()]
    return list(DEFAULT_ASSETS)


def _load_dataset(args):
    path = resolve_data_path(args.data)
    if path is None:
        return None
    return ingest_returns(path, _assets(args))


def _statistics(args, daily=False):
    """Full-window mean/covariance, annualised unless ``daily``."""
    dataset = _load_dataset(args)
    if dataset is None:
        logger.warning("No returns CSV configured; using reference statistics with diagonal covariance")
        mu, sigma = reference_statistics(_assets(args))
    else:
        mu, sigma = derive_statistics(dataset)
    return (mu, sigma) if daily else annualize(mu, sigma)


def _problem(args, mu, sigma, lam, trading_cost, penalty_text):
    problem = PortfolioProblem(mu=mu, sigma=sigma, net_lots=args.d, lam=lam, trading_cost=trading_cost)
    penalty = _penalty(penalty_text)
    return problem.replace(penalty=penalty if penalty is not None else auto_penalty(problem))


def _out(args, name):
    return Path(args.out) / f"{name}.{args.format}"


def _emit(args, name, records, columns):
    path = emit_results(records, _out(args, name), args.format, columns)
    print(f"Wrote {path}")
    return path


def cmd_frontier(args):
    mu, sigma = _statistics(args, daily=args.daily)
    problem = PortfolioProblem(mu=mu, sigma=sigma, net_lots=args.d, lam=0.5)
    frontier = efficient_frontier(problem, args.lambda_grid)
    points = [
        {"lambda": pt.lam, "z": " ".join(f"{v:+d}" for v in pt.z),
         "expected_return": pt.expected_return, "risk": pt.risk}
        for pt in frontier.points
    ]
    cloud = [{"expected_return": float(r), "risk": float(s)}
             for r, s in zip(frontier.cloud_returns, frontier.cloud_risks)]
    _emit(args, "frontier", points, ["lambda", "z", "expected_return", "risk"])
    _emit(args, "frontier_cloud", cloud, ["expected_return", "risk"])
    write_manifest(args.out, "frontier", {
        "assets": _assets(args), "D": args.d, "lambda_grid": args.lambda_grid, "daily": args.daily,
    }, args.seed)
    print(f"{len(points)} distinct frontier portfolio(s) over {len(cloud)} feasible positions")


def cmd_sweep(args):
    mu, sigma = _statistics(args, daily=args.daily)
    problem = _problem(args, mu, sigma, args.lam, args.t, args.a)
    grid_beta = np.linspace(0.0, np.pi, args.grid)
    grid_gamma = np.linspace(0.0, 2.0 * np.pi, args.grid)
    surface = sweep_beta_gamma(problem, grid_beta, grid_gamma)
    frame = sweep_frame(grid_beta, grid_gamma, surface)
    _emit(args, "sweep", frame_records(frame), SWEEP_COLUMNS)
    write_manifest(args.out, "sweep", {
        "assets": _assets(args), "D": args.d, "lambda": args.lam, "T": args.t,
        "A": problem.penalty, "grid": args.grid, "daily": args.daily,
    }, args.seed)
    print(f"Expectation range [{surface.min():.6g}, {surface.max():.6g}] "
          f"(dynamic range {surface.max() - surface.min():.6g})")


def cmd_single(args):
    mu, sigma = _statistics(args, daily=args.daily)
    problem = _problem(args, mu, sigma, args.lam, args.t, args.a)
    report = run_single_period_campaign(
        problem, args.p, args.seeds, seed=args.seed, max_evaluations=args.max_evaluations,
        simplex_tolerance=args.tolerance, workers=args.workers,
    )
    _emit(args, "curves", frame_records(report.curves), CURVE_COLUMNS)
    _emit(args, "feasibility", frame_records(report.feasibility), FEASIBILITY_COLUMNS)
    write_manifest(args.out, "single", {
        "problem": problem.to_dict(), "p": args.p, "seeds": args.seeds,
        "max_evaluations": args.max_evaluations, "tolerance": args.tolerance,
    }, args.seed)


def cmd_rebalance(args):
    dataset = _load_dataset(args)
    if dataset is None:
        logger.warning("No returns CSV configured; using a synthetic year seeded by --seed %d", args.seed)
        dataset = synthetic_returns(_assets(args), seed=args.seed)
    periods = scenario_periods(dataset, args.months, annualized=not args.daily)
    if not periods:
        print("No calendar month has enough trading days to rebalance.", file=sys.stderr)
        return 1
    scenario = RebalanceScenario(
        periods=periods, net_lots=args.d, trading_cost=args.t,
        lambda_grid=args.lambda_grid, penalty=_penalty(args.a),
        p_values=args.p, n_seeds=args.seeds,
        algorithms=args.algorithm or list(ALGORITHMS), seed=args.seed,
        max_evaluations=args.max_evaluations, simplex_tolerance=args.tolerance,
        workers=args.workers,
    )
    report = run_rebalance_campaign(scenario)
    _emit(args, "periods", report.period_records(), PERIOD_COLUMNS)
    _emit(args, "summary", frame_records(report.summary), SUMMARY_COLUMNS)
    write_manifest(args.out, "rebalance", {
        "assets": _assets(args), "daily": args.daily, **scenario.to_dict(),
    }, args.seed)


def cmd_census(args):
    n_assets = args.n if args.n is not None else len(_assets(args))
    result = census(n_assets, args.d)
    if args.format == "json":
        print(json.dumps(result, indent=2))
        return
    print(f"N={n_assets} D={args.d}: {result['feasible']} of {result['states']} states feasible "
          f"({100 * result['fraction']:.2f}%), closed form {result['closed_form']}")


def cmd_bands(args):
    n_assets = args.n if args.n is not None else len(_assets(args))
    rows = parity_bands(n_assets, args.d)
    if args.format == "json":
        print(json.dumps(rows, indent=2))
        return
    print(f"{'band':>4}  {'long':>4}  {'short':>5}  probability")
    for row in rows:
        print(f"{row['band']:>4}  {row['long']:>4}  {row['short']:>5}  {100 * row['probability']:.2f}%")


def cmd_generate(args):
    dataset = synthetic_returns(_assets(args), year=args.year, seed=args.seed)
    path = Path(args.path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        write_returns_csv(dataset, path)
    except OSError as exc:
        print(f"Cannot write {path}: {exc}", file=sys.stderr)
        return 1
    print(f"Wrote {len(dataset)} trading days x {len(dataset.symbols)} symbols to {path}")


def _add_solver_options(parser, default_seeds):
    parser.add_argument("--p", type=_int_list, default=[4], help="QAOA depths, comma-separated (default 4).")
    parser.add_argument("--seeds", type=int, default=default_seeds,
                        help=f"Random starts per optimization (default {default_seeds}).")
    parser.add_argument("--max-evaluations", type=int, default=None,
                        help="Objective evaluations per start (default 500 per layer).")
    parser.add_argument("--tolerance", type=float, default=1e-4,
                        help="Simplex-size stopping tolerance (default 1e-4).")
    parser.add_argument("--workers", type=int, default=1, help="Thread pool size (default 1).")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="qaoa-rebalance",
        description="Simulate soft- and hard-constraint QAOA for discrete portfolio rebalancing.",
    )
    parser.add_argument("--data", help="Returns CSV (default: QAOA_REBALANCE_DATA).")
    parser.add_argument("--assets", help="Comma-separated symbols (default: the 8-asset subset).")
    parser.add_argument("--d", type=int, default=4, help="Net lots D = sum z (default 4).")
    parser.add_argument("--out", default="results", help="Output directory (default ./results).")
    parser.add_argument("--format", choices=("csv", "json"), default="csv", help="Result file format.")
    parser.add_argument("--seed", type=int, default=0, help="Master seed (default 0).")
    parser.add_argument("-v", "--verbose", action="store_true", help="Show progress logging.")

    sub = parser.add_subparsers(dest="command", required=True)

    p_frontier = sub.add_parser("frontier", help="Exhaustive efficient frontier over feasible positions.")
    p_frontier.add_argument("--lambda-grid", type=_float_list, default=list(DEFAULT_LAMBDA_GRID),
                            help="Risk weights, comma-separated (default 0.0,0.1,...,1.0).")
    p_frontier.add_argument("--daily", action="store_true", help="Use daily instead of annualised statistics.")
    p_frontier.set_defaults(func=cmd_frontier)

    p_sweep = sub.add_parser("sweep", help="Expectation surface of a p=1 soft circuit over (beta, gamma).")
    p_sweep.add_argument("--lambda", dest="lam", type=float, default=0.5, help="Risk weight (default 0.5).")
    p_sweep.add_argument("--t", type=float, default=0.0, help="Trading cost T (default 0).")
    p_sweep.add_argument("--a", default="auto", help="Penalty A, or 'auto' (default).")
    p_sweep.add_argument("--grid", type=int, default=33, help="Points per angle axis (default 33).")
    p_sweep.add_argument("--daily", action="store_true", help="Use daily instead of annualised statistics.")
    p_sweep.set_defaults(func=cmd_sweep)

    p_single = sub.add_parser("single", help="Single-period campaign: cumulative cost curves per variant and depth.")
    p_single.add_argument("--lambda", dest="lam", type=float, default=0.5, help="Risk weight (default 0.5).")
    p_single.add_argument("--t", type=float, default=0.0, help="Trading cost T (default 0).")
    p_single.add_argument("--a", default="auto", help="Penalty A, or 'auto' (default).")
    p_single.add_argument("--daily", action="store_true", help="Use daily instead of annualised statistics.")
    _add_solver_options(p_single, default_seeds=20)
    p_single.set_defaults(func=cmd_single)

    p_rebalance = sub.add_parser("rebalance", help="Monthly rebalancing across a lambda sweep.")
    p_rebalance.add_argument("--lambda-grid", type=_float_list, default=list(DEFAULT_LAMBDA_GRID),
                             help="Risk weights, comma-separated (default 0.0,0.1,...,1.0).")
    p_rebalance.add_argument("--t", type=float, default=0.015, help="Trading cost T (default 0.015).")
    p_rebalance.add_argument("--a", default="2.5",
                             help="Penalty A, or 'auto' to rescale for each period (default 2.5).")
    p_rebalance.add_argument("--algorithm", action="append", choices=ALGORITHMS,
                             help="Algorithm tag; repeat for several (default all).")
    p_rebalance.add_argument("--months", type=int, default=6, help="Months to rebalance over (default 6).")
    p_rebalance.add_argument("--daily", action="store_true", help="Use daily instead of annualised statistics.")
    _add_solver_options(p_rebalance, default_seeds=20)
    p_rebalance.set_defaults(func=cmd_rebalance)

    p_census = sub.add_parser("census", help="Count feasible encoded states.")
    p_census.add_argument("--n", type=int, help="Number of assets (default: number of --assets).")
    p_census.set_defaults(func=cmd_census)

    p_bands = sub.add_parser("bands", help="Parity bands of the hard-constraint initial state.")
    p_bands.add_argument("--n", type=int, help="Number of assets (default: number of --assets).")
    p_bands.set_defaults(func=cmd_bands)

    p_generate = sub.add_parser("generate", help="Write a seeded synthetic returns CSV.")
    p_generate.add_argument("path", help="Destination CSV.")
    p_generate.add_argument("--year", type=int, default=2017, help="Business-day calendar year (default 2017).")
    p_generate.set_defaults(func=cmd_generate)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)

    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(message)s",
    )

    penalty = getattr(args, "a", None)
    if penalty is not None:
        try:
            _penalty(penalty)
        except argparse.ArgumentTypeError as exc:
            parser.error(str(exc))
    grid = getattr(args, "grid", None)
    if grid is not None and not 2 <= grid <= MAX_GRID:
        parser.error(f"--grid must be between 2 and {MAX_GRID}")
    seeds = getattr(args, "seeds", None)
    if seeds is not None and seeds < 1:
        parser.error("--seeds must be at least 1")
    workers = getattr(args, "workers", None)
    if workers is not None and workers < 1:
        parser.error("--workers must be at least 1")
    months = getattr(args, "months", None)
    if months is not None and months < 1:
        parser.error("--months must be at least 1")
    if any(p < 1 for p in getattr(args, "p", None) or []):
        parser.error("--p depths must be at least 1")

    try:
        rc = args.func(args)
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return rc if isinstance(rc, int) else 0


if __name__ == "__main__":
    sys.exit(main())

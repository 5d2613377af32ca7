"""MCP server for QAOA portfolio rebalancing."""

import asyncio
import json
import logging
import math
import sys
from typing import Any, Optional

from mcp.server import Server
from mcp.server.models import InitializationOptions
from mcp.server.stdio import stdio_server
from mcp.types import ServerCapabilities, Tool, TextContent, ToolsCapability

from harness import DEFAULT_LAMBDA_GRID
from optimizer import OptimizerConfig, qaoa_bounds
from oracle import auto_penalty, census, efficient_frontier, feasible_mask
from portfolio import PortfolioProblem, annualize, decode_index, metrics
from qaoa import VARIANTS, band_occupancy, parity_bands, solve
from returns import DEFAULT_ASSETS, derive_statistics, ingest_returns, reference_statistics, resolve_data_path

logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

# Returns loaded at startup, if a CSV was configured
returns_dataset = None
MAX_SEEDS = 50
MAX_DEPTH = 8

SERVER_INSTRUCTIONS = (
    "Simulate QAOA on a discrete long/short portfolio problem and compare it with "
    "exhaustive classical search.\n\n"
    "Which tool to use:\n"
    "- feasibility_census: how many encoded states satisfy sum z = D for N assets.\n"
    "- parity_bands: the bands the hard-constraint start state spreads over, with "
    "their initial probabilities.\n"
    "- efficient_frontier: exact feasible Markowitz optima across a lambda grid.\n"
    "- solve_portfolio: optimise soft- or hard-constraint QAOA angles for one "
    "instance and return the selected positions.\n\n"
    "Instances take either explicit mu/sigma or a list of asset symbols; symbols are "
    "looked up in the loaded returns CSV, else in the bundled reference statistics "
    "(diagonal covariance). Statistics are annualised unless daily=true."
)


def load_returns(argv: Optional[list[str]] = None):
    """Load the returns CSV named on the command line or in QAOA_REBALANCE_DATA."""
    global returns_dataset
    args = [arg for arg in (sys.argv[1:] if argv is None else argv) if arg]
    path = resolve_data_path(args[0] if args else None)
    if path is None:
        logger.info("No returns CSV configured; reference statistics only")
        returns_dataset = None
        return None
    returns_dataset = ingest_returns(path)
    logger.info("Loaded %s trading days x %s symbols", len(returns_dataset), len(returns_dataset.symbols))
    return returns_dataset


def _instance_schema(extra: dict) -> dict:
    properties = {
        "assets": {
            "type": "array",
            "items": {"type": "string"},
            "description": "Asset symbols (default AMP,ANZ,BHP,BXB,CBA,CSL,IAG,MQG)",
        },
        "mu": {"type": "array", "items": {"type": "number"}, "description": "Expected returns per asset"},
        "sigma": {
            "type": "array",
            "items": {"type": "array", "items": {"type": "number"}},
            "description": "Covariance matrix (N x N)",
        },
        "daily": {"type": "boolean", "description": "Use daily rather than annualised statistics"},
        "net_lots": {"type": "integer", "description": "Net lots D = sum z (default 4)"},
    }
    properties.update(extra)
    return {"type": "object", "properties": properties}


def get_tools() -> list[Tool]:
    """Define available MCP tools."""
    size = {
        "n_assets": {"type": "integer", "description": "Number of assets N"},
        "net_lots": {"type": "integer", "description": "Net lots D"},
    }
    return [
        Tool(
            name="feasibility_census",
            description="Count the encoded states with sum z = D, with a closed-form cross-check",
            inputSchema={"type": "object", "properties": size, "required": ["n_assets", "net_lots"]},
        ),
        Tool(
            name="parity_bands",
            description=(
                "List the N - D + 1 parity bands of the hard-constraint start state: "
                "long count, short count and initial probability of each"
            ),
            inputSchema={"type": "object", "properties": size, "required": ["n_assets", "net_lots"]},
        ),
        Tool(
            name="efficient_frontier",
            description="Exhaustive feasible Markowitz optimum for each lambda in a grid",
            inputSchema=_instance_schema({
                "lambda_grid": {
                    "type": "array",
                    "items": {"type": "number"},
                    "description": "Risk weights in [0, 1] (default 0.0, 0.1, ..., 1.0)",
                },
            }),
        ),
        Tool(
            name="solve_portfolio",
            description=(
                "Optimise QAOA angles with multi-start Nelder-Mead for one instance and "
                "return the selected positions, their metrics and the feasible probability"
            ),
            inputSchema=_instance_schema({
                "variant": {"type": "string", "description": "soft or hard (default hard)"},
                "p": {"type": "integer", "description": "Circuit depth (default 1)"},
                "lam": {"type": "number", "description": "Risk weight lambda in [0, 1] (default 0.5)"},
                "trading_cost": {"type": "number", "description": "Trading cost T (default 0)"},
                "previous": {
                    "type": "array",
                    "items": {"type": "integer"},
                    "description": "Previous holdings y in {-1, 0, 1} (default all zero)",
                },
                "penalty": {"description": "Penalty A for the soft variant, or 'auto' (default)"},
                "seeds": {"type": "integer", "description": f"Random starts (default 4, max {MAX_SEEDS})"},
                "max_evaluations": {"type": "integer", "description": "Evaluations per start"},
                "seed": {"type": "integer", "description": "Master seed (default 0)"},
            }),
        ),
    ]


def _statistics(arguments: dict):
    mu, sigma = arguments.get("mu"), arguments.get("sigma")
    if mu is not None or sigma is not None:
        if mu is None or sigma is None:
            raise ValueError("mu and sigma must be given together")
        return mu, sigma
    assets = arguments.get("assets") or list(DEFAULT_ASSETS)
    if returns_dataset is not None:
        mu, sigma = derive_statistics(returns_dataset.subset(assets))
    else:
        mu, sigma = reference_statistics(assets)
    return (mu, sigma) if arguments.get("daily") else annualize(mu, sigma)


def _check_int(arguments: dict, key: str, default: int, low: int, high: Optional[int] = None) -> int:
    value = arguments.get(key, default)
    if not isinstance(value, int) or isinstance(value, bool) or value < low:
        raise ValueError(f"{key} must be an integer >= {low}")
    if high is not None and value > high:
        raise ValueError(f"{key} must be <= {high}")
    return value


def _solve_portfolio(arguments: dict) -> dict[str, Any]:
    variant = arguments.get("variant", "hard")
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}")
    p = _check_int(arguments, "p", 1, 1, MAX_DEPTH)
    seeds = _check_int(arguments, "seeds", 4, 1, MAX_SEEDS)
    seed = _check_int(arguments, "seed", 0, 0)
    max_evaluations = arguments.get("max_evaluations")
    mu, sigma = _statistics(arguments)
    problem = PortfolioProblem(
        mu=mu, sigma=sigma,
        net_lots=arguments.get("net_lots", 4),
        lam=arguments.get("lam", 0.5),
        trading_cost=arguments.get("trading_cost", 0.0),
        previous=arguments.get("previous"),
    )
    penalty = arguments.get("penalty", "auto")
    if variant == "soft":
        problem = problem.replace(penalty=auto_penalty(problem) if penalty == "auto" else float(penalty))

    config = OptimizerConfig(bounds=qaoa_bounds(p), max_evaluations=max_evaluations, n_starts=seeds, seed=seed)
    outcome = solve(variant, problem, p, config)
    result = outcome.run
    selected = result.selected_bits
    payload: dict[str, Any] = {
        "variant": variant,
        "p": p,
        "penalty": problem.penalty,
        "expectation": result.expectation,
        "feasible_probability": result.feasible_probability(feasible_mask(problem.n_assets, problem.net_lots)),
        "band_occupancy": band_occupancy(result.distribution, problem.n_assets, problem.net_lots).tolist(),
        "beta": outcome.params.beta.tolist(),
        "gamma": outcome.params.gamma.tolist(),
        "seed_values": outcome.search.values.tolist(),
    }
    if selected is None:
        payload["z"] = None
        payload["warning"] = "no feasible state with measurable probability"
        return payload
    z = decode_index(selected, problem.n_assets)
    m = metrics(z, problem)
    payload.update({
        "z": [int(v) for v in z],
        "expected_return": m.expected_return,
        "trading_cost": m.trading_cost,
        "adjusted_return": m.adjusted_return,
        "risk": m.risk,
        "trade_count": m.trade_count,
    })
    return payload


async def handle_call_tool(name: str, arguments: dict) -> str:
    """Handle tool calls."""
    arguments = arguments or {}
    start = asyncio.get_event_loop().time()

    try:
        if name == "feasibility_census":
            n_assets = _check_int(arguments, "n_assets", 8, 1)
            net_lots = arguments.get("net_lots", 4)
            if not isinstance(net_lots, int):
                return json.dumps({"error": "net_lots must be an integer"})
            return json.dumps(census(n_assets, net_lots), indent=2)

        elif name == "parity_bands":
            n_assets = _check_int(arguments, "n_assets", 8, 1)
            net_lots = _check_int(arguments, "net_lots", 4, 0)
            rows = parity_bands(n_assets, net_lots)
            return json.dumps({"K": len(rows), "bands": rows}, indent=2)

        elif name == "efficient_frontier":
            mu, sigma = _statistics(arguments)
            grid = arguments.get("lambda_grid") or list(DEFAULT_LAMBDA_GRID)
            problem = PortfolioProblem(mu=mu, sigma=sigma, net_lots=arguments.get("net_lots", 4), lam=0.5)
            frontier = efficient_frontier(problem, grid)
            points = [
                {"lambda": pt.lam, "z": list(pt.z), "expected_return": pt.expected_return, "risk": pt.risk}
                for pt in frontier.points
            ]
            return json.dumps({"feasible_positions": len(frontier.cloud_returns), "points": points}, indent=2)

        elif name == "solve_portfolio":
            payload = await asyncio.to_thread(_solve_portfolio, arguments)
            return json.dumps(payload, indent=2, default=_finite)

        else:
            return json.dumps({"error": f"Unknown tool: {name}"})

    except Exception as e:
        logger.error("Error handling tool %s: %s", name, e)
        return json.dumps({"error": str(e)})
    finally:
        elapsed_ms = (asyncio.get_event_loop().time() - start) * 1000
        logger.info("Tool call %s completed in %.1fms", name, elapsed_ms)


def _finite(value):
    value = float(value)
    return value if math.isfinite(value) else None


async def main():
    """Start the MCP server."""
    await asyncio.to_thread(load_returns)

    server = Server("qaoa-rebalance", instructions=SERVER_INSTRUCTIONS)

    @server.list_tools()
    async def list_tools() -> list[Tool]:
        return get_tools()

    @server.call_tool()
    async def call_tool(name: str, arguments: dict) -> list[TextContent]:
        result = await handle_call_tool(name, arguments)
        return [TextContent(type="text", text=result)]

    logger.info("qaoa-rebalance MCP server started")
    async with stdio_server() as (read_stream, write_stream):
        await server.run(
            read_stream,
            write_stream,
            InitializationOptions(
                server_name="qaoa-rebalance",
                server_version="0.1.0",
                capabilities=ServerCapabilities(tools=ToolsCapability()),
                instructions=SERVER_INSTRUCTIONS,
            ),
        )


if __name__ == "__main__":
    asyncio.run(main())

import json

import pytest

import main
from returns import synthetic_returns, write_returns_csv


@pytest.fixture(autouse=True)
def _returns_dataset():
    original = main.returns_dataset
    main.returns_dataset = None
    yield
    main.returns_dataset = original


@pytest.mark.anyio
async def test_feasibility_census():
    payload = await main.handle_call_tool("feasibility_census", {"n_assets": 8, "net_lots": 4})
    data = json.loads(payload)
    assert data["feasible"] == 1820
    assert data["states"] == 65536
    assert data["closed_form"] == 1820


@pytest.mark.anyio
async def test_parity_bands():
    data = json.loads(await main.handle_call_tool("parity_bands", {"n_assets": 8, "net_lots": 4}))
    assert data["K"] == 5
    assert [b["probability"] for b in data["bands"]] == [0.0625, 0.25, 0.375, 0.25, 0.0625]


@pytest.mark.anyio
async def test_parity_bands_rejects_negative_lots():
    data = json.loads(await main.handle_call_tool("parity_bands", {"n_assets": 4, "net_lots": -1}))
    assert "net_lots" in data["error"]


@pytest.mark.anyio
async def test_efficient_frontier_explicit_statistics():
    arguments = {
        "mu": [0.3, 0.1, 0.2],
        "sigma": [[0.04, 0.0, 0.0], [0.0, 0.01, 0.0], [0.0, 0.0, 0.09]],
        "net_lots": 1,
        "lambda_grid": [0.0, 1.0],
    }
    data = json.loads(await main.handle_call_tool("efficient_frontier", arguments))
    assert data["points"][0]["z"] == [1, -1, 1]
    assert data["points"][-1]["z"] == [0, 1, 0]
    assert data["feasible_positions"] == 6


@pytest.mark.anyio
async def test_efficient_frontier_from_loaded_returns(tmp_path):
    path = tmp_path / "returns.csv"
    write_returns_csv(synthetic_returns(["AMP", "ANZ", "BHP"], seed=1), path)
    main.load_returns([str(path)])
    data = json.loads(await main.handle_call_tool(
        "efficient_frontier", {"assets": ["AMP", "BHP"], "net_lots": 1, "lambda_grid": [0.5]}))
    assert len(data["points"]) == 1
    assert sum(data["points"][0]["z"]) == 1


@pytest.mark.anyio
async def test_solve_portfolio_hard():
    arguments = {"assets": ["AMP", "ANZ", "BHP"], "net_lots": 1, "variant": "hard",
                 "p": 1, "seeds": 2, "max_evaluations": 20}
    data = json.loads(await main.handle_call_tool("solve_portfolio", arguments))
    assert sum(data["z"]) == 1
    assert data["feasible_probability"] == pytest.approx(1.0)
    assert len(data["beta"]) == len(data["gamma"]) == 1
    assert len(data["seed_values"]) == 2


@pytest.mark.anyio
async def test_solve_portfolio_soft_auto_penalty():
    arguments = {"assets": ["AMP", "ANZ"], "net_lots": 0, "variant": "soft",
                 "p": 1, "seeds": 1, "max_evaluations": 15}
    data = json.loads(await main.handle_call_tool("solve_portfolio", arguments))
    assert data["penalty"] > 0
    assert "error" not in data


@pytest.mark.anyio
@pytest.mark.parametrize("arguments, message", [
    ({"variant": "warm"}, "variant"),
    ({"p": 0}, "p must be"),
    ({"seeds": 1000}, "seeds must be"),
    ({"mu": [0.1, 0.2]}, "together"),
])
async def test_solve_portfolio_rejects(arguments, message):
    data = json.loads(await main.handle_call_tool("solve_portfolio", arguments))
    assert message in data["error"]


@pytest.mark.anyio
async def test_unknown_tool():
    data = json.loads(await main.handle_call_tool("optimize_everything", {}))
    assert data["error"] == "Unknown tool: optimize_everything"


def test_mcp_server_has_orientation_instructions():
    """Server-level instructions must orient an agent to every tool."""
    text = main.SERVER_INSTRUCTIONS
    assert text.strip()
    for tool in main.get_tools():
        assert tool.name in text, f"instructions don't mention {tool.name}"


def test_mcp_and_cli_expose_same_capabilities():
    """Every shared capability must exist on both the MCP and CLI surfaces."""
    import argparse
    import cli

    mcp_tools = {t.name for t in main.get_tools()}
    sub = [a for a in cli.build_parser()._actions
           if isinstance(a, argparse._SubParsersAction)][0]
    cli_cmds = set(sub.choices)

    # capability -> (cli subcommand, mcp tool name)
    capabilities = {
        "census": ("census", "feasibility_census"),
        "bands": ("bands", "parity_bands"),
        "frontier": ("frontier", "efficient_frontier"),
        "solve": ("single", "solve_portfolio"),
    }
    for cap, (cli_name, mcp_name) in capabilities.items():
        assert cli_name in cli_cmds, f"CLI missing capability: {cap}"
        assert mcp_name in mcp_tools, f"MCP missing capability: {cap}"

"""qaoa-rebalance: QAOA portfolio rebalancing simulator and MCP server."""

"""Pytest configuration and fixtures."""

import pytest
from pathlib import Path
import sys

import numpy as np

# Add src to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent / 'src'))


@pytest.fixture(autouse=True)
def _isolated_cache(monkeypatch, tmp_path):
    """Point the solve cache at a per-test directory."""
    monkeypatch.setenv("QAOA_REBALANCE_CACHE_DIR", str(tmp_path / "solves"))
    monkeypatch.delenv("QAOA_REBALANCE_NO_CACHE", raising=False)
    monkeypatch.delenv("QAOA_REBALANCE_DATA", raising=False)


@pytest.fixture
def random_problem():
    """Factory for small random instances with a positive semi-definite covariance."""
    from portfolio import PortfolioProblem

    def make(n_assets=2, net_lots=1, lam=0.5, trading_cost=0.0, penalty=None, seed=0, previous=None):
        rng = np.random.default_rng(seed)
        mu = rng.normal(0.1, 0.2, size=n_assets)
        factor = rng.normal(0.0, 0.3, size=(n_assets, n_assets))
        sigma = factor @ factor.T
        return PortfolioProblem(
            mu=mu, sigma=(sigma + sigma.T) / 2, net_lots=net_lots, lam=lam,
            trading_cost=trading_cost, previous=previous, penalty=penalty,
        )

    return make


@pytest.fixture
def eight_asset_dataset():
    """Seeded synthetic 2017 returns for the default 8 symbols."""
    from returns import synthetic_returns

    return synthetic_returns(seed=7)


@pytest.fixture
def eight_asset_problem(eight_asset_dataset):
    """Annualised full-year instance, D=4, lambda=0.5."""
    from portfolio import PortfolioProblem, annualize
    from returns import derive_statistics

    mu, sigma = annualize(*derive_statistics(eight_asset_dataset))
    return PortfolioProblem(mu=mu, sigma=sigma, net_lots=4, lam=0.5)


@pytest.fixture
def returns_csv(tmp_path):
    """Write a small returns CSV and return its path."""
    def write(text, name="returns.csv"):
        path = tmp_path / name
        path.write_text(text)
        return path

    return write

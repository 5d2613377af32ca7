"""Daily returns ingestion, window statistics and bundled reference data."""

import csv
import io
import logging
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

MIN_MONTH_DAYS = 15
DEFAULT_ASSETS = ("AMP", "ANZ", "BHP", "BXB", "CBA", "CSL", "IAG", "MQG")

# ASX.20 daily returns over the 2017 trading year: symbol -> (average, S.D.)
REFERENCE_DAILY_STATS = {
    "AMP": (0.000401, 0.009988), "QBE": (-0.000316, 0.014433),
    "ANZ": (0.000061, 0.010024), "RIO": (0.001230, 0.014854),
    "BHP": (0.000916, 0.013465), "SCG": (-0.000176, 0.010974),
    "BXB": (-0.000619, 0.015910), "SUN": (0.000396, 0.010007),
    "CBA": (0.000212, 0.009201), "TLS": (-0.000881, 0.013377),
    "CSL": (0.001477, 0.013156), "WBC": (0.000184, 0.009907),
    "IAG": (0.001047, 0.011216), "WES": (0.000492, 0.008399),
    "MQG": (0.000794, 0.010052), "WFD": (0.000291, 0.013247),
    "NAB": (0.000204, 0.009193), "WOW": (0.000674, 0.008477),
    "ORG": (0.001500, 0.014958), "WPL": (0.000491, 0.010873),
}


class IngestionError(ValueError):
    """The returns file cannot be turned into a clean dataset."""


@dataclass
class ReturnsDataset:
    """Daily returns, one row per trading day (ascending), one column per symbol."""
    frame: pd.DataFrame

    @property
    def symbols(self) -> list[str]:
        return [str(c) for c in self.frame.columns]

    @property
    def dates(self) -> pd.DatetimeIndex:
        return pd.DatetimeIndex(self.frame.index)

    @property
    def returns(self) -> np.ndarray:
        return self.frame.to_numpy(dtype=np.float64)

    def __len__(self) -> int:
        return len(self.frame)

    def subset(self, symbols: Sequence[str]) -> "ReturnsDataset":
        missing = [s for s in symbols if s not in self.frame.columns]
        if missing:
            raise IngestionError(f"unknown symbol(s): {', '.join(missing)}")
        return ReturnsDataset(self.frame.loc[:, list(symbols)])


def resolve_data_path(cli_path: Optional[str] = None) -> Optional[Path]:
    """Returns CSV from the CLI flag, falling back to QAOA_REBALANCE_DATA."""
    if cli_path:
        return Path(cli_path).expanduser()
    env_path = os.getenv("QAOA_REBALANCE_DATA")
    if env_path:
        return Path(env_path).expanduser()
    return None


def _read_text(csv_source) -> tuple[str, str]:
    if hasattr(csv_source, "read"):
        return str(getattr(csv_source, "name", "<stream>")), csv_source.read()
    path = Path(csv_source).expanduser()
    try:
        return str(path), path.read_text(encoding="utf-8-sig")
    except UnicodeDecodeError as exc:
        raise IngestionError(f"{path}: not valid UTF-8 (byte {exc.start})") from None
    except OSError as exc:
        raise IngestionError(f"{path}: cannot read: {exc}") from None


def ingest_returns(csv_source, assets: Optional[Sequence[str]] = None) -> ReturnsDataset:
    """Parse ``date,SYM1,SYM2,...`` rows of decimal daily returns.

    ``csv_source`` is a path or a text stream. Ragged rows, missing or
    unparsable values and duplicate dates raise IngestionError naming the
    row and column.
    """
    name, text = _read_text(csv_source)
    lines = [row for row in csv.reader(io.StringIO(text)) if row]
    if not lines:
        raise IngestionError(f"{name}: file is empty")
    header = [cell.strip() for cell in lines[0]]
    if len(header) < 2 or header[0].lower() != "date":
        raise IngestionError(f"{name}: header must be 'date,SYM1,SYM2,...'")
    symbols = header[1:]
    if len(set(symbols)) != len(symbols):
        raise IngestionError(f"{name}: duplicate symbol columns")
    if len(lines) == 1:
        raise IngestionError(f"{name}: no data rows")
    for row, cells in enumerate(lines[1:], start=1):
        if len(cells) != len(header):
            raise IngestionError(
                f"{name}: row {row}: ragged row with {len(cells)} fields, header has {len(header)}"
            )

    raw = pd.DataFrame(lines[1:], columns=header)
    dates = pd.to_datetime(raw["date"].str.strip(), errors="coerce")
    for row, (cell, parsed) in enumerate(zip(raw["date"], dates), start=1):
        if pd.isna(parsed):
            raise IngestionError(f"{name}: row {row}, column date: unparsable date {cell!r}")
    duplicated = dates.duplicated().to_numpy()
    if duplicated.any():
        row = int(np.flatnonzero(duplicated)[0]) + 1
        raise IngestionError(f"{name}: row {row}: duplicate date {dates.iloc[row - 1].date()}")

    values = {}
    for symbol in symbols:
        cells = raw[symbol].str.strip()
        numbers = pd.to_numeric(cells, errors="coerce")
        bad = numbers.isna().to_numpy()
        if bad.any():
            row = int(np.flatnonzero(bad)[0]) + 1
            cell = cells.iloc[row - 1]
            issue = "missing value" if cell == "" else f"unparsable number {cell!r}"
            raise IngestionError(
                f"{name}: row {row} ({dates.iloc[row - 1].date()}), column {symbol}: {issue}"
            )
        values[symbol] = numbers.to_numpy(dtype=np.float64)

    frame = pd.DataFrame(values, index=pd.DatetimeIndex(dates, name="date")).sort_index()
    logger.info("Ingested %d trading days x %d symbols from %s", len(frame), len(symbols), name)
    dataset = ReturnsDataset(frame)
    return dataset.subset(assets) if assets else dataset


def write_returns_csv(dataset: ReturnsDataset, path) -> None:
    frame = dataset.frame.copy()
    frame.index = frame.index.strftime("%Y-%m-%d")
    frame.index.name = "date"
    frame.to_csv(path, float_format="%.10f")


def derive_statistics(dataset: ReturnsDataset, window: Optional[slice] = None) -> tuple[np.ndarray, np.ndarray]:
    """Mean daily return and sample covariance (1/(n-1)) over a window of trading days."""
    frame = dataset.frame if window is None else dataset.frame.iloc[window]
    if len(frame) < 2:
        raise ValueError(f"window must span at least 2 trading days, got {len(frame)}")
    mu = frame.mean(axis=0).to_numpy(dtype=np.float64)
    sigma = frame.cov(ddof=1).to_numpy(dtype=np.float64)
    return mu, (sigma + sigma.T) / 2.0


@dataclass(frozen=True)
class MonthWindow:
    label: str
    rows: slice
    days: int


def monthly_windows(dataset: ReturnsDataset, months: Optional[int] = None,
                    min_days: int = MIN_MONTH_DAYS) -> list[MonthWindow]:
    """Calendar-month row windows in date order; short months are dropped with a warning."""
    periods = dataset.dates.to_period("M")
    windows = []
    start = 0
    for label in periods.unique():
        count = int((periods == label).sum())
        if count < min_days:
            logger.warning("Skipping %s: %d trading days (< %d)", label, count, min_days)
        else:
            windows.append(MonthWindow(str(label), slice(start, start + count), count))
        start += count
    return windows[:months] if months else windows


def reference_statistics(symbols: Sequence[str] = DEFAULT_ASSETS) -> tuple[np.ndarray, np.ndarray]:
    """Published daily mean and S.D. per symbol; covariance is diagonal (sigma_ii = S.D.^2)."""
    unknown = [s for s in symbols if s not in REFERENCE_DAILY_STATS]
    if unknown:
        raise ValueError(f"no reference statistics for: {', '.join(unknown)}")
    mu = np.array([REFERENCE_DAILY_STATS[s][0] for s in symbols])
    sd = np.array([REFERENCE_DAILY_STATS[s][1] for s in symbols])
    return mu, np.diag(sd ** 2)


def synthetic_returns(symbols: Sequence[str] = DEFAULT_ASSETS, year: int = 2017,
                      seed: int = 0, market_weight: float = 0.5) -> ReturnsDataset:
    """Seeded daily returns for one business-day year.

    Means and volatilities follow the reference table; a one-factor market
    model with a per-asset loading drawn from the seed couples the assets.
    """
    mu, sigma = reference_statistics(symbols)
    sd = np.sqrt(np.diag(sigma))
    rng = np.random.default_rng(seed)
    days = pd.bdate_range(f"{year}-01-01", f"{year}-12-31", name="date")
    loading = rng.uniform(0.0, market_weight, size=len(symbols)) ** 0.5
    market = rng.standard_normal(len(days))[:, None]
    noise = rng.standard_normal((len(days), len(symbols)))
    shocks = loading * market + np.sqrt(1.0 - loading ** 2) * noise
    frame = pd.DataFrame(mu + shocks * sd, index=days, columns=list(symbols))
    return ReturnsDataset(frame)

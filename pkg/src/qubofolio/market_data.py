"""Price ingestion, capital-unit block normalization, and rolling covariance estimation.

All functions here are pure: they take immutable inputs and return new
objects, so they are safe to call concurrently.
"""
from __future__ import annotations

import csv
import datetime as dt
import warnings
from dataclasses import dataclass

import numpy as np

__all__ = [
    "MarketDataError",
    "PriceTable",
    "BlockPrices",
    "CovarianceSeries",
    "load_prices",
    "normalize_blocks",
    "estimate_covariance",
    "psd_repair",
]


class MarketDataError(ValueError):
    """Raised on malformed price files or insufficient history."""


@dataclass(frozen=True)
class PriceTable:
    """Aligned close prices: one row per ticker, one column per trading date."""

    tickers: list[str]
    dates: list[dt.date]
    close: np.ndarray  # shape (n_tickers, n_dates), strictly positive

    def __post_init__(self):
        close = np.asarray(self.close, dtype=float)
        object.__setattr__(self, "close", close)
        if close.shape != (len(self.tickers), len(self.dates)):
            raise MarketDataError(
                f"close matrix shape {close.shape} does not match "
                f"{len(self.tickers)} tickers x {len(self.dates)} dates"
            )
        if close.size and not np.all(close > 0):
            raise MarketDataError("all close prices must be strictly positive")
        if any(a >= b for a, b in zip(self.dates, self.dates[1:])):
            raise MarketDataError("dates must be strictly increasing")

    @property
    def n_assets(self) -> int:
        return len(self.tickers)

    def date_index(self, date: dt.date) -> int:
        try:
            return self.dates.index(date)
        except ValueError:
            raise MarketDataError(f"date {date} not in table") from None


@dataclass(frozen=True)
class BlockPrices:
    """Per-asset block values in currency, T+1 time columns, p[:, 0] == u."""

    p: np.ndarray  # shape (n_assets, T + 1)
    u: float

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        object.__setattr__(self, "p", p)
        if self.u <= 0:
            raise MarketDataError("capital unit u must be positive")
        if p.ndim != 2 or p.shape[1] < 2:
            raise MarketDataError("block prices need at least 2 time columns")

    @property
    def horizon(self) -> int:
        return self.p.shape[1] - 1


@dataclass(frozen=True)
class CovarianceSeries:
    """One return-covariance matrix per investment period."""

    sigma: np.ndarray  # shape (T, n, n)

    def __post_init__(self):
        sigma = np.asarray(self.sigma, dtype=float)
        object.__setattr__(self, "sigma", sigma)
        if sigma.ndim != 3 or sigma.shape[1] != sigma.shape[2]:
            raise MarketDataError("sigma must be a stack of square matrices")
        asym = np.abs(sigma - sigma.transpose(0, 2, 1)).max(initial=0.0)
        if asym > 1e-12:
            raise MarketDataError(f"covariance matrices not symmetric (max dev {asym:.2e})")


def _parse_date(text: str) -> dt.date:
    return dt.date.fromisoformat(text)


def load_prices(
    path,
    tickers: list[str] | None = None,
    start: dt.date | None = None,
    end: dt.date | None = None,
) -> PriceTable:
    """Read a ``date,ticker,close`` CSV into an aligned PriceTable.

    Tickers that do not cover every date in the range are dropped with a
    warning rather than imputed.  An explicitly requested ticker missing
    more than 10% of the dates is an error.
    """
    by_ticker: dict[str, dict[dt.date, float]] = {}
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise MarketDataError(f"cannot open price file {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [c.strip().lower() for c in header] != ["date", "ticker", "close"]:
            raise MarketDataError(f"{path}: expected header 'date,ticker,close', got {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            try:
                date = _parse_date(row[0].strip())
                ticker = row[1].strip()
                close = float(row[2])
            except (IndexError, ValueError) as exc:
                raise MarketDataError(f"{path}:{lineno}: unparseable row {row!r}: {exc}") from exc
            if close <= 0:
                raise MarketDataError(f"{path}:{lineno}: non-positive close {close}")
            if start is not None and date < start:
                continue
            if end is not None and date > end:
                continue
            if tickers is not None and ticker not in tickers:
                continue
            by_ticker.setdefault(ticker, {})[date] = close

    if tickers is not None:
        missing = [t for t in tickers if t not in by_ticker]
        if missing:
            raise MarketDataError(f"requested tickers absent from file: {missing}")

    all_dates = sorted({d for series in by_ticker.values() for d in series})
    if not all_dates:
        raise MarketDataError(f"{path}: no rows in requested range")

    kept: list[str] = []
    dropped: list[str] = []
    for ticker in sorted(by_ticker):
        series = by_ticker[ticker]
        frac_missing = 1.0 - len(series) / len(all_dates)
        if frac_missing > 0.10 and tickers is not None and ticker in tickers:
            raise MarketDataError(
                f"ticker {ticker} missing {frac_missing:.0%} of dates in range; "
                "rejected rather than imputed"
            )
        if len(series) == len(all_dates):
            kept.append(ticker)
        else:
            dropped.append(ticker)
    if dropped:
        warnings.warn(f"dropped tickers with missing dates: {dropped}", stacklevel=2)
    if not kept:
        raise MarketDataError("no ticker covers all dates in range")

    close = np.array([[by_ticker[t][d] for d in all_dates] for t in kept])
    return PriceTable(tickers=kept, dates=all_dates, close=close)


def normalize_blocks(
    table: PriceTable, u: float, start: dt.date, horizon: int, raw_prices: bool = False
) -> BlockPrices:
    """Convert raw closes into block values worth ``u`` currency at period 1.

    Period t maps to trading date ``start + (t-1)``; T+1 columns are taken
    so the profit term at step T has its forward price.  With
    ``raw_prices`` the normalization is bypassed and closes pass through.
    """
    if u <= 0:
        raise MarketDataError("capital unit u must be positive")
    if horizon < 1:
        raise MarketDataError("horizon must be at least 1")
    idx = table.date_index(start)
    if idx + horizon >= len(table.dates):
        raise MarketDataError(
            f"need {horizon + 1} trading dates from {start}, have {len(table.dates) - idx}"
        )
    window = table.close[:, idx : idx + horizon + 1]
    if raw_prices:
        return BlockPrices(p=window.copy(), u=u)
    p = u * window / window[:, :1]
    return BlockPrices(p=p, u=u)


def psd_repair(mat: np.ndarray) -> np.ndarray:
    """Clip negative eigenvalues at zero; returns a symmetric PSD matrix."""
    sym = 0.5 * (mat + mat.T)
    vals, vecs = np.linalg.eigh(sym)
    if vals.min(initial=0.0) >= 0.0:
        return sym
    repaired = (vecs * np.clip(vals, 0.0, None)) @ vecs.T
    return 0.5 * (repaired + repaired.T)


def estimate_covariance(table: PriceTable, window: int, horizon: int) -> CovarianceSeries:
    """Trailing-window sample covariance of daily simple returns, one matrix per period.

    Periods are anchored at the end of the table: period t sits at date
    index ``len(dates) - (horizon + 1) + (t - 1)`` so the final date is the
    forward-price date of the last period.  The covariance at period t is
    estimated from the ``window`` daily returns ending at that date.
    """
    if window < 2:
        raise MarketDataError("covariance window must be at least 2 days")
    m = len(table.dates)
    if m < window + horizon + 1:
        raise MarketDataError(
            f"need at least {window + horizon + 1} dates for window={window}, "
            f"horizon={horizon}; have {m}"
        )
    returns = table.close[:, 1:] / table.close[:, :-1] - 1.0  # column d = return into date d+1
    sigma = []
    for t in range(1, horizon + 1):
        date_idx = m - (horizon + 1) + (t - 1)
        # returns ending at date_idx occupy return columns [date_idx - window, date_idx)
        chunk = returns[:, date_idx - window : date_idx]
        cov = np.cov(chunk, ddof=1) if table.n_assets > 1 else np.atleast_2d(np.var(chunk, ddof=1))
        cov = np.atleast_2d(cov)
        sigma.append(psd_repair(cov))
    return CovarianceSeries(sigma=np.array(sigma))

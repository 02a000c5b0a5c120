"""Instance generators: quantum-sized toy portfolios, full-scale synthetic
instances, random QUBOs for solver benchmarking, and a price CSV writer.
"""
from __future__ import annotations

import csv
import datetime as dt

import numpy as np

from .market_data import BlockPrices, CovarianceSeries, psd_repair
from .model import ASSET_SLACK, CASH_SLACK, FrictionParams, ProblemSpec, encode_slack
from .qubo import BlockQubo, SparseQubo

__all__ = [
    "toy_spec",
    "synthetic_spec",
    "random_sparse_qubo",
    "cash_only_bits",
    "write_price_csv",
]


def cash_only_bits(spec: ProblemSpec) -> np.ndarray:
    """The all-cash assignment: no trades, slack bits absorb both budgets."""
    lay = spec.layout
    bits = np.zeros(lay.total, dtype=np.int8)
    for t in range(1, lay.T + 1):
        for b in range(lay.nb):
            if (spec.B >> b) & 1:
                bits[encode_slack(lay, t, ASSET_SLACK, b)] = 1
        for c in range(lay.nc):
            if (spec.C >> c) & 1:
                bits[encode_slack(lay, t, CASH_SLACK, c)] = 1
    return bits


def toy_spec(
    n: int = 2,
    T: int = 2,
    k: int = 1,
    B: int = 1,
    C: int = 1,
    q: float = 1e-5,
    seed: int = 0,
    u: float = 100_000.0,
    signed_risk: bool = True,
) -> ProblemSpec:
    """A quantum-simulator-sized instance (n <= 3, T <= 2, k = 1).

    Price drift is kept near +/-0.5% per period and daily variance near
    1e-4, so q at the 1e-2 scale makes all-cash optimal while small q
    rewards trading.
    """
    if not (1 <= n <= 3 and 1 <= T <= 2 and k == 1):
        raise ValueError("toy instances require n <= 3, T <= 2, k = 1")
    rng = np.random.default_rng(seed)
    # per-period simple returns in [-0.5%, +0.5%]
    rets = rng.uniform(-0.005, 0.005, size=(n, T))
    p = u * np.cumprod(np.hstack([np.ones((n, 1)), 1.0 + rets]), axis=1)
    prices = BlockPrices(p=p, u=u)

    sigma = []
    for _ in range(T):
        A = rng.standard_normal((n, n))
        raw = A @ A.T
        # rescale so the average variance sits near the 1e-4 daily scale
        cov = raw * (1e-4 * n / max(np.trace(raw), 1e-12)) + 1e-4 * np.eye(n)
        sigma.append(psd_repair(cov))
    covs = CovarianceSeries(sigma=np.array(sigma))

    params = FrictionParams(q=q, delta=0.001, rho_c=0.0001, rho_s=0.000025, u=u)
    return ProblemSpec(n=n, T=T, k=k, B=B, C=C, params=params,
                       prices=prices, covariances=covs, signed_risk=signed_risk)


def synthetic_spec(
    n: int,
    T: int,
    k: int = 3,
    B: int = 60,
    C: int = 10,
    q: float = 1e-4,
    seed: int = 0,
    u: float = 100_000.0,
) -> ProblemSpec:
    """Full-scale instance on synthetic geometric-random-walk prices.

    Covariances are diagonal-dominant random PSD matrices at realistic
    daily-return magnitudes; generation is O(T n^2) so experiment-sized
    builds (n in the hundreds) stay fast.
    """
    rng = np.random.default_rng(seed)
    rets = rng.normal(loc=0.0002, scale=0.01, size=(n, T))
    p = u * np.cumprod(np.hstack([np.ones((n, 1)), 1.0 + rets]), axis=1)
    prices = BlockPrices(p=p, u=u)

    sigma = np.empty((T, n, n))
    base = rng.normal(scale=1.0, size=(n, n))
    corr_seed = base @ base.T
    d = np.sqrt(np.diagonal(corr_seed))
    corr = corr_seed / np.outer(d, d)
    vols = rng.uniform(0.005, 0.02, size=n)
    cov0 = corr * np.outer(vols, vols)
    for t in range(T):
        jitter = 1.0 + 0.05 * rng.standard_normal()
        sigma[t] = cov0 * max(jitter, 0.5)
    covs = CovarianceSeries(sigma=sigma)

    params = FrictionParams(q=q, delta=0.001, rho_c=0.0001, rho_s=0.000025, u=u)
    return ProblemSpec(n=n, T=T, k=k, B=B, C=C, params=params,
                       prices=prices, covariances=covs)


def random_sparse_qubo(num_vars: int, seed: int = 0, density: float = 0.5,
                       scale: float = 1.0) -> SparseQubo:
    """Random upper-triangular QUBO for solver and conversion tests."""
    rng = np.random.default_rng(seed)
    rows, cols, vals = [], [], []
    for i in range(num_vars):
        for j in range(i, num_vars):
            if i == j or rng.random() < density:
                rows.append(i)
                cols.append(j)
                vals.append(float(rng.normal(scale=scale)))
    return SparseQubo(
        num_vars=num_vars,
        rows=np.array(rows), cols=np.array(cols), vals=np.array(vals),
        offset=float(rng.normal(scale=scale)),
    )


def write_price_csv(path, tickers: list[str], dates: list[dt.date],
                    close: np.ndarray) -> None:
    """Write a ``date,ticker,close`` CSV in the ingestion format."""
    close = np.asarray(close, dtype=float)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["date", "ticker", "close"])
        for di, date in enumerate(dates):
            for ti, ticker in enumerate(tickers):
                writer.writerow([date.isoformat(), ticker, repr(float(close[ti, di]))])

"""CSV ingestion, block normalization, and rolling covariance estimation."""
import datetime as dt

import numpy as np
import pytest

from qubofolio.market_data import (
    BlockPrices,
    CovarianceSeries,
    MarketDataError,
    PriceTable,
    estimate_covariance,
    load_prices,
    normalize_blocks,
    psd_repair,
)
from qubofolio.toy import write_price_csv


def _dates(count, start=dt.date(2020, 1, 1)):
    return [start + dt.timedelta(days=i) for i in range(count)]


@pytest.fixture
def price_csv(tmp_path):
    dates = _dates(8)
    close = np.array([
        [100.0, 101.0, 99.5, 102.0, 103.0, 101.5, 104.0, 105.0],
        [50.0, 50.5, 51.0, 49.0, 48.5, 50.0, 51.5, 52.0],
    ])
    path = tmp_path / "prices.csv"
    write_price_csv(path, ["AAA", "BBB"], dates, close)
    return path, dates, close


def test_load_prices_happy_path(price_csv):
    path, dates, close = price_csv
    table = load_prices(path)
    assert table.tickers == ["AAA", "BBB"]
    assert table.dates == dates
    assert np.allclose(table.close, close)


def test_load_prices_date_filter(price_csv):
    path, dates, close = price_csv
    table = load_prices(path, start=dates[2], end=dates[5])
    assert table.dates == dates[2:6]
    assert np.allclose(table.close, close[:, 2:6])


def test_load_prices_rejects_bad_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("time,symbol,price\n2020-01-01,A,1.0\n")
    with pytest.raises(MarketDataError, match="header"):
        load_prices(path)


def test_load_prices_reports_bad_row_with_line_number(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("date,ticker,close\n2020-01-01,A,1.0\n2020-01-02,A,oops\n")
    with pytest.raises(MarketDataError, match=":3"):
        load_prices(path)


def test_load_prices_rejects_nonpositive_close(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("date,ticker,close\n2020-01-01,A,-3.0\n")
    with pytest.raises(MarketDataError, match="non-positive"):
        load_prices(path)


def test_load_prices_drops_incomplete_ticker_with_warning(tmp_path):
    path = tmp_path / "gappy.csv"
    rows = ["date,ticker,close"]
    for i, date in enumerate(_dates(5)):
        rows.append(f"{date},FULL,{100 + i}")
        if i != 2:
            rows.append(f"{date},GAPPY,{50 + i}")
    path.write_text("\n".join(rows) + "\n")
    with pytest.warns(UserWarning, match="GAPPY"):
        table = load_prices(path)
    assert table.tickers == ["FULL"]


def test_load_prices_requested_ticker_too_sparse_is_error(tmp_path):
    path = tmp_path / "sparse.csv"
    rows = ["date,ticker,close"]
    for i, date in enumerate(_dates(10)):
        rows.append(f"{date},FULL,{100 + i}")
        if i < 5:
            rows.append(f"{date},HALF,{50 + i}")
    path.write_text("\n".join(rows) + "\n")
    with pytest.raises(MarketDataError, match="HALF"):
        load_prices(path, tickers=["FULL", "HALF"])


def test_load_prices_missing_requested_ticker(price_csv):
    path, _, _ = price_csv
    with pytest.raises(MarketDataError, match="absent"):
        load_prices(path, tickers=["AAA", "ZZZ"])


def test_price_table_validates_dates_and_shape():
    with pytest.raises(MarketDataError):
        PriceTable(tickers=["A"], dates=_dates(2), close=np.ones((1, 3)))
    dates = _dates(2)
    with pytest.raises(MarketDataError):
        PriceTable(tickers=["A"], dates=[dates[1], dates[0]], close=np.ones((1, 2)))


def test_normalize_blocks_scales_first_column_to_u(price_csv):
    path, dates, close = price_csv
    table = load_prices(path)
    blocks = normalize_blocks(table, u=100_000.0, start=dates[1], horizon=3)
    assert blocks.p.shape == (2, 4)
    assert np.allclose(blocks.p[:, 0], 100_000.0)
    # relative moves preserved: p[a, t] / p[a, 0] == close ratio
    assert np.allclose(blocks.p / blocks.p[:, :1], close[:, 1:5] / close[:, 1:2])


def test_normalize_blocks_raw_passthrough(price_csv):
    path, dates, close = price_csv
    table = load_prices(path)
    blocks = normalize_blocks(table, u=1.0, start=dates[0], horizon=2, raw_prices=True)
    assert np.allclose(blocks.p, close[:, :3])


def test_normalize_blocks_requires_enough_dates(price_csv):
    path, dates, _ = price_csv
    table = load_prices(path)
    with pytest.raises(MarketDataError, match="trading dates"):
        normalize_blocks(table, u=1.0, start=dates[6], horizon=3)


def test_psd_repair_clips_negative_eigenvalues():
    mat = np.array([[1.0, 2.0], [2.0, 1.0]])  # eigenvalues 3 and -1
    fixed = psd_repair(mat)
    vals = np.linalg.eigvalsh(fixed)
    assert vals.min() >= -1e-12
    assert np.allclose(fixed, fixed.T)


def test_psd_repair_leaves_psd_input_alone():
    mat = np.array([[2.0, 0.5], [0.5, 1.0]])
    assert np.allclose(psd_repair(mat), mat)


def test_estimate_covariance_single_asset_matches_manual_window(tmp_path):
    rng = np.random.default_rng(0)
    m = 12
    close = 100.0 * np.cumprod(1 + rng.normal(0, 0.01, size=(1, m)), axis=1)
    path = tmp_path / "one.csv"
    write_price_csv(path, ["ONE"], _dates(m), close)
    table = load_prices(path)
    window, horizon = 5, 3
    series = estimate_covariance(table, window=window, horizon=horizon)
    assert series.sigma.shape == (horizon, 1, 1)
    returns = close[0, 1:] / close[0, :-1] - 1.0
    for t in range(1, horizon + 1):
        # period t anchored so the final date is the last period's forward price
        date_idx = m - (horizon + 1) + (t - 1)
        chunk = returns[date_idx - window : date_idx]
        assert series.sigma[t - 1, 0, 0] == pytest.approx(np.var(chunk, ddof=1))


def test_estimate_covariance_matrices_are_symmetric_psd(tmp_path):
    rng = np.random.default_rng(1)
    m, n = 40, 4
    close = 50.0 * np.cumprod(1 + rng.normal(0, 0.02, size=(n, m)), axis=1)
    path = tmp_path / "multi.csv"
    write_price_csv(path, [f"T{i}" for i in range(n)], _dates(m), close)
    series = estimate_covariance(load_prices(path), window=20, horizon=5)
    for sigma in series.sigma:
        assert np.allclose(sigma, sigma.T)
        assert np.linalg.eigvalsh(sigma).min() >= -1e-12


def test_estimate_covariance_requires_enough_history(tmp_path):
    close = np.linspace(100, 110, 6)[None, :]
    path = tmp_path / "short.csv"
    write_price_csv(path, ["A"], _dates(6), close)
    table = load_prices(path)
    with pytest.raises(MarketDataError, match="at least"):
        estimate_covariance(table, window=5, horizon=3)


def test_covariance_series_rejects_asymmetry():
    sigma = np.zeros((1, 2, 2))
    sigma[0, 0, 1] = 1.0
    with pytest.raises(MarketDataError, match="symmetric"):
        CovarianceSeries(sigma=sigma)


def test_block_prices_validation():
    with pytest.raises(MarketDataError):
        BlockPrices(p=np.ones((2, 1)), u=1.0)
    with pytest.raises(MarketDataError):
        BlockPrices(p=np.ones((2, 3)), u=0.0)

import pathlib

import numpy as np
import pandas as pd

from escare_cli.forecasting import ForecastRecord
from escare_cli.forecasting import write_forecasts
from escare_cli.market_data import IntradayBars
from escare_cli.market_data import ReturnSeries


def make_bars(
    closes: list[float],
    opens: list[float] | None = None,
    highs: list[float] | None = None,
    lows: list[float] | None = None,
    bar_interval: int = 5,
    date: str = "2024-01-02",
) -> IntradayBars:
    closes = np.array(closes, dtype=np.float64)
    opens = closes if opens is None else np.array(opens, dtype=np.float64)
    highs = np.maximum(opens, closes) if highs is None else np.array(highs, dtype=np.float64)
    lows = np.minimum(opens, closes) if lows is None else np.array(lows, dtype=np.float64)
    start = np.datetime64(f"{date}T09:30", "m")
    return IntradayBars(
        date=np.datetime64(date, "D").astype(object),
        timestamps=start + np.arange(len(closes)) * np.timedelta64(bar_interval, "m"),
        open=opens,
        high=highs,
        low=lows,
        close=closes,
        bar_interval=bar_interval,
    )


def write_model_forecasts(
    path: pathlib.Path,
    series: ReturnSeries,
    model: str,
    scale: float = 1.0,
    start: int = 200,
    alpha: float = 0.01,
) -> pathlib.Path:
    """Forecast file whose VaR reacts to the previous absolute return, ES = 1.15 VaR"""
    records = []
    for index in range(start, len(series)):
        var = scale * (-2.0 - 0.3 * abs(series.returns[index - 1]))
        records.append(
            ForecastRecord(
                date=series.dates[index],
                model=model,
                alpha=alpha,
                var=var,
                es=1.15 * var,
                tau=0.0015,
            )
        )
    file_path = path / f"{model}.csv"
    write_forecasts(records, file_path)
    return file_path


def write_intraday(
    path: pathlib.Path, days: int = 3, bars: int = 79, seed: int = 0
) -> pathlib.Path:
    """Five-minute OHLC bars of a random walk, one CSV holding every day"""
    rng = np.random.default_rng(seed)
    rows = []
    price = 100.0
    for offset in range(days):
        date = np.datetime64("2024-01-02") + np.timedelta64(offset, "D")
        start = np.datetime64(f"{date}T09:30", "m")
        for bar in range(bars):
            open_ = price
            price = open_ * np.exp(rng.normal(0.0, 0.001))
            rows.append(
                dict(
                    date=str(date),
                    timestamp=str(start + np.timedelta64(5 * bar, "m")).replace("T", " "),
                    open=open_,
                    high=max(open_, price) * 1.0005,
                    low=min(open_, price) * 0.9995,
                    close=price,
                )
            )
    file_path = path / "intraday.csv"
    pd.DataFrame(rows).to_csv(file_path, index=False)
    return file_path

import logging

import numpy as np

from .config import MeasureConfig
from .config import MeasureKind
from .config import ScalingProxy
from .errors import DataValidationError
from .market_data import IntradayBars
from .market_data import ReturnMode

logger = logging.getLogger(__name__)

PARKINSON_CONSTANT = 1.0 / (4.0 * np.log(2.0))


def _grid_ratio(base: int, interval: int) -> int:
    if interval < base or interval % base != 0:
        raise DataValidationError(
            f"Incompatible grids: {interval}-minute interval over {base}-minute bars"
        )
    return interval // base


def realized_variance(day: IntradayBars, interval: int, offset: int = 0) -> float:
    """Sum of squared percent log returns between closes sampled every interval minutes"""
    step = _grid_ratio(day.bar_interval, interval)
    sampled = day.close[offset::step]
    if len(sampled) < 2:
        raise DataValidationError(
            f"Insufficient bars on {day.date} for {interval}-minute realized variance"
        )
    returns = 100.0 * np.diff(np.log(sampled))
    return float(np.sum(returns * returns))


def realized_range(day: IntradayBars, interval: int, offset: int = 0) -> float:
    """Parkinson scaled sum of squared percent log high-low ranges per interval"""
    step = _grid_ratio(day.bar_interval, interval)
    count = (len(day) - offset) // step
    if count < 1:
        raise DataValidationError(
            f"Insufficient bars on {day.date} for {interval}-minute realized range"
        )
    stop = offset + count * step
    highs = day.high[offset:stop].reshape(count, step).max(axis=1)
    lows = day.low[offset:stop].reshape(count, step).min(axis=1)
    ranges = 100.0 * np.log(highs / lows)
    return float(PARKINSON_CONSTANT * np.sum(ranges * ranges))


def subsample_measure(
    day: IntradayBars,
    target_interval: int,
    offsets: int,
    use_range: bool = False,
) -> float:
    """Average of the plain measure over grids shifted by 0..offsets-1 base bars"""
    ratio = _grid_ratio(day.bar_interval, target_interval)
    if not 1 <= offsets <= ratio:
        raise DataValidationError(
            f"Offsets must be in [1, {ratio}] for {target_interval}-minute grids over "
            f"{day.bar_interval}-minute bars, got {offsets}"
        )
    measure = realized_range if use_range else realized_variance
    values = [measure(day, target_interval, offset=offset) for offset in range(offsets)]
    if len(values) == 1:
        return values[0]
    return float(np.mean(values))


def scale_measure(raw: np.ndarray, daily_proxy: np.ndarray, q: int) -> np.ndarray:
    """Rescale raw by the ratio of trailing q-day sums of the proxy and the raw measure.

    The first q days have no full history and come back as NaN.
    """
    raw = np.asarray(raw, dtype=np.float64)
    daily_proxy = np.asarray(daily_proxy, dtype=np.float64)
    if raw.shape != daily_proxy.shape or raw.ndim != 1:
        raise DataValidationError("Raw measure and daily proxy are not aligned")
    if q < 1:
        raise DataValidationError(f"Scaling lookback must be at least 1, got {q}")
    if len(raw) <= q:
        raise DataValidationError(
            f"Fewer than {q} prior days available for every day of a {len(raw)}-day series"
        )
    windows = np.lib.stride_tricks.sliding_window_view
    # sums over days t-q..t-1 for t = q..n-1
    proxy_sums = windows(daily_proxy, q)[:-1].sum(axis=1)
    raw_sums = windows(raw, q)[:-1].sum(axis=1)
    if np.any(raw_sums == 0.0):
        raise DataValidationError("Zero denominator in measure scaling")
    scaled = np.full_like(raw, np.nan)
    scaled[q:] = raw[q:] * proxy_sums / raw_sums
    return scaled


def daily_returns(
    days: list[IntradayBars], mode: ReturnMode = ReturnMode.CLOSE_TO_CLOSE
) -> np.ndarray:
    """Percent log return of each day, the first day has no prior close and starts from its open"""
    opens = np.array([day.open[0] for day in days])
    closes = np.array([day.close[-1] for day in days])
    previous = opens.copy()
    if mode == ReturnMode.CLOSE_TO_CLOSE:
        previous[1:] = closes[:-1]
    return 100.0 * np.log(closes / previous)


def daily_range_proxy(day: IntradayBars, parkinson: bool = True) -> float:
    value = 100.0 * np.log(day.high.max() / day.low.min())
    value = value * value
    if parkinson:
        value *= PARKINSON_CONSTANT
    return float(value)


def _raw_measure(day: IntradayBars, config: MeasureConfig, offsets: int) -> float:
    kind = config.kind
    if kind.is_subsampled:
        return subsample_measure(
            day, config.interval_minutes, offsets, use_range=kind.is_range
        )
    elif kind.is_range:
        return realized_range(day, config.interval_minutes)
    return realized_variance(day, config.interval_minutes)


def compute_daily_measures(
    days: list[IntradayBars], config: MeasureConfig
) -> tuple[np.ndarray, np.ndarray]:
    """One measure value per day, NaN on days where it cannot be formed"""
    if not days:
        raise DataValidationError("No intraday days to compute measures from")
    base = config.base_minutes or days[0].bar_interval
    for day in days:
        if day.bar_interval != base:
            raise DataValidationError(
                f"Bars on {day.date} are {day.bar_interval}-minute, expected {base}-minute"
            )
    ratio = _grid_ratio(base, config.interval_minutes)
    offsets = config.subsample_offsets or ratio

    dates = np.array([day.date for day in days], dtype="datetime64[D]")
    raw = np.full(len(days), np.nan)
    for index, day in enumerate(days):
        try:
            raw[index] = _raw_measure(day, config, offsets)
        except DataValidationError as exc:
            logger.warning("Measure absent on %s: %s", day.date, exc)
    if not config.kind.is_scaled:
        return dates, raw

    if config.kind.is_range:
        proxy = np.array(
            [
                daily_range_proxy(
                    day, parkinson=config.scaling_proxy == ScalingProxy.PARKINSON
                )
                for day in days
            ]
        )
    else:
        proxy = daily_returns(days, config.return_mode) ** 2
    return dates, scale_measure(raw, proxy, config.scaling_lookback)

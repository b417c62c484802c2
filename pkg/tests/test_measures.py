import numpy as np
import pytest

from .helper import make_bars
from escare_cli.config import MeasureConfig
from escare_cli.config import MeasureKind
from escare_cli.errors import DataValidationError
from escare_cli.market_data import ReturnMode
from escare_cli.measures import compute_daily_measures
from escare_cli.measures import daily_range_proxy
from escare_cli.measures import daily_returns
from escare_cli.measures import PARKINSON_CONSTANT
from escare_cli.measures import realized_range
from escare_cli.measures import realized_variance
from escare_cli.measures import scale_measure
from escare_cli.measures import subsample_measure


def test_realized_variance_constant_prices():
    day = make_bars([100.0] * 10)
    assert realized_variance(day, 5) == 0.0


def test_realized_variance_sum_of_squares():
    closes = [100.0, 100.0 * np.exp(0.01), 100.0 * np.exp(-0.01)]
    day = make_bars(closes)
    assert realized_variance(day, 5) == pytest.approx(1.0 + 4.0)


def test_realized_variance_coarser_grid():
    closes = 100.0 * np.exp(np.array([0.0, 0.005, 0.01, 0.0, -0.01]))
    day = make_bars(list(closes), bar_interval=1)
    # closes at bars 0, 2 and 4
    assert realized_variance(day, 2) == pytest.approx(1.0 + 4.0)


def test_realized_variance_single_bar():
    with pytest.raises(DataValidationError, match="Insufficient bars"):
        realized_variance(make_bars([100.0]), 5)


def test_realized_range_zero():
    day = make_bars([100.0, 101.0, 102.0], opens=[100.0, 101.0, 102.0])
    assert realized_range(day, 5) == 0.0


def test_realized_range_single_interval():
    day = make_bars([100.0], highs=[100.0 * np.exp(0.01)], lows=[100.0])
    assert realized_range(day, 5) == pytest.approx(0.36067, abs=1e-5)


def test_realized_range_merges_bars():
    day = make_bars(
        [100.0, 100.0],
        highs=[101.0, 102.0],
        lows=[99.0, 100.0],
        bar_interval=1,
    )
    expected = PARKINSON_CONSTANT * (100.0 * np.log(102.0 / 99.0)) ** 2
    assert realized_range(day, 2) == pytest.approx(expected)


@pytest.mark.parametrize("use_range", [False, True])
def test_subsample_single_offset(use_range: bool):
    rng = np.random.default_rng(3)
    closes = list(100.0 * np.exp(np.cumsum(rng.normal(0, 0.001, size=30))))
    day = make_bars(closes, bar_interval=1)
    plain = realized_range(day, 5) if use_range else realized_variance(day, 5)
    assert subsample_measure(day, 5, 1, use_range=use_range) == plain


def test_subsample_constant_prices():
    day = make_bars([100.0] * 20, bar_interval=1)
    assert subsample_measure(day, 5, 5) == 0.0
    assert subsample_measure(day, 5, 5, use_range=True) == 0.0


def test_subsample_linear_path():
    closes = [100.0 + index for index in range(9)]
    day = make_bars(closes, bar_interval=1)
    log_closes = 100.0 * np.log(np.array(closes))
    grid0 = np.sum(np.diff(log_closes[0::2]) ** 2)
    grid1 = np.sum(np.diff(log_closes[1::2]) ** 2)
    assert subsample_measure(day, 2, 2) == pytest.approx((grid0 + grid1) / 2)


@pytest.mark.parametrize(
    "interval, offsets, bar_interval",
    [
        (5, 6, 1),
        (5, 0, 1),
        (3, 1, 2),
        (1, 1, 5),
    ],
)
def test_subsample_incompatible(interval: int, offsets: int, bar_interval: int):
    day = make_bars([100.0] * 20, bar_interval=bar_interval)
    with pytest.raises(DataValidationError):
        subsample_measure(day, interval, offsets)


def test_scale_identity():
    raw = np.linspace(1.0, 2.0, 10)
    scaled = scale_measure(raw, raw, 3)
    assert np.all(np.isnan(scaled[:3]))
    np.testing.assert_allclose(scaled[3:], raw[3:])


def test_scale_constant_ratio():
    raw = np.linspace(1.0, 2.0, 10)
    scaled = scale_measure(raw, 2.0 * raw, 4)
    np.testing.assert_allclose(scaled[4:], 2.0 * raw[4:])


def test_scale_trailing_sums():
    raw = np.array([1.0, 2.0, 3.0, 4.0])
    proxy = np.array([2.0, 2.0, 5.0, 1.0])
    scaled = scale_measure(raw, proxy, 2)
    np.testing.assert_allclose(scaled[2:], [3.0 * 4.0 / 3.0, 4.0 * 7.0 / 5.0])


@pytest.mark.parametrize(
    "raw, q, message",
    [
        (np.ones(5), 5, "Fewer than 5 prior days"),
        (np.array([0.0, 0.0, 1.0]), 2, "Zero denominator"),
        (np.ones(5), 0, "at least 1"),
    ],
)
def test_scale_errors(raw: np.ndarray, q: int, message: str):
    with pytest.raises(DataValidationError, match=message):
        scale_measure(raw, np.ones_like(raw), q)


def test_daily_range_proxy():
    day = make_bars([100.0, 100.0], highs=[102.0, 101.0], lows=[99.0, 98.0])
    raw = (100.0 * np.log(102.0 / 98.0)) ** 2
    assert daily_range_proxy(day, parkinson=False) == pytest.approx(raw)
    assert daily_range_proxy(day) == pytest.approx(raw * PARKINSON_CONSTANT)


@pytest.mark.parametrize("kind", list(MeasureKind))
def test_compute_daily_measures(kind: MeasureKind):
    rng = np.random.default_rng(5)
    days = []
    for index in range(8):
        closes = 100.0 * np.exp(np.cumsum(rng.normal(0, 0.002, size=20)))
        days.append(
            make_bars(
                list(closes),
                highs=list(closes * 1.001),
                lows=list(closes * 0.999),
                bar_interval=1,
                date=f"2024-01-{index + 2:02d}",
            )
        )
    config = MeasureConfig(kind=kind, interval_minutes=5, scaling_lookback=3)
    dates, values = compute_daily_measures(days, config)
    assert len(dates) == len(values) == 8
    if kind.is_scaled:
        assert np.all(np.isnan(values[:3]))
        assert np.all(values[3:] > 0)
    else:
        assert np.all(values > 0)


def test_compute_daily_measures_mixed_bars():
    days = [
        make_bars([100.0, 101.0], bar_interval=1, date="2024-01-02"),
        make_bars([100.0, 101.0], bar_interval=5, date="2024-01-03"),
    ]
    with pytest.raises(DataValidationError, match="expected 1-minute"):
        compute_daily_measures(days, MeasureConfig(kind=MeasureKind.RV))


def test_daily_returns():
    days = [
        make_bars([100.0, 101.0], date="2024-01-02"),
        make_bars([103.0, 102.0], opens=[103.0, 103.0], date="2024-01-03"),
    ]
    np.testing.assert_allclose(
        daily_returns(days),
        [100.0 * np.log(1.01), 100.0 * np.log(102.0 / 101.0)],
    )
    np.testing.assert_allclose(
        daily_returns(days, ReturnMode.OPEN_TO_CLOSE),
        [100.0 * np.log(1.01), 100.0 * np.log(102.0 / 103.0)],
    )


def _gapped_days(gap: float) -> list:
    rng = np.random.default_rng(9)
    days = []
    for index in range(6):
        closes = 100.0 * gap**index * np.exp(np.cumsum(rng.normal(0, 0.002, size=20)))
        days.append(make_bars(list(closes), bar_interval=1, date=f"2024-01-{index + 2:02d}"))
    return days


def test_scaled_variance_overnight_gap():
    config = MeasureConfig(kind=MeasureKind.SCRV, interval_minutes=5, scaling_lookback=2)
    _, flat = compute_daily_measures(_gapped_days(1.0), config)
    _, gapped = compute_daily_measures(_gapped_days(1.1), config)
    assert np.all(np.isnan(gapped[:2]))
    assert np.all(gapped[2:] > flat[2:])

    config = config.model_copy(update=dict(return_mode=ReturnMode.OPEN_TO_CLOSE))
    _, flat = compute_daily_measures(_gapped_days(1.0), config)
    _, gapped = compute_daily_measures(_gapped_days(1.1), config)
    np.testing.assert_allclose(gapped[2:], flat[2:])

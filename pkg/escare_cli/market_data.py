import dataclasses
import datetime
import enum
import logging
import pathlib

import numpy as np
import pandas as pd

from .errors import DataValidationError

logger = logging.getLogger(__name__)

DATE_COLUMN = "date"
CLOSE_COLUMN = "close"
OPEN_COLUMN = "open"
RETURN_COLUMN = "return"
PRICE_COLUMNS = (DATE_COLUMN, CLOSE_COLUMN, OPEN_COLUMN, RETURN_COLUMN)
INTRADAY_COLUMNS = ("date", "timestamp", "open", "high", "low", "close")


@enum.unique
class ReturnMode(str, enum.Enum):
    CLOSE_TO_CLOSE = "close-to-close"
    OPEN_TO_CLOSE = "open-to-close"


@dataclasses.dataclass(frozen=True)
class IntradayBars:
    date: datetime.date
    timestamps: np.ndarray
    open: np.ndarray
    high: np.ndarray
    low: np.ndarray
    close: np.ndarray
    bar_interval: int

    def __post_init__(self):
        size = len(self.timestamps)
        if size == 0:
            raise DataValidationError(f"No bars on {self.date}")
        for name in ("open", "high", "low", "close"):
            values = np.array(getattr(self, name), dtype=np.float64)
            if values.shape != (size,):
                raise DataValidationError(f"Column {name} misaligned on {self.date}")
            if not np.all(values > 0):
                raise DataValidationError(f"Non-positive {name} price on {self.date}")
            values.flags.writeable = False
            object.__setattr__(self, name, values)
        if size > 1 and not np.all(np.diff(self.timestamps) > np.timedelta64(0)):
            raise DataValidationError(f"Timestamps not strictly increasing on {self.date}")
        if np.any(self.high < np.maximum(self.open, self.close)):
            raise DataValidationError(f"High below open/close on {self.date}")
        if np.any(self.low > np.minimum(self.open, self.close)):
            raise DataValidationError(f"Low above open/close on {self.date}")
        if self.bar_interval < 1:
            raise DataValidationError(f"Invalid bar interval {self.bar_interval}")

    def __len__(self) -> int:
        return len(self.timestamps)


@dataclasses.dataclass(frozen=True)
class ReturnSeries:
    dates: np.ndarray
    returns: np.ndarray
    measures: dict[str, np.ndarray] = dataclasses.field(default_factory=dict)
    # simulated measures live on a shifted scale and may be signed
    positive_measures: bool = True

    def __post_init__(self):
        dates = np.array(self.dates, dtype="datetime64[D]")
        returns = np.array(self.returns, dtype=np.float64)
        if dates.shape != returns.shape or returns.ndim != 1:
            raise DataValidationError("Dates and returns are not aligned")
        if not np.all(np.isfinite(returns)):
            raise DataValidationError("Returns contain missing values")
        if len(dates) > 1 and not np.all(np.diff(dates) > np.timedelta64(0, "D")):
            raise DataValidationError("non-monotone dates")
        measures: dict[str, np.ndarray] = {}
        for measure_id, values in self.measures.items():
            values = np.array(values, dtype=np.float64)
            if values.shape != returns.shape:
                raise DataValidationError(f"Measure {measure_id} is not aligned with dates")
            present = values[np.isfinite(values)]
            if self.positive_measures and np.any(present <= 0):
                raise DataValidationError(f"Measure {measure_id} has non-positive values")
            values.flags.writeable = False
            measures[measure_id.lower()] = values
        dates.flags.writeable = False
        returns.flags.writeable = False
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "returns", returns)
        object.__setattr__(self, "measures", measures)

    def __len__(self) -> int:
        return len(self.returns)

    def measure(self, measure_id: str) -> np.ndarray:
        try:
            return self.measures[measure_id.lower()]
        except KeyError:
            raise DataValidationError(
                f"Measure {measure_id} not found, available: {', '.join(self.measures) or 'none'}"
            ) from None

    def slice(self, start: int, stop: int) -> "ReturnSeries":
        return ReturnSeries(
            dates=self.dates[start:stop],
            returns=self.returns[start:stop],
            measures={key: value[start:stop] for key, value in self.measures.items()},
            positive_measures=self.positive_measures,
        )

    def complete(self, measure_id: str) -> "ReturnSeries":
        """Days on which the measure is present"""
        keep = np.isfinite(self.measure(measure_id))
        if keep.all():
            return self
        logger.info("Dropped %s days without measure %s", int((~keep).sum()), measure_id)
        return ReturnSeries(
            dates=self.dates[keep],
            returns=self.returns[keep],
            measures={key: value[keep] for key, value in self.measures.items()},
            positive_measures=self.positive_measures,
        )


@dataclasses.dataclass(frozen=True)
class RollingWindow:
    in_sample_size: int
    step: int


def window(series: ReturnSeries, w: RollingWindow) -> tuple[ReturnSeries, int]:
    """In-sample slice of w and the index of the day it forecasts"""
    if w.in_sample_size < 2:
        raise DataValidationError(f"In-sample size must be at least 2, got {w.in_sample_size}")
    if w.step < 0 or w.step + w.in_sample_size > len(series):
        raise DataValidationError(
            f"Window step {w.step} out of range for series of length {len(series)} "
            f"with in-sample size {w.in_sample_size}"
        )
    forecast_day = w.step + w.in_sample_size
    return series.slice(w.step, forecast_day), forecast_day


def compute_returns(closes: np.ndarray, percent: bool = True) -> np.ndarray:
    closes = np.asarray(closes, dtype=np.float64)
    if closes.ndim != 1 or len(closes) < 2:
        raise DataValidationError("At least two prices are needed to compute returns")
    if not np.all(closes > 0):
        raise DataValidationError("Prices must be positive")
    returns = np.diff(np.log(closes))
    if percent:
        returns *= 100.0
    return returns


def _read_frame(path: pathlib.Path) -> pd.DataFrame:
    if not path.exists():
        raise DataValidationError(f"Input file at {path} does not exist")
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise DataValidationError(f"Failed to parse {path}: {exc}") from exc
    frame.columns = [column.strip().lower() for column in frame.columns]
    return frame


def _parse_column(
    frame: pd.DataFrame, column: str, required: bool = True
) -> np.ndarray:
    values = np.empty(len(frame), dtype=np.float64)
    for index, raw in enumerate(frame[column]):
        # header is line 1
        lineno = index + 2
        raw = raw.strip()
        if not raw:
            if required:
                raise DataValidationError(f"Line {lineno}: missing value in column {column}")
            values[index] = np.nan
            continue
        try:
            values[index] = float(raw)
        except ValueError:
            raise DataValidationError(
                f"Line {lineno}: invalid number {raw!r} in column {column}"
            ) from None
    return values


def _parse_dates(frame: pd.DataFrame) -> np.ndarray:
    dates = []
    for index, raw in enumerate(frame[DATE_COLUMN]):
        try:
            dates.append(datetime.date.fromisoformat(raw.strip()))
        except ValueError:
            raise DataValidationError(f"Line {index + 2}: invalid date {raw!r}") from None
    return np.array(dates, dtype="datetime64[D]")


def load_daily(
    path: pathlib.Path,
    mode: ReturnMode = ReturnMode.CLOSE_TO_CLOSE,
    positive_measures: bool = True,
) -> ReturnSeries:
    """Load daily data with either a close price or a precomputed percent return column.

    Extra columns are realized measures keyed by their lower-cased header; empty
    measure cells mark days where the measure is absent.
    """
    frame = _read_frame(path)
    if DATE_COLUMN not in frame.columns:
        raise DataValidationError(f"Missing column {DATE_COLUMN!r} in {path}")
    dates = _parse_dates(frame)
    measure_ids = [column for column in frame.columns if column not in PRICE_COLUMNS]
    measures = {
        column: _parse_column(frame, column, required=False) for column in measure_ids
    }
    if RETURN_COLUMN in frame.columns:
        returns = _parse_column(frame, RETURN_COLUMN)
    elif CLOSE_COLUMN in frame.columns:
        closes = _parse_column(frame, CLOSE_COLUMN)
        if mode == ReturnMode.OPEN_TO_CLOSE:
            if OPEN_COLUMN not in frame.columns:
                raise DataValidationError("Open-to-close returns need an open column")
            opens = _parse_column(frame, OPEN_COLUMN)
            if not (np.all(opens > 0) and np.all(closes > 0)):
                raise DataValidationError("Prices must be positive")
            returns = 100.0 * np.log(closes / opens)
        else:
            returns = compute_returns(closes)
            dates = dates[1:]
            measures = {key: value[1:] for key, value in measures.items()}
    else:
        raise DataValidationError(
            f"Expected a {CLOSE_COLUMN!r} or {RETURN_COLUMN!r} column in {path}"
        )
    series = ReturnSeries(
        dates=dates,
        returns=returns,
        measures=measures,
        positive_measures=positive_measures,
    )
    logger.debug("Loaded %s daily returns from %s", len(series), path)
    return series


def write_daily(series: ReturnSeries, path: pathlib.Path):
    frame = pd.DataFrame(
        {
            DATE_COLUMN: pd.to_datetime(series.dates).strftime("%Y-%m-%d"),
            RETURN_COLUMN: series.returns,
            **series.measures,
        }
    )
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format="%.10g", na_rep="")


def _intraday_files(path: pathlib.Path) -> list[pathlib.Path]:
    if path.is_dir():
        files = sorted(path.glob("*.csv"))
        if not files:
            raise DataValidationError(f"No CSV files in {path}")
        return files
    return [path]


def load_intraday(path: pathlib.Path, bar_interval: int | None = None) -> list[IntradayBars]:
    """Load intraday OHLC bars from one CSV file or a directory of per-day files"""
    frames = []
    for file_path in _intraday_files(path):
        frame = _read_frame(file_path)
        missing = [column for column in INTRADAY_COLUMNS if column not in frame.columns]
        if missing:
            raise DataValidationError(f"Missing columns {', '.join(missing)} in {file_path}")
        frames.append(frame)
    frame = pd.concat(frames, ignore_index=True)
    times = frame["timestamp"].str.replace("T", " ").str.split().str[-1]
    try:
        stamps = pd.to_datetime(frame[DATE_COLUMN].str.strip() + " " + times)
    except (ValueError, pd.errors.ParserError) as exc:
        raise DataValidationError(f"Invalid intraday timestamp: {exc}") from exc
    prices = {column: _parse_column(frame, column) for column in INTRADAY_COLUMNS[2:]}
    frame = pd.DataFrame({"stamp": stamps, **prices})
    frame["day"] = frame["stamp"].dt.date

    if bar_interval is None:
        gaps = frame.groupby("day")["stamp"].diff().dropna()
        if gaps.empty:
            raise DataValidationError("Cannot infer the bar interval from single-bar days")
        bar_interval = max(int(round(gaps.median().total_seconds() / 60.0)), 1)

    days: list[IntradayBars] = []
    for day, group in frame.groupby("day", sort=True):
        days.append(
            IntradayBars(
                date=day,
                timestamps=group["stamp"].to_numpy(dtype="datetime64[m]"),
                open=group["open"].to_numpy(),
                high=group["high"].to_numpy(),
                low=group["low"].to_numpy(),
                close=group["close"].to_numpy(),
                bar_interval=bar_interval,
            )
        )
    logger.debug(
        "Loaded %s intraday days at %s-minute bars from %s", len(days), bar_interval, path
    )
    return days

import concurrent.futures
import dataclasses
import logging
import pathlib

import numpy as np
import pandas as pd

from .config import Estimator
from .config import McmcConfig
from .config import MlConfig
from .errors import DataValidationError
from .errors import EscareError
from .estimation import fit_model
from .market_data import ReturnSeries
from .market_data import RollingWindow
from .market_data import window
from .models.recursions import forecast_one_step
from .models.recursions import run_model
from .models.spec import ModelSpec
from .models.spec import ParamVector

logger = logging.getLogger(__name__)

REQUIRED_COLUMNS = ("date", "model", "alpha", "var", "es")
FORECAST_COLUMNS = (*REQUIRED_COLUMNS, "tau", "flag")


@dataclasses.dataclass(frozen=True)
class ForecastRecord:
    date: np.datetime64
    model: str
    alpha: float
    var: float
    es: float
    tau: float | None = None
    step: int = 0
    flag: str | None = None

    @property
    def ok(self) -> bool:
        return self.flag is None


@dataclasses.dataclass(frozen=True)
class _Block:
    first_step: int
    last_step: int
    seed: np.random.SeedSequence


def _refit_blocks(steps: int, refit_every: int | None, seed: int | None) -> list[_Block]:
    stride = steps if refit_every is None else refit_every
    starts = list(range(0, steps, stride))
    seeds = np.random.SeedSequence(seed).spawn(len(starts))
    return [
        _Block(first_step=start, last_step=min(start + stride, steps), seed=block_seed)
        for start, block_seed in zip(starts, seeds)
    ]


def _flagged(spec: ModelSpec, series: ReturnSeries, step: int, n: int, flag: str) -> ForecastRecord:
    return ForecastRecord(
        date=series.dates[step + n],
        model=spec.model_id,
        alpha=spec.alpha,
        var=np.nan,
        es=np.nan,
        step=step,
        flag=flag,
    )


def _forecast_step(
    spec: ModelSpec, series: ReturnSeries, params: ParamVector, step: int, n: int
) -> ForecastRecord:
    in_sample, forecast_day = window(series, RollingWindow(in_sample_size=n, step=step))
    measures = in_sample.measure(spec.measure_id) if spec.family.is_realized else None
    path = run_model(
        spec.family,
        params,
        in_sample.returns,
        spec.alpha,
        measures=measures,
        threshold=spec.threshold,
    )
    if not path.valid:
        return _flagged(spec, series, step, n, f"invalid path: {path.reason}")
    var, es = forecast_one_step(
        params,
        path,
        float(in_sample.returns[-1]),
        None if measures is None else float(measures[-1]),
        alpha=spec.alpha,
        threshold=spec.threshold,
    )
    return ForecastRecord(
        date=series.dates[forecast_day],
        model=spec.model_id,
        alpha=spec.alpha,
        var=var,
        es=es,
        tau=params.tau,
        step=step,
    )


def _run_block(
    spec: ModelSpec,
    series: ReturnSeries,
    estimator: Estimator,
    n: int,
    block: _Block,
    ml_config: MlConfig,
    mcmc_config: McmcConfig,
) -> list[ForecastRecord]:
    rng = np.random.default_rng(block.seed)
    in_sample, _ = window(series, RollingWindow(in_sample_size=n, step=block.first_step))
    try:
        fit = fit_model(
            spec,
            in_sample.returns,
            in_sample.measure(spec.measure_id) if spec.family.is_realized else None,
            estimator,
            ml_config,
            mcmc_config,
            rng,
        )
    except EscareError as exc:
        logger.warning(
            "Fit of %s failed on window starting at step %s: %s",
            spec.model_id,
            block.first_step,
            exc,
        )
        return [
            _flagged(spec, series, step, n, f"fit failed: {exc}")
            for step in range(block.first_step, block.last_step)
        ]
    records = []
    for step in range(block.first_step, block.last_step):
        try:
            records.append(_forecast_step(spec, series, fit.params, step, n))
        except EscareError as exc:
            records.append(_flagged(spec, series, step, n, f"forecast failed: {exc}"))
    return records


def rolling_forecast(
    spec: ModelSpec,
    series: ReturnSeries,
    estimator: Estimator,
    n: int,
    refit_every: int | None = 1,
    ml_config: MlConfig = MlConfig(),
    mcmc_config: McmcConfig = McmcConfig(),
    seed: int | None = None,
    threads: int = 1,
) -> list[ForecastRecord]:
    """One step ahead forecasts for every day after the first n.

    Parameters are refitted every refit_every steps; None keeps the first fit.
    """
    if n < 2:
        raise DataValidationError(f"In-sample size must be at least 2, got {n}")
    steps = len(series) - n
    if steps < 1:
        raise DataValidationError(
            f"Series of length {len(series)} is too short for a {n}-day window"
        )
    if refit_every is not None and refit_every < 1:
        raise DataValidationError(f"refit_every must be positive, got {refit_every}")
    if spec.family.is_realized:
        series.measure(spec.measure_id)
    blocks = _refit_blocks(steps, refit_every, seed)
    logger.info(
        "Forecasting %s over %s steps with %s fits",
        spec.model_id,
        steps,
        len(blocks),
    )
    args = [
        (spec, series, estimator, n, block, ml_config, mcmc_config) for block in blocks
    ]
    if threads > 1 and len(blocks) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=threads) as executor:
            results = list(executor.map(_run_block, *zip(*args)))
    else:
        results = [_run_block(*arg) for arg in args]
    records = [record for block_records in results for record in block_records]
    failed = sum(not record.ok for record in records)
    if failed:
        logger.warning("%s of %s forecast steps flagged", failed, len(records))
    return records


def records_to_frame(records: list[ForecastRecord]) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "date": pd.to_datetime([record.date for record in records]).strftime("%Y-%m-%d"),
            "model": [record.model for record in records],
            "alpha": [record.alpha for record in records],
            "var": [record.var for record in records],
            "es": [record.es for record in records],
            "tau": [np.nan if record.tau is None else record.tau for record in records],
            "flag": [record.flag or "" for record in records],
        },
        columns=list(FORECAST_COLUMNS),
    )


def write_forecasts(records: list[ForecastRecord], path: pathlib.Path):
    path.parent.mkdir(parents=True, exist_ok=True)
    records_to_frame(records).to_csv(path, index=False, float_format="%.10g", na_rep="")


def read_forecasts(path: pathlib.Path) -> pd.DataFrame:
    """Forecast rows from one CSV file or every CSV file of a directory, flagged rows dropped"""
    if path.is_dir():
        files = sorted(path.glob("*.csv"))
    elif path.exists():
        files = [path]
    else:
        raise DataValidationError(f"Forecast path {path} does not exist")
    if not files:
        raise DataValidationError(f"No forecast files in {path}")
    frames = []
    for file_path in files:
        frame = pd.read_csv(file_path, dtype={"model": str, "flag": str}, keep_default_na=True)
        frame.columns = [column.strip().lower() for column in frame.columns]
        missing = [column for column in REQUIRED_COLUMNS if column not in frame.columns]
        if missing:
            raise DataValidationError(
                f"Forecast file {file_path} is missing columns {', '.join(missing)}"
            )
        frames.append(frame)
    frame = pd.concat(frames, ignore_index=True)
    if "tau" not in frame.columns:
        frame["tau"] = np.nan
    frame = frame.dropna(subset=["var", "es"])
    if frame.empty:
        raise DataValidationError(f"No usable forecasts in {path}")
    frame["date"] = pd.to_datetime(frame["date"]).dt.date
    return frame.reset_index(drop=True)


def model_ids(frame: pd.DataFrame) -> list[str]:
    """Model identifiers in order of first appearance"""
    return list(dict.fromkeys(frame["model"]))


@dataclasses.dataclass(frozen=True)
class AlignedForecasts:
    dates: np.ndarray
    returns: np.ndarray
    var: np.ndarray
    es: np.ndarray
    tau: np.ndarray


def align_forecasts(frame: pd.DataFrame, model: str, series: ReturnSeries) -> AlignedForecasts:
    rows = frame[frame["model"] == model]
    if rows.empty:
        raise DataValidationError(f"No forecasts for model {model}")
    if rows["date"].duplicated().any():
        raise DataValidationError(f"Duplicate forecast dates for model {model}")
    lookup = pd.Series(
        np.arange(len(series)), index=pd.to_datetime(series.dates).date
    )
    positions = lookup.reindex(rows["date"].to_numpy())
    if positions.isna().any():
        missing = rows["date"][positions.isna().to_numpy()].iloc[0]
        raise DataValidationError(f"No return for forecast date {missing} of model {model}")
    index = positions.to_numpy(dtype=np.int64)
    return AlignedForecasts(
        dates=series.dates[index],
        returns=series.returns[index],
        var=rows["var"].to_numpy(dtype=np.float64),
        es=rows["es"].to_numpy(dtype=np.float64),
        tau=rows["tau"].to_numpy(dtype=np.float64),
    )

import dataclasses
import json
import logging
import pathlib

import numpy as np
import pandas as pd
from scipy import stats

from .backtest import christoffersen_cc
from .backtest import dq_test
from .backtest import es_rate
from .backtest import es_uc
from .backtest import HitSeries
from .backtest import kupiec_uc
from .backtest import mcs
from .backtest import TestResult
from .backtest import vqr_test
from .backtest import vrate
from .config import BacktestConfig
from .config import LossKind
from .config import McsConfig
from .errors import DataValidationError
from .errors import NumericalError
from .forecasting import align_forecasts
from .forecasting import AlignedForecasts
from .forecasting import model_ids
from .forecasting import read_forecasts
from .market_data import ReturnSeries
from .objective import fz_loss
from .objective import quantile_loss

logger = logging.getLogger(__name__)

KNOWN_TESTS = ("uc", "cc", "dq1", "dq4", "vqr", "es")
DQ_CONVENTION = "intercept, lagged centered hits, contemporaneous VaR"
AVERAGE_RANK_COLUMN = "avg_rank"
TOTAL_COLUMN = "total"


def parse_tests(value: str | list[str]) -> list[str]:
    names = value.split(",") if isinstance(value, str) else list(value)
    tests = [name.strip().lower() for name in names if name.strip()]
    unknown = [name for name in tests if name not in KNOWN_TESTS]
    if unknown:
        raise DataValidationError(
            f"Unknown backtests {', '.join(unknown)}, expected any of {', '.join(KNOWN_TESTS)}"
        )
    return tests


def select_alpha(frame: pd.DataFrame, alpha: float | None) -> pd.DataFrame:
    if alpha is None:
        return frame
    selected = frame.loc[np.isclose(frame["alpha"].to_numpy(dtype=float), alpha)]
    if selected.empty:
        levels = sorted(float(level) for level in frame["alpha"].unique())
        raise DataValidationError(
            f"No forecasts at level {alpha}, forecast levels are {levels}"
        )
    return selected.reset_index(drop=True)


def forecast_alpha(frame: pd.DataFrame, model: str) -> float:
    levels = frame.loc[frame["model"] == model, "alpha"].unique()
    if len(levels) != 1:
        raise DataValidationError(
            f"Model {model} has forecasts at several levels {sorted(levels)}"
        )
    return float(levels[0])


def run_tests(
    forecasts: AlignedForecasts,
    alpha: float,
    tests: list[str],
    es_target: float,
) -> dict[str, TestResult]:
    hits = HitSeries.from_forecasts(forecasts.returns, forecasts.var, alpha)
    runners = dict(
        uc=lambda: kupiec_uc(hits),
        cc=lambda: christoffersen_cc(hits),
        dq1=lambda: dq_test(hits, forecasts.var, lags=1),
        dq4=lambda: dq_test(hits, forecasts.var, lags=4),
        vqr=lambda: vqr_test(forecasts.returns, forecasts.var, alpha),
        es=lambda: es_uc(forecasts.returns, forecasts.es, target=es_target),
    )
    results = {}
    for name in tests:
        try:
            results[name] = runners[name]()
        except NumericalError as exc:
            logger.warning("Backtest %s could not be computed: %s", name, exc)
    return results


@dataclasses.dataclass(frozen=True)
class ModelScore:
    model: str
    series: str
    alpha: float
    m: int
    vrate: float
    es_rate: float
    quantile_loss: float
    fz_loss: float
    tests: dict[str, TestResult]

    def as_dict(self) -> dict:
        return dict(
            model=self.model,
            series=self.series,
            alpha=self.alpha,
            m=self.m,
            vrate=self.vrate,
            es_rate=self.es_rate,
            quantile_loss=self.quantile_loss,
            fz_loss=self.fz_loss,
            tests={name: result.as_dict() for name, result in self.tests.items()},
        )


def score_model(
    forecasts: AlignedForecasts,
    model: str,
    series_name: str,
    alpha: float,
    config: BacktestConfig,
) -> ModelScore:
    hits = HitSeries.from_forecasts(forecasts.returns, forecasts.var, alpha)
    return ModelScore(
        model=model,
        series=series_name,
        alpha=alpha,
        m=hits.m,
        vrate=vrate(hits),
        es_rate=es_rate(forecasts.returns, forecasts.es),
        quantile_loss=float(
            quantile_loss(forecasts.returns, forecasts.var, alpha).total
        ),
        fz_loss=float(
            fz_loss(forecasts.returns, forecasts.var, forecasts.es, alpha).total
        ),
        tests=run_tests(forecasts, alpha, config.tests, config.es_target),
    )


def score_forecasts(
    frame: pd.DataFrame,
    series: ReturnSeries,
    series_name: str,
    config: BacktestConfig,
) -> dict[str, ModelScore]:
    return {
        model: score_model(
            align_forecasts(frame, model, series),
            model,
            series_name,
            forecast_alpha(frame, model),
            config,
        )
        for model in model_ids(frame)
    }


def loss_frame(
    frame: pd.DataFrame,
    series: ReturnSeries,
    models: list[str],
    loss: LossKind,
) -> pd.DataFrame:
    """Per-day losses of the models over their common forecast dates, one column per model"""
    columns = {}
    for model in models:
        forecasts = align_forecasts(frame, model, series)
        alpha = forecast_alpha(frame, model)
        if loss == LossKind.QUANTILE:
            report = quantile_loss(forecasts.returns, forecasts.var, alpha)
        else:
            report = fz_loss(forecasts.returns, forecasts.var, forecasts.es, alpha)
        columns[model] = pd.Series(
            report.per_day, index=pd.DatetimeIndex(forecasts.dates, name="date")
        )
    losses = pd.DataFrame(columns).dropna()
    if losses.empty:
        raise DataValidationError("Models share no forecast dates")
    return losses


def loss_matrix(
    frame: pd.DataFrame,
    series: ReturnSeries,
    models: list[str],
    loss: LossKind,
) -> tuple[np.ndarray, list[str]]:
    losses = loss_frame(frame, series, models, loss)
    return losses.to_numpy(), list(losses.columns)


def rank_table(table: pd.DataFrame, key=None) -> pd.DataFrame:
    """Append per-series ranks (1 is best) and their row mean, absent models left unranked"""
    ranked = table.copy()
    rank_columns = []
    for column in table.columns:
        values = table[column]
        present = values.notna()
        ranks = pd.Series(np.nan, index=table.index)
        if present.any():
            scores = values[present] if key is None else key(values[present])
            ranks[present] = stats.rankdata(scores.to_numpy(), method="average")
        ranked[f"{column}_rank"] = ranks
        rank_columns.append(f"{column}_rank")
    ranked[AVERAGE_RANK_COLUMN] = ranked[rank_columns].mean(axis=1, skipna=True)
    return ranked


@dataclasses.dataclass
class SeriesInput:
    name: str
    series: ReturnSeries
    forecasts_path: pathlib.Path


@dataclasses.dataclass
class Report:
    models: list[str]
    series: list[str]
    scores: dict[tuple[str, str], ModelScore]
    absent: dict[str, list[str]]
    vrate: pd.DataFrame
    quantile_loss: pd.DataFrame
    fz_loss: pd.DataFrame
    es_rate: pd.DataFrame
    rejections: pd.DataFrame
    mcs: pd.DataFrame
    plot_data: pd.DataFrame


def _metric_table(
    scores: dict[tuple[str, str], ModelScore],
    models: list[str],
    series: list[str],
    attribute: str,
) -> pd.DataFrame:
    table = pd.DataFrame(index=pd.Index(models, name="model"), columns=series, dtype=float)
    for (series_name, model), score in scores.items():
        table.loc[model, series_name] = getattr(score, attribute)
    return table


def _plot_rows(
    series_name: str, model: str, forecasts: AlignedForecasts
) -> list[pd.DataFrame]:
    dates = pd.to_datetime(forecasts.dates).strftime("%Y-%m-%d")
    rows = []
    for variable, values in (
        ("var", forecasts.var),
        ("es", forecasts.es),
        ("gap", forecasts.var - forecasts.es),
        ("tau", forecasts.tau),
    ):
        if variable == "tau" and np.all(np.isnan(values)):
            continue
        rows.append(
            pd.DataFrame(
                dict(
                    date=dates,
                    series=series_name,
                    model=model,
                    variable=variable,
                    value=values,
                )
            )
        )
    return rows


def build_report(
    inputs: list[SeriesInput],
    backtest_config: BacktestConfig,
    mcs_config: McsConfig,
    roster: list[str] | None = None,
    rng: np.random.Generator | None = None,
) -> Report:
    if not inputs:
        raise DataValidationError("Report needs at least one series")
    names = [item.name for item in inputs]
    if len(set(names)) != len(names):
        raise DataValidationError(f"Duplicate series names {names}")
    rng = rng or np.random.default_rng()
    frames = {item.name: read_forecasts(item.forecasts_path) for item in inputs}
    if roster:
        models = list(roster)
    else:
        models = list(dict.fromkeys(model for frame in frames.values() for model in model_ids(frame)))

    scores: dict[tuple[str, str], ModelScore] = {}
    absent: dict[str, list[str]] = {}
    membership = pd.DataFrame(index=pd.Index(models, name="model"), columns=names, dtype=float)
    plot_frames = []
    for item in inputs:
        frame = frames[item.name]
        present = [model for model in models if model in set(frame["model"])]
        absent[item.name] = [model for model in models if model not in present]
        for model in absent[item.name]:
            logger.warning("Model %s has no forecasts for series %s", model, item.name)
        plot_frames.append(
            pd.DataFrame(
                dict(
                    date=pd.to_datetime(item.series.dates).strftime("%Y-%m-%d"),
                    series=item.name,
                    model="",
                    variable="return",
                    value=item.series.returns,
                )
            )
        )
        for model in present:
            forecasts = align_forecasts(frame, model, item.series)
            scores[(item.name, model)] = score_model(
                forecasts, model, item.name, forecast_alpha(frame, model), backtest_config
            )
            plot_frames.extend(_plot_rows(item.name, model, forecasts))
        if len(present) >= 2:
            losses, loss_models = loss_matrix(frame, item.series, present, mcs_config.loss)
            result = mcs(
                losses,
                loss_models,
                level=mcs_config.level,
                bootstrap_replicates=mcs_config.bootstrap_replicates,
                block_length=mcs_config.block_length,
                rng=rng,
            )
            for model in present:
                membership.loc[model, item.name] = float(model in result.included)
        elif present:
            membership.loc[present[0], item.name] = 1.0
    membership[TOTAL_COLUMN] = membership[names].sum(axis=1, min_count=1)

    alpha_by_model = {}
    for (_, model), score in scores.items():
        alpha_by_model.setdefault(model, score.alpha)

    rejections = pd.DataFrame(
        0, index=pd.Index(models, name="model"), columns=list(backtest_config.tests)
    )
    for (_, model), score in scores.items():
        for name, result in score.tests.items():
            if result.p_value < backtest_config.significance:
                rejections.loc[model, name] += 1
    rejections[TOTAL_COLUMN] = rejections[list(backtest_config.tests)].sum(axis=1)

    vrate_table = _metric_table(scores, models, names, "vrate")
    alphas = pd.Series(alpha_by_model).reindex(models)
    return Report(
        models=models,
        series=names,
        scores=scores,
        absent=absent,
        vrate=rank_table(vrate_table, key=lambda values: (values - alphas[values.index]).abs()),
        quantile_loss=rank_table(_metric_table(scores, models, names, "quantile_loss")),
        fz_loss=rank_table(_metric_table(scores, models, names, "fz_loss")),
        es_rate=rank_table(
            _metric_table(scores, models, names, "es_rate"),
            key=lambda values: (values - backtest_config.es_target).abs(),
        ),
        rejections=rejections,
        mcs=membership,
        plot_data=pd.concat(plot_frames, ignore_index=True),
    )


def write_report(report: Report, out_dir: pathlib.Path) -> list[pathlib.Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for filename, table in (
        ("vrate.csv", report.vrate),
        ("quantile-loss.csv", report.quantile_loss),
        ("fz-loss.csv", report.fz_loss),
        ("es-rate.csv", report.es_rate),
        ("rejections.csv", report.rejections),
        ("mcs.csv", report.mcs),
    ):
        path = out_dir / filename
        table.to_csv(path, float_format="%.10g")
        written.append(path)
    plot_path = out_dir / "plot-data.csv"
    report.plot_data.to_csv(plot_path, index=False, float_format="%.10g")
    written.append(plot_path)
    summary_path = out_dir / "report.json"
    summary = dict(
        models=report.models,
        series=report.series,
        absent=report.absent,
        dq_convention=DQ_CONVENTION,
        scores=[score.as_dict() for score in report.scores.values()],
    )
    summary_path.write_text(json.dumps(summary, indent=2, default=_json_default))
    written.append(summary_path)
    return written


def _json_default(value):
    if isinstance(value, (np.floating, np.integer, np.bool_)):
        return value.item()
    raise TypeError(f"Cannot serialize {type(value)}")

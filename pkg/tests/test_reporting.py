import json
import pathlib

import numpy as np
import pandas as pd
import pytest

from .helper import write_model_forecasts
from escare_cli.config import BacktestConfig
from escare_cli.config import LossKind
from escare_cli.config import McsConfig
from escare_cli.errors import DataValidationError
from escare_cli.forecasting import read_forecasts
from escare_cli.market_data import ReturnSeries
from escare_cli.reporting import AVERAGE_RANK_COLUMN
from escare_cli.reporting import build_report
from escare_cli.reporting import forecast_alpha
from escare_cli.reporting import loss_frame
from escare_cli.reporting import parse_tests
from escare_cli.reporting import rank_table
from escare_cli.reporting import score_forecasts
from escare_cli.reporting import SeriesInput
from escare_cli.reporting import TOTAL_COLUMN
from escare_cli.reporting import write_report

BACKTESTS = BacktestConfig(tests=["uc", "cc", "dq1", "es"])
MCS = McsConfig(bootstrap_replicates=200)


@pytest.mark.parametrize(
    "value, expected",
    [
        ("uc,cc", ["uc", "cc"]),
        (" DQ4 , es ,", ["dq4", "es"]),
        (["vqr"], ["vqr"]),
        ("", []),
    ],
)
def test_parse_tests(value, expected: list[str]):
    assert parse_tests(value) == expected


def test_parse_unknown_test():
    with pytest.raises(DataValidationError, match="Unknown backtests lr"):
        parse_tests("uc,lr")


def test_forecast_alpha_mixed(tmp_path: pathlib.Path, sim_series: ReturnSeries):
    write_model_forecasts(tmp_path, sim_series, "m", start=390)
    write_model_forecasts(tmp_path / "other", sim_series, "m", start=380, alpha=0.025)
    frame = pd.concat([read_forecasts(tmp_path), read_forecasts(tmp_path / "other")])
    with pytest.raises(DataValidationError, match="several levels"):
        forecast_alpha(frame, "m")


def test_score_forecasts(tmp_path: pathlib.Path, sim_series: ReturnSeries):
    write_model_forecasts(tmp_path, sim_series, "wide", scale=1.5)
    write_model_forecasts(tmp_path, sim_series, "narrow", scale=0.5)
    scores = score_forecasts(read_forecasts(tmp_path), sim_series, "sim", BACKTESTS)
    assert list(scores) == ["narrow", "wide"]
    narrow, wide = scores["narrow"], scores["wide"]
    assert narrow.m == wide.m == 200
    assert narrow.vrate >= wide.vrate
    assert narrow.es_rate >= wide.es_rate
    assert set(narrow.tests) <= {"uc", "cc", "dq1", "es"}
    payload = narrow.as_dict()
    assert payload["series"] == "sim"
    assert payload["tests"]["uc"]["name"] == "uc"


def test_loss_frame_common_dates(tmp_path: pathlib.Path, sim_series: ReturnSeries):
    write_model_forecasts(tmp_path, sim_series, "a", start=300)
    write_model_forecasts(tmp_path, sim_series, "b", start=350)
    frame = read_forecasts(tmp_path)
    losses = loss_frame(frame, sim_series, ["a", "b"], LossKind.QUANTILE)
    assert list(losses.columns) == ["a", "b"]
    assert len(losses) == 50
    assert losses.index.name == "date"
    np.testing.assert_allclose(losses["a"], losses["b"])


def test_rank_table():
    table = pd.DataFrame(
        {"s1": [0.3, 0.1, 0.2], "s2": [1.0, 1.0, np.nan]},
        index=pd.Index(["a", "b", "c"], name="model"),
    )
    ranked = rank_table(table)
    assert ranked["s1_rank"].tolist() == [3.0, 1.0, 2.0]
    assert ranked["s2_rank"].tolist()[:2] == [1.5, 1.5]
    assert np.isnan(ranked.loc["c", "s2_rank"])
    assert ranked[AVERAGE_RANK_COLUMN].tolist() == [2.25, 1.25, 2.0]


def test_rank_table_key():
    table = pd.DataFrame({"s": [0.03, 0.011, 0.0]}, index=["a", "b", "c"])
    ranked = rank_table(table, key=lambda values: (values - 0.01).abs())
    assert ranked["s_rank"].tolist() == [3.0, 1.0, 2.0]


def test_identical_models_tie(tmp_path: pathlib.Path, sim_series: ReturnSeries):
    write_model_forecasts(tmp_path, sim_series, "first")
    write_model_forecasts(tmp_path, sim_series, "second")
    report = build_report(
        [SeriesInput(name="sim", series=sim_series, forecasts_path=tmp_path)],
        BACKTESTS,
        MCS,
        rng=np.random.default_rng(0),
    )
    for table in (report.vrate, report.quantile_loss, report.fz_loss, report.es_rate):
        assert table["sim_rank"].tolist() == [1.5, 1.5]
        assert table[AVERAGE_RANK_COLUMN].tolist() == [1.5, 1.5]
    assert report.mcs["sim"].tolist() == [1.0, 1.0]
    assert report.mcs[TOTAL_COLUMN].tolist() == [1.0, 1.0]
    assert report.rejections.loc["first"].tolist() == report.rejections.loc["second"].tolist()


def test_absent_model(tmp_path: pathlib.Path, sim_series: ReturnSeries):
    full, partial = tmp_path / "full", tmp_path / "partial"
    for name in ("a", "b", "c"):
        write_model_forecasts(full, sim_series, name, scale={"a": 1.0, "b": 1.2, "c": 0.8}[name])
    write_model_forecasts(partial, sim_series, "a")
    write_model_forecasts(partial, sim_series, "c", scale=0.8)
    report = build_report(
        [
            SeriesInput(name="one", series=sim_series, forecasts_path=full),
            SeriesInput(name="two", series=sim_series, forecasts_path=partial),
        ],
        BACKTESTS,
        MCS,
        roster=["a", "b", "c"],
        rng=np.random.default_rng(0),
    )
    assert report.absent == {"one": [], "two": ["b"]}
    assert ("two", "b") not in report.scores
    table = report.quantile_loss
    assert np.isnan(table.loc["b", "two"])
    assert np.isnan(table.loc["b", "two_rank"])
    assert table.loc["b", AVERAGE_RANK_COLUMN] == table.loc["b", "one_rank"]
    expected = table[["one_rank", "two_rank"]].mean(axis=1)
    np.testing.assert_allclose(table[AVERAGE_RANK_COLUMN], expected)
    assert np.isnan(report.mcs.loc["b", "two"])


def test_single_model_series(tmp_path: pathlib.Path, sim_series: ReturnSeries):
    write_model_forecasts(tmp_path, sim_series, "only")
    report = build_report(
        [SeriesInput(name="sim", series=sim_series, forecasts_path=tmp_path)], BACKTESTS, MCS
    )
    assert report.mcs.loc["only", "sim"] == 1.0
    assert report.vrate.loc["only", "sim_rank"] == 1.0


def test_write_report(tmp_path: pathlib.Path, sim_series: ReturnSeries):
    forecasts = tmp_path / "forecasts"
    write_model_forecasts(forecasts, sim_series, "a")
    write_model_forecasts(forecasts, sim_series, "b", scale=1.3)
    report = build_report(
        [SeriesInput(name="sim", series=sim_series, forecasts_path=forecasts)],
        BACKTESTS,
        MCS,
        rng=np.random.default_rng(1),
    )
    written = write_report(report, tmp_path / "report")
    assert sorted(path.name for path in written) == [
        "es-rate.csv",
        "fz-loss.csv",
        "mcs.csv",
        "plot-data.csv",
        "quantile-loss.csv",
        "rejections.csv",
        "report.json",
        "vrate.csv",
    ]
    vrate = pd.read_csv(tmp_path / "report" / "vrate.csv", index_col="model")
    assert list(vrate.columns) == ["sim", "sim_rank", AVERAGE_RANK_COLUMN]
    plot = pd.read_csv(tmp_path / "report" / "plot-data.csv")
    assert set(plot["variable"]) == {"return", "var", "es", "gap", "tau"}
    assert (plot.loc[plot["variable"] == "gap", "value"] > 0).all()
    summary = json.loads((tmp_path / "report" / "report.json").read_text())
    assert summary["models"] == ["a", "b"]
    assert len(summary["scores"]) == 2
    assert "dq_convention" in summary


def test_report_input_errors(tmp_path: pathlib.Path, sim_series: ReturnSeries):
    with pytest.raises(DataValidationError, match="at least one series"):
        build_report([], BACKTESTS, MCS)
    write_model_forecasts(tmp_path, sim_series, "a")
    item = SeriesInput(name="sim", series=sim_series, forecasts_path=tmp_path)
    with pytest.raises(DataValidationError, match="Duplicate series"):
        build_report([item, item], BACKTESTS, MCS)
    empty = tmp_path / "empty"
    empty.mkdir()
    with pytest.raises(DataValidationError, match="No forecast files"):
        build_report([SeriesInput(name="e", series=sim_series, forecasts_path=empty)], BACKTESTS, MCS)

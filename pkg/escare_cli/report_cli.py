import pathlib

import click
import numpy as np

from .cli import cli
from .cli_helpers import format_number
from .cli_helpers import handle_cli_errors
from .cli_helpers import new_table
from .cli_helpers import open_series
from .cli_helpers import print_table
from .cli_helpers import resolve_config
from .cli_helpers import write_run_config
from .environment import Environment
from .environment import pass_env
from .errors import DataValidationError
from .reporting import AVERAGE_RANK_COLUMN
from .reporting import build_report
from .reporting import parse_tests
from .reporting import SeriesInput
from .reporting import TOTAL_COLUMN
from .reporting import write_report


@cli.command(
    name="report",
    help="Tables of VRate, losses, backtest rejections and MCS membership across series",
)
@click.option(
    "-f",
    "--forecasts",
    "forecasts_paths",
    type=click.Path(exists=True, path_type=pathlib.Path),
    multiple=True,
    required=True,
    help="Forecast directory of one series, repeat once per series",
)
@click.option(
    "-r",
    "--returns",
    "returns_paths",
    type=click.Path(exists=True, dir_okay=False, path_type=pathlib.Path),
    multiple=True,
    required=True,
    help="Daily returns CSV of one series, in the order of --forecasts",
)
@click.option(
    "-n",
    "--name",
    "names",
    multiple=True,
    help="Series name, in the order of --forecasts, defaults to the returns file name",
)
@pass_env
@handle_cli_errors()
def main(
    env: Environment,
    forecasts_paths: tuple[pathlib.Path, ...],
    returns_paths: tuple[pathlib.Path, ...],
    names: tuple[str, ...],
):
    if len(forecasts_paths) != len(returns_paths):
        raise DataValidationError("Pass one --returns for every --forecasts")
    if names and len(names) != len(forecasts_paths):
        raise DataValidationError("Pass one --name for every --forecasts")
    config = resolve_config(env)
    backtest_config = config.backtest.model_copy(
        update=dict(tests=parse_tests(config.backtest.tests))
    )
    inputs = [
        SeriesInput(
            name=names[index] if names else returns_path.stem,
            series=open_series(returns_path, allow_nonpositive_measures=True),
            forecasts_path=forecasts_path,
        )
        for index, (forecasts_path, returns_path) in enumerate(
            zip(forecasts_paths, returns_paths)
        )
    ]
    roster = [spec.model_id for spec in config.roster] or None
    report = build_report(
        inputs,
        backtest_config,
        config.mcs,
        roster=roster,
        rng=np.random.default_rng(config.seed),
    )
    for path in write_report(report, env.out_dir):
        env.logger.info(
            "Wrote [green]%s[/]",
            path,
            extra={"markup": True, "highlighter": None},
        )
    write_run_config(env, config)

    table = new_table(
        "VRate by series",
        ["Model", *report.series, "Avg rank", "Rejections", "In MCS"],
    )
    for model in report.models:
        table.add_row(
            model,
            *[format_number(report.vrate.loc[model, name], 4) for name in report.series],
            format_number(report.vrate.loc[model, AVERAGE_RANK_COLUMN], 3),
            str(int(report.rejections.loc[model, TOTAL_COLUMN])),
            format_number(report.mcs.loc[model, TOTAL_COLUMN], 3),
        )
    print_table(table)
    for series_name, absent in report.absent.items():
        if absent:
            env.logger.warning("Absent from %s: %s", series_name, ", ".join(absent))

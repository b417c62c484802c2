import pathlib

import click
import numpy as np

from .cli import cli
from .cli_helpers import format_number
from .cli_helpers import handle_cli_errors
from .cli_helpers import new_table
from .cli_helpers import print_table
from .cli_helpers import resolve_config
from .cli_helpers import write_run_config
from .config import MeasureConfig
from .config import MeasureKind
from .config import ScalingProxy
from .environment import Environment
from .environment import pass_env
from .market_data import load_intraday
from .market_data import ReturnMode
from .market_data import ReturnSeries
from .market_data import write_daily
from .measures import compute_daily_measures
from .measures import daily_returns


@cli.command(
    name="compute-measures",
    help="Compute daily realized measures and returns from intraday bars",
)
@click.option(
    "-i",
    "--in",
    "--intraday",
    "intraday_path",
    type=click.Path(exists=True, path_type=pathlib.Path),
    required=True,
    help="Intraday CSV file or directory of per-day CSV files",
)
@click.option(
    "-k",
    "--kind",
    "kinds",
    type=click.Choice([kind.value for kind in MeasureKind], case_sensitive=False),
    multiple=True,
    help="Measures to compute, repeat for several (default from config)",
)
@click.option("--interval", type=click.IntRange(min=1), help="Sampling interval in minutes")
@click.option(
    "--base",
    "--bar-interval",
    "bar_interval",
    type=click.IntRange(min=1),
    help="Bar length in minutes, inferred when omitted",
)
@click.option(
    "--q",
    "--lookback",
    "lookback",
    type=click.IntRange(min=1),
    help="Scaling lookback in days",
)
@click.option(
    "--scaling-proxy",
    type=click.Choice([proxy.value for proxy in ScalingProxy]),
    help="Daily range proxy of the scaled range measures",
)
@click.option(
    "--return-mode",
    type=click.Choice([mode.value for mode in ReturnMode]),
    help="Daily returns written and squared into the scaled variance proxy",
)
@click.option(
    "-o",
    "--out",
    "--output",
    "output",
    type=click.Path(dir_okay=False, path_type=pathlib.Path),
    help="Output daily CSV, defaults to measures.csv in the run output directory",
)
@pass_env
@handle_cli_errors()
def main(
    env: Environment,
    intraday_path: pathlib.Path,
    kinds: tuple[str, ...],
    interval: int | None,
    bar_interval: int | None,
    lookback: int | None,
    scaling_proxy: str | None,
    return_mode: str | None,
    output: pathlib.Path | None,
):
    config = resolve_config(env)
    updates = dict(
        interval_minutes=interval,
        scaling_lookback=lookback,
        scaling_proxy=scaling_proxy,
        base_minutes=bar_interval,
        return_mode=return_mode,
    )
    base = MeasureConfig.model_validate(
        {
            **config.measures.model_dump(),
            **{key: value for key, value in updates.items() if value is not None},
        }
    )
    config = config.model_copy(update=dict(measures=base))
    days = load_intraday(intraday_path, bar_interval=bar_interval)
    env.logger.info("Loaded %s trading days of intraday bars", len(days))

    dates = np.array([day.date for day in days], dtype="datetime64[D]")
    returns = daily_returns(days, base.return_mode)
    measures = {}
    for kind in kinds or (base.kind.value,):
        measure_config = base.model_copy(update=dict(kind=MeasureKind(kind.lower())))
        _, values = compute_daily_measures(days, measure_config)
        measures[measure_config.kind.value] = values

    output = output or env.out_dir / "measures.csv"
    series = ReturnSeries(dates=dates, returns=returns, measures=measures)
    write_daily(series, output)
    env.logger.info(
        "Wrote %s days of measures to [green]%s[/]",
        len(series),
        output,
        extra={"markup": True, "highlighter": None},
    )
    write_run_config(env, config)

    table = new_table("Realized measures", ["Measure", "Days", "Absent", "Mean", "Std"])
    for measure_id, values in series.measures.items():
        present = values[np.isfinite(values)]
        table.add_row(
            measure_id,
            str(len(values)),
            str(len(values) - len(present)),
            format_number(float(present.mean()) if len(present) else None),
            format_number(float(present.std()) if len(present) > 1 else None),
        )
    print_table(table)

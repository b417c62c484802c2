import pathlib

import click
import numpy as np

from .cli import cli
from .cli_helpers import format_number
from .cli_helpers import handle_cli_errors
from .cli_helpers import model_options
from .cli_helpers import new_table
from .cli_helpers import open_series
from .cli_helpers import print_table
from .cli_helpers import resolve_config
from .cli_helpers import run_options
from .cli_helpers import resolve_model
from .cli_helpers import resolve_roster
from .cli_helpers import write_run_config
from .config import Estimator
from .config import ForecastConfig
from .environment import Environment
from .environment import pass_env
from .forecasting import rolling_forecast
from .forecasting import write_forecasts
from .market_data import ReturnMode


@cli.command(
    name="forecast",
    help="Rolling one day ahead VaR and ES forecasts over a fixed size window",
)
@click.option(
    "-d",
    "--data",
    "data_path",
    type=click.Path(exists=True, dir_okay=False, path_type=pathlib.Path),
    required=True,
    help="Daily CSV with date, close or return, and measure columns",
)
@model_options
@click.option(
    "--method",
    type=click.Choice([estimator.value for estimator in Estimator]),
    help="Estimator, defaults to forecast.estimator of the config",
)
@click.option("-w", "--window", type=click.IntRange(min=2), help="In-sample size")
@click.option(
    "--refit-every",
    type=click.IntRange(min=1),
    help="Steps between refits, defaults to forecast.refit_every of the config",
)
@click.option("--frozen", is_flag=True, help="Fit once and keep the parameters")
@click.option(
    "--return-mode",
    type=click.Choice([mode.value for mode in ReturnMode]),
    default=ReturnMode.CLOSE_TO_CLOSE.value,
    help="How returns are formed from price columns",
)
@click.option(
    "--allow-nonpositive-measures",
    is_flag=True,
    help="Accept signed measures such as simulated ones",
)
@run_options()
@pass_env
@handle_cli_errors()
def main(
    env: Environment,
    data_path: pathlib.Path,
    family: str | None,
    measure_id: str | None,
    alpha: float | None,
    threshold: float | None,
    method: str | None,
    window: int | None,
    refit_every: int | None,
    frozen: bool,
    return_mode: str,
    allow_nonpositive_measures: bool,
):
    config = resolve_config(env)
    spec = None
    if family is not None or config.model is not None:
        spec = resolve_model(config, family, measure_id, alpha, threshold)
    roster = resolve_roster(config, spec)
    payload = config.forecast.model_dump()
    if method is not None:
        payload["estimator"] = method
    if window is not None:
        payload["window"] = window
    if refit_every is not None:
        payload["refit_every"] = refit_every
    if frozen:
        payload["frozen"] = True
    forecast_config = ForecastConfig.model_validate(payload)
    config = config.model_copy(update=dict(forecast=forecast_config, roster=roster))

    series = open_series(data_path, ReturnMode(return_mode), allow_nonpositive_measures)
    seeds = np.random.SeedSequence(config.seed).spawn(len(roster))
    table = new_table(
        "Rolling forecasts", ["Model", "Forecasts", "Flagged", "Mean VaR", "Mean ES", "File"]
    )
    for spec, seed in zip(roster, seeds):
        model_series = series.complete(spec.measure_id) if spec.family.is_realized else series
        records = rolling_forecast(
            spec,
            model_series,
            forecast_config.estimator,
            forecast_config.window,
            refit_every=forecast_config.refit_stride,
            ml_config=config.ml,
            mcmc_config=config.mcmc,
            seed=int(seed.generate_state(1)[0]),
            threads=env.threads,
        )
        file_path = env.out_dir / f"{spec.model_id}.csv"
        write_forecasts(records, file_path)
        env.logger.info(
            "Wrote %s forecasts of [green]%s[/] to [green]%s[/]",
            len(records),
            spec.model_id,
            file_path,
            extra={"markup": True, "highlighter": None},
        )
        good = [record for record in records if record.ok]
        table.add_row(
            spec.model_id,
            str(len(records)),
            str(len(records) - len(good)),
            format_number(float(np.mean([record.var for record in good])) if good else None),
            format_number(float(np.mean([record.es for record in good])) if good else None),
            file_path.name,
        )
    write_run_config(env, config)
    print_table(table)

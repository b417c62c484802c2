import json
import pathlib

import click
import numpy as np
import pandas as pd

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
from .cli_helpers import write_run_config
from .config import Estimator
from .environment import Environment
from .environment import pass_env
from .estimation import fit_model
from .market_data import ReturnMode
from .models.recursions import forecast_one_step


@cli.command(name="fit", help="Estimate a model on a daily return series")
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
@click.option(
    "-c",
    "--config",
    "config_path",
    type=click.Path(exists=True, dir_okay=False, path_type=pathlib.Path),
    help="Run config for this fit, takes precedence over the global --config",
)
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
@click.option(
    "--dump-samples",
    is_flag=True,
    help="Write the retained MCMC iterates to samples.csv",
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
    config_path: pathlib.Path | None,
    return_mode: str,
    allow_nonpositive_measures: bool,
    dump_samples: bool,
):
    config = resolve_config(env, config_path)
    spec = resolve_model(config, family, measure_id, alpha, threshold)
    estimator = Estimator(method) if method is not None else config.forecast.estimator
    config = config.model_copy(
        update=dict(
            model=spec,
            forecast=config.forecast.model_copy(update=dict(estimator=estimator)),
        )
    )
    series = open_series(data_path, ReturnMode(return_mode), allow_nonpositive_measures)
    measures = None
    if spec.family.is_realized:
        series = series.complete(spec.measure_id)
        measures = series.measure(spec.measure_id)
    env.logger.info(
        "Fitting [green]%s[/] with %s on %s days",
        spec.model_id,
        estimator.value,
        len(series),
        extra={"markup": True, "highlighter": None},
    )
    result = fit_model(
        spec,
        series.returns,
        measures,
        estimator,
        config.ml,
        config.mcmc,
        np.random.default_rng(config.seed),
    )
    var_next, es_next = forecast_one_step(
        result.params,
        result.path,
        float(series.returns[-1]),
        None if measures is None else float(measures[-1]),
        alpha=spec.alpha,
        threshold=spec.threshold,
    )

    details = dict(result.details)
    samples = details.pop("samples", None)
    sample_names = details.pop("sample_names", None)
    env.out_dir.mkdir(parents=True, exist_ok=True)
    fit_path = env.out_dir / "fit.json"
    fit_path.write_text(
        json.dumps(
            dict(
                model=spec.model_id,
                family=spec.family.value,
                alpha=spec.alpha,
                estimator=result.estimator,
                converged=result.converged,
                loglik=result.loglik,
                params=result.params.as_dict(),
                var_next=var_next,
                es_next=es_next,
                details=details,
            ),
            indent=2,
            default=float,
        )
    )
    if dump_samples:
        if samples is None:
            env.logger.warning("No iterates to dump for the %s estimator", result.estimator)
        else:
            samples_path = env.out_dir / "samples.csv"
            pd.DataFrame(samples, columns=list(sample_names)).to_csv(
                samples_path, index=False, float_format="%.10g"
            )
            env.logger.info(
                "Wrote %s iterates to [green]%s[/]",
                len(samples),
                samples_path,
                extra={"markup": True, "highlighter": None},
            )
    write_run_config(env, config)

    table = new_table(f"{spec.model_id} fitted by {result.estimator}", ["Parameter", "Estimate"])
    for name, value in result.params.as_dict().items():
        table.add_row(name, format_number(value))
    table.add_row("loglik", format_number(result.loglik))
    table.add_row("VaR next day", format_number(var_next))
    table.add_row("ES next day", format_number(es_next))
    table.add_row("converged", format_number(result.converged))
    for name, rate in details.get("acceptance", {}).items():
        table.add_row(f"acceptance {name}", format_number(rate, 3))
    print_table(table)

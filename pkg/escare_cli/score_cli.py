import pathlib

import click
import pandas as pd

from .cli import cli
from .cli_helpers import format_number
from .cli_helpers import handle_cli_errors
from .cli_helpers import new_table
from .cli_helpers import open_series
from .cli_helpers import print_table
from .cli_helpers import resolve_config
from .cli_helpers import write_run_config
from .config import LossKind
from .environment import Environment
from .environment import pass_env
from .forecasting import model_ids
from .forecasting import read_forecasts
from .market_data import ReturnMode
from .reporting import loss_frame
from .reporting import score_forecasts
from .reporting import select_alpha


@cli.command(name="score", help="Score forecasts with VRate, ES rate, quantile and FZ losses")
@click.option(
    "-f",
    "--forecasts",
    "forecasts_path",
    type=click.Path(exists=True, path_type=pathlib.Path),
    required=True,
    help="Forecast CSV file or directory of forecast CSV files",
)
@click.option(
    "-r",
    "--returns",
    "returns_path",
    type=click.Path(exists=True, dir_okay=False, path_type=pathlib.Path),
    required=True,
    help="Daily CSV holding the realized returns",
)
@click.option(
    "--return-mode",
    type=click.Choice([mode.value for mode in ReturnMode]),
    default=ReturnMode.CLOSE_TO_CLOSE.value,
    help="How returns are formed from price columns",
)
@click.option(
    "--loss",
    type=click.Choice([kind.value for kind in LossKind]),
    help="Loss of the per-day losses.csv, defaults to mcs.loss of the config",
)
@click.option("--alpha", type=float, help="Score only forecasts at this level")
@pass_env
@handle_cli_errors()
def main(
    env: Environment,
    forecasts_path: pathlib.Path,
    returns_path: pathlib.Path,
    return_mode: str,
    loss: str | None,
    alpha: float | None,
):
    config = resolve_config(env)
    frame = select_alpha(read_forecasts(forecasts_path), alpha)
    series = open_series(returns_path, ReturnMode(return_mode), allow_nonpositive_measures=True)
    scores = score_forecasts(
        frame,
        series,
        returns_path.stem,
        config.backtest.model_copy(update=dict(tests=[])),
    )
    rows = [
        dict(
            model=score.model,
            alpha=score.alpha,
            m=score.m,
            vrate=score.vrate,
            es_rate=score.es_rate,
            quantile_loss=score.quantile_loss,
            fz_loss=score.fz_loss,
        )
        for score in scores.values()
    ]
    env.out_dir.mkdir(parents=True, exist_ok=True)
    scores_path = env.out_dir / "scores.csv"
    pd.DataFrame(rows).to_csv(scores_path, index=False, float_format="%.10g")
    loss_kind = LossKind(loss) if loss is not None else config.mcs.loss
    losses = loss_frame(frame, series, model_ids(frame), loss_kind)
    losses_path = env.out_dir / "losses.csv"
    losses.to_csv(losses_path, date_format="%Y-%m-%d", float_format="%.10g")
    for path in (scores_path, losses_path):
        env.logger.info(
            "Wrote [green]%s[/]",
            path,
            extra={"markup": True, "highlighter": None},
        )
    config = config.model_copy(
        update=dict(mcs=config.mcs.model_copy(update=dict(loss=loss_kind)))
    )
    write_run_config(env, config)

    table = new_table(
        "Forecast scores", ["Model", "Days", "VRate", "ES rate", "Quantile loss", "FZ loss"]
    )
    for row in rows:
        table.add_row(
            row["model"],
            str(row["m"]),
            format_number(row["vrate"], 4),
            format_number(row["es_rate"], 4),
            format_number(row["quantile_loss"]),
            format_number(row["fz_loss"]),
        )
    print_table(table)

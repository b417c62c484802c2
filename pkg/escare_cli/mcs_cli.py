import json
import pathlib

import click
import numpy as np
import pandas as pd

from .backtest import mcs
from .cli import cli
from .cli_helpers import format_number
from .cli_helpers import handle_cli_errors
from .cli_helpers import new_table
from .cli_helpers import open_series
from .cli_helpers import print_table
from .cli_helpers import resolve_config
from .cli_helpers import run_options
from .cli_helpers import write_run_config
from .config import LossKind
from .config import McsConfig
from .environment import Environment
from .environment import pass_env
from .errors import DataValidationError
from .forecasting import model_ids
from .forecasting import read_forecasts
from .reporting import loss_matrix


def read_losses(path: pathlib.Path) -> tuple[np.ndarray, list[str]]:
    """Wide loss CSV, one column per model and an optional date column"""
    frame = pd.read_csv(path)
    frame = frame.drop(columns=[column for column in frame.columns if column.lower() == "date"])
    if frame.shape[1] < 2:
        raise DataValidationError(f"Loss file {path} needs at least two model columns")
    try:
        losses = frame.to_numpy(dtype=np.float64)
    except ValueError as exc:
        raise DataValidationError(f"Non-numeric losses in {path}") from exc
    return losses, [str(column) for column in frame.columns]


@cli.command(name="mcs", help="Model confidence set of forecast losses, range statistic")
@click.option(
    "--losses",
    "losses_path",
    type=click.Path(exists=True, dir_okay=False, path_type=pathlib.Path),
    help="Wide CSV of per-day losses, one column per model",
)
@click.option(
    "-f",
    "--forecasts",
    "forecasts_path",
    type=click.Path(exists=True, path_type=pathlib.Path),
    help="Forecast CSV file or directory, used with --returns instead of --losses",
)
@click.option(
    "-r",
    "--returns",
    "returns_path",
    type=click.Path(exists=True, dir_okay=False, path_type=pathlib.Path),
    help="Daily CSV holding the realized returns",
)
@click.option(
    "--loss",
    type=click.Choice([kind.value for kind in LossKind]),
    help="Loss computed from forecasts",
)
@click.option("--level", type=float, help="Confidence level of the set")
@click.option(
    "-B",
    "--B",
    "--bootstrap-replicates",
    "bootstrap_replicates",
    type=click.IntRange(min=1),
    help="Block bootstrap replicates",
)
@click.option("--block-length", type=click.IntRange(min=1), help="Bootstrap block length")
@run_options()
@pass_env
@handle_cli_errors()
def main(
    env: Environment,
    losses_path: pathlib.Path | None,
    forecasts_path: pathlib.Path | None,
    returns_path: pathlib.Path | None,
    loss: str | None,
    level: float | None,
    bootstrap_replicates: int | None,
    block_length: int | None,
):
    config = resolve_config(env)
    updates = dict(
        loss=loss,
        level=level,
        bootstrap_replicates=bootstrap_replicates,
        block_length=block_length,
    )
    mcs_config = McsConfig.model_validate(
        {
            **config.mcs.model_dump(),
            **{key: value for key, value in updates.items() if value is not None},
        }
    )
    config = config.model_copy(update=dict(mcs=mcs_config))
    if losses_path is not None:
        losses, names = read_losses(losses_path)
    elif forecasts_path is not None and returns_path is not None:
        frame = read_forecasts(forecasts_path)
        series = open_series(returns_path, allow_nonpositive_measures=True)
        losses, names = loss_matrix(frame, series, model_ids(frame), mcs_config.loss)
    else:
        raise DataValidationError("Pass --losses, or --forecasts together with --returns")

    result = mcs(
        losses,
        names,
        level=mcs_config.level,
        bootstrap_replicates=mcs_config.bootstrap_replicates,
        block_length=mcs_config.block_length,
        rng=np.random.default_rng(config.seed),
    )
    env.out_dir.mkdir(parents=True, exist_ok=True)
    mcs_path = env.out_dir / "mcs.json"
    mcs_path.write_text(
        json.dumps(
            dict(
                level=result.level,
                included=result.included,
                eliminated=result.eliminated,
                pvalues=result.pvalues,
            ),
            indent=2,
        )
    )
    env.logger.info(
        "Wrote model confidence set to [green]%s[/]",
        mcs_path,
        extra={"markup": True, "highlighter": None},
    )
    write_run_config(env, config)

    table = new_table(
        f"{result.level:.0%} model confidence set", ["Model", "Mean loss", "p-value", "Included"]
    )
    mean_losses = losses.mean(axis=0)
    for name, mean_loss in zip(names, mean_losses):
        table.add_row(
            name,
            format_number(float(mean_loss)),
            format_number(result.pvalues[name], 3),
            format_number(name in result.included),
        )
    print_table(table)

import json
import pathlib

import click

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
from .forecasting import read_forecasts
from .market_data import ReturnMode
from .reporting import DQ_CONVENTION
from .reporting import parse_tests
from .reporting import score_forecasts
from .reporting import select_alpha


@cli.command(name="backtest", help="Run coverage backtests on VaR and ES forecasts")
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
    "-t",
    "--tests",
    type=str,
    help="Comma separated tests among uc, cc, dq1, dq4, vqr and es",
)
@click.option(
    "-o",
    "--out",
    "--output",
    "output",
    type=click.Path(dir_okay=False, path_type=pathlib.Path),
    help="JSON report path, defaults to backtest.json in the run output directory",
)
@click.option(
    "--return-mode",
    type=click.Choice([mode.value for mode in ReturnMode]),
    default=ReturnMode.CLOSE_TO_CLOSE.value,
    help="How returns are formed from price columns",
)
@click.option("--alpha", type=float, help="Backtest only forecasts at this level")
@pass_env
@handle_cli_errors()
def main(
    env: Environment,
    forecasts_path: pathlib.Path,
    returns_path: pathlib.Path,
    tests: str | None,
    output: pathlib.Path | None,
    return_mode: str,
    alpha: float | None,
):
    config = resolve_config(env)
    backtest_config = config.backtest.model_copy(
        update=dict(tests=parse_tests(tests if tests is not None else config.backtest.tests))
    )
    config = config.model_copy(update=dict(backtest=backtest_config))
    frame = select_alpha(read_forecasts(forecasts_path), alpha)
    series = open_series(returns_path, ReturnMode(return_mode), allow_nonpositive_measures=True)
    scores = score_forecasts(frame, series, returns_path.stem, backtest_config)

    output = output or env.out_dir / "backtest.json"
    output.parent.mkdir(parents=True, exist_ok=True)
    output.write_text(
        json.dumps(
            dict(
                dq_convention=DQ_CONVENTION,
                significance=backtest_config.significance,
                models=[score.as_dict() for score in scores.values()],
            ),
            indent=2,
            default=float,
        )
    )
    env.logger.info(
        "Wrote backtest report to [green]%s[/]",
        output,
        extra={"markup": True, "highlighter": None},
    )
    write_run_config(env, config)

    table = new_table(
        "Backtest p-values",
        ["Model", "VRate", "ES rate", *[name.upper() for name in backtest_config.tests]],
    )
    for score in scores.values():
        cells = []
        for name in backtest_config.tests:
            result = score.tests.get(name)
            if result is None:
                cells.append("-")
                continue
            marker = "*" if result.p_value < backtest_config.significance else ""
            cells.append(f"{format_number(result.p_value, 3)}{marker}")
        table.add_row(
            score.model,
            format_number(score.vrate, 4),
            format_number(score.es_rate, 4),
            *cells,
        )
    print_table(table)

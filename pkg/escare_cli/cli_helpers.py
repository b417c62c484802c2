import functools
import logging
import math
import pathlib
import sys
import typing

import click
import numpy as np
import rich
from pydantic import ValidationError
from rich import box
from rich.padding import Padding
from rich.table import Table

from .config import load_config
from .config import RUN_CONFIG_FILENAME
from .config import RunConfig
from .config import save_config
from .config_errors import enrich_tree
from .config_errors import errors_to_tree
from .environment import Environment
from .errors import DataValidationError
from .errors import NumericalError
from .market_data import load_daily
from .market_data import ReturnMode
from .market_data import ReturnSeries
from .models.spec import ModelFamily
from .models.spec import ModelSpec

EXIT_VALIDATION_ERROR = 1
EXIT_NUMERICAL_ERROR = 2
TABLE_HEADER_STYLE = "yellow"
TABLE_COLUMN_STYLE = "cyan"


def handle_cli_errors(logger: logging.Logger | None = None):
    """Map library failures of a command onto its exit code"""

    def decorator(func: typing.Callable):
        @functools.wraps(func)
        def callee(*args, **kwargs):
            log = logger or logging.getLogger(__name__)
            try:
                return func(*args, **kwargs)
            except ValidationError as exc:
                log.error("Invalid config with errors:")
                rich.print(enrich_tree(errors_to_tree(exc.errors())))
                sys.exit(EXIT_VALIDATION_ERROR)
            except DataValidationError as exc:
                log.error("Validation failed: %s", exc)
                sys.exit(EXIT_VALIDATION_ERROR)
            except NumericalError as exc:
                log.error("Numerical failure: %s", exc)
                sys.exit(EXIT_NUMERICAL_ERROR)

        return callee

    return decorator


def _env_setter(field: str) -> typing.Callable:
    def callback(ctx: click.Context, param: click.Parameter, value: typing.Any):
        if value is not None:
            setattr(ctx.ensure_object(Environment), field, value)
        return value

    return callback


def run_options(out_dir: bool = True) -> typing.Callable:
    """Command level --seed and --out, overriding the global options when given"""

    def decorator(func: typing.Callable) -> typing.Callable:
        decorators = [
            click.option(
                "--seed",
                type=int,
                expose_value=False,
                callback=_env_setter("seed"),
                help="Seed of every random stream, overrides the global --seed",
            )
        ]
        if out_dir:
            decorators.append(
                click.option(
                    "--out",
                    type=click.Path(file_okay=False, path_type=pathlib.Path),
                    expose_value=False,
                    callback=_env_setter("out_dir"),
                    help="Directory for output files, overrides the global --out",
                )
            )
        for option in reversed(decorators):
            func = option(func)
        return func

    return decorator


def model_options(func: typing.Callable) -> typing.Callable:
    """--model, --measure, --alpha and --threshold, each falling back to the config file"""
    decorators = [
        click.option(
            "-m",
            "--model",
            "family",
            type=click.Choice([family.value for family in ModelFamily]),
            help="Model family, defaults to model.family of the config",
        ),
        click.option(
            "--measure",
            "measure_id",
            type=str,
            help="Realized measure column used by the realized families",
        ),
        click.option("--alpha", type=float, help="Tail probability level"),
        click.option(
            "--threshold",
            type=float,
            help="Lagged return threshold of the threshold family",
        ),
    ]
    for decorator in reversed(decorators):
        func = decorator(func)
    return func


def resolve_config(env: Environment, config_path: pathlib.Path | None = None) -> RunConfig:
    config = load_config(config_path or env.config_path)
    if env.seed is not None:
        config = config.model_copy(update=dict(seed=env.seed))
    return config


def resolve_model(
    config: RunConfig,
    family: str | None,
    measure_id: str | None,
    alpha: float | None,
    threshold: float | None,
) -> ModelSpec:
    payload = config.model.model_dump() if config.model is not None else {}
    overrides = dict(
        family=family, measure_id=measure_id, alpha=alpha, threshold=threshold
    )
    payload.update({key: value for key, value in overrides.items() if value is not None})
    if "family" not in payload:
        raise DataValidationError("No model given, pass --model or set model.family in the config")
    return ModelSpec.model_validate(payload)


def resolve_roster(config: RunConfig, spec: ModelSpec | None) -> list[ModelSpec]:
    if spec is not None:
        return [spec]
    if not config.roster:
        raise DataValidationError("No model given, pass --model or set roster in the config")
    return list(config.roster)


def open_series(
    path: pathlib.Path,
    mode: ReturnMode = ReturnMode.CLOSE_TO_CLOSE,
    allow_nonpositive_measures: bool = False,
) -> ReturnSeries:
    return load_daily(path, mode=mode, positive_measures=not allow_nonpositive_measures)


def write_run_config(env: Environment, config: RunConfig) -> pathlib.Path:
    path = env.out_dir / RUN_CONFIG_FILENAME
    save_config(config, path)
    env.logger.info(
        "Wrote resolved config to [green]%s[/]",
        path,
        extra={"markup": True, "highlighter": None},
    )
    return path


def format_number(value: float | None, digits: int = 6) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "-"
    if isinstance(value, (bool, np.bool_)):
        return "yes" if value else "no"
    return f"{value:.{digits}g}"


def new_table(title: str, columns: list[str]) -> Table:
    table = Table(
        title=title,
        box=box.SIMPLE,
        header_style=TABLE_HEADER_STYLE,
        expand=True,
    )
    for column in columns:
        table.add_column(column, style=TABLE_COLUMN_STYLE)
    return table


def print_table(table: Table):
    rich.print(Padding(table, (1, 0, 0, 4)))

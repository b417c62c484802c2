import logging
import os
import pathlib

import click
from rich.logging import Console
from rich.logging import RichHandler

from .aliase import AliasedGroup
from .environment import Environment
from .environment import LOG_LEVEL_MAP
from .environment import LogLevel
from .environment import pass_env
from .settings import settings


@click.group(
    help="Command line tools for expectile based VaR and ES models", cls=AliasedGroup
)
@click.option(
    "-l",
    "--log-level",
    type=click.Choice(
        list(map(lambda key: key.value, LOG_LEVEL_MAP.keys())), case_sensitive=False
    ),
    default=lambda: os.environ.get("LOG_LEVEL", "INFO"),
)
@click.option(
    "--seed",
    type=int,
    default=lambda: settings.SEED,
    help="Seed of every random stream used by the command",
)
@click.option(
    "--threads",
    type=click.IntRange(min=1),
    default=lambda: settings.THREADS,
    help="Number of worker processes for independent jobs",
)
@click.option(
    "--config",
    "config_path",
    type=click.Path(exists=True, dir_okay=False, path_type=pathlib.Path),
    help="TOML, YAML or JSON run config file",
)
@click.option(
    "--out",
    "out_dir",
    type=click.Path(file_okay=False, path_type=pathlib.Path),
    default=lambda: settings.OUT_DIR,
    help="Directory for output files",
)
@click.version_option(prog_name="escare-cli", package_name="escare-cli")
@pass_env
def cli(
    env: Environment,
    log_level: str,
    seed: int | None,
    threads: int,
    config_path: pathlib.Path | None,
    out_dir: pathlib.Path,
):
    env.log_level = LogLevel(log_level.lower())
    env.seed = seed
    env.threads = threads
    env.config_path = config_path
    env.out_dir = pathlib.Path(out_dir)
    FORMAT = "%(message)s"
    console = Console(stderr=True)
    logging.basicConfig(
        level=LOG_LEVEL_MAP[env.log_level],
        format=FORMAT,
        datefmt="[%X]",
        handlers=[RichHandler(console=console)],
        force=True,
    )
    numba_logger = logging.getLogger("numba")
    numba_logger.level = logging.WARNING

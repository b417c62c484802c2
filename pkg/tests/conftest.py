import pathlib

import numpy as np
import pytest
from click.testing import CliRunner

from .factories import DgpSpecFactory
from escare_cli.market_data import ReturnSeries
from escare_cli.market_data import write_daily
from escare_cli.simulator import simulate


@pytest.fixture
def cli_runner() -> CliRunner:
    return CliRunner()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240607)


@pytest.fixture
def sim_series() -> ReturnSeries:
    return simulate(DgpSpecFactory(n=400, seed=11)).to_series()


@pytest.fixture
def daily_csv(tmp_path: pathlib.Path, sim_series: ReturnSeries) -> pathlib.Path:
    file_path = tmp_path / "daily.csv"
    write_daily(sim_series, file_path)
    return file_path

import enum
import json
import pathlib
import typing

import yaml
from pydantic import BaseModel
from pydantic import Field
from pydantic import model_validator

from .errors import DataValidationError
from .market_data import ReturnMode
from .models.spec import ModelSpec

RUN_CONFIG_FILENAME = "run-config.toml"


@enum.unique
class MeasureKind(str, enum.Enum):
    RV = "rv"
    RR = "rr"
    SCRV = "scrv"
    SCRR = "scrr"
    SSRV = "ssrv"
    SSRR = "ssrr"

    @property
    def is_range(self) -> bool:
        return self in (MeasureKind.RR, MeasureKind.SCRR, MeasureKind.SSRR)

    @property
    def is_scaled(self) -> bool:
        return self in (MeasureKind.SCRV, MeasureKind.SCRR)

    @property
    def is_subsampled(self) -> bool:
        return self in (MeasureKind.SSRV, MeasureKind.SSRR)


@enum.unique
class ScalingProxy(str, enum.Enum):
    PARKINSON = "parkinson"
    SQUARED_RANGE = "squared-range"


@enum.unique
class Estimator(str, enum.Enum):
    ML = "ml"
    MCMC = "mcmc"


@enum.unique
class LossKind(str, enum.Enum):
    FZ = "fz"
    QUANTILE = "quantile"


@enum.unique
class SimModel(int, enum.Enum):
    LINEAR = 1
    THRESHOLD = 2


class MeasureConfig(BaseModel):
    kind: MeasureKind = MeasureKind.RR
    interval_minutes: int = Field(5, ge=1)
    # inferred from the intraday data when not set
    base_minutes: int | None = Field(None, ge=1)
    scaling_lookback: int = Field(66, ge=1)
    # defaults to interval_minutes / base_minutes
    subsample_offsets: int | None = Field(None, ge=1)
    scaling_proxy: ScalingProxy = ScalingProxy.PARKINSON
    # daily return squared into the proxy of the scaled variance measures
    return_mode: ReturnMode = ReturnMode.CLOSE_TO_CLOSE


class MlConfig(BaseModel):
    n_random_starts: int = Field(10_000, ge=1)
    tolerance: float = Field(1e-8, gt=0)
    max_iterations: int = Field(20_000, ge=1)
    seed: int | None = None
    expectile_starts: int = Field(200, ge=1)
    expectile_refine: int = Field(3, ge=1)
    # expectile level of the step one regression, Gaussian implied level when unset
    step1_tau: float | None = Field(None, gt=0, lt=0.5)
    care_grid_size: int = Field(50, ge=1)
    care_grid: list[float] | None = None


class McmcConfig(BaseModel):
    epoch_length: int = Field(20_000, ge=1)
    epoch_discard: int = Field(2_000, ge=0)
    final_epoch: int = Field(12_000, ge=1)
    final_discard: int = Field(2_000, ge=0)
    convergence_threshold: float = Field(0.10, gt=0)
    mixture_scales: tuple[float, ...] = (1.0, 100.0, 0.01)
    max_epochs: int = Field(15, ge=1)
    tuning_interval: int = Field(100, ge=1)
    seed: int | None = None

    @model_validator(mode="after")
    def check_discards(self) -> "McmcConfig":
        if self.epoch_discard >= self.epoch_length:
            raise ValueError("epoch_discard must be smaller than epoch_length")
        if self.final_discard >= self.final_epoch:
            raise ValueError("final_discard must be smaller than final_epoch")
        if not self.mixture_scales or any(scale <= 0 for scale in self.mixture_scales):
            raise ValueError("mixture_scales must be positive")
        return self


class DgpSpec(BaseModel):
    model: SimModel = SimModel.LINEAR
    n: int = Field(1900, ge=100)
    seed: int | None = None
    burn_in: int = Field(200, ge=0)


class ForecastConfig(BaseModel):
    estimator: Estimator = Estimator.MCMC
    window: int = Field(1000, ge=2)
    refit_every: int = Field(1, ge=1)
    # fit once and keep the parameters
    frozen: bool = False

    @property
    def refit_stride(self) -> int | None:
        return None if self.frozen else self.refit_every


class BacktestConfig(BaseModel):
    tests: list[str] = ["uc", "cc", "dq1", "dq4", "vqr", "es"]
    es_target: float = Field(0.0035, gt=0, lt=1)
    significance: float = Field(0.05, gt=0, lt=1)


class McsConfig(BaseModel):
    level: float = Field(0.90, gt=0, lt=1)
    bootstrap_replicates: int = Field(5_000, ge=100)
    # defaults to ceil(m ** (1 / 3))
    block_length: int | None = Field(None, ge=1)
    loss: LossKind = LossKind.FZ


class StudyConfig(BaseModel):
    replicates: int = Field(100, ge=1)
    estimators: list[Estimator] = [Estimator.MCMC, Estimator.ML]


class RunConfig(BaseModel):
    seed: int | None = None
    model: ModelSpec | None = None
    roster: list[ModelSpec] = []
    measures: MeasureConfig = MeasureConfig()
    ml: MlConfig = MlConfig()
    mcmc: McmcConfig = McmcConfig()
    dgp: DgpSpec = DgpSpec()
    forecast: ForecastConfig = ForecastConfig()
    backtest: BacktestConfig = BacktestConfig()
    mcs: McsConfig = McsConfig()
    study: StudyConfig = StudyConfig()


def _read_payload(file_path: pathlib.Path) -> typing.Any:
    suffix = file_path.suffix.lower()
    if suffix == ".toml":
        import tomli

        with file_path.open("rb") as fo:
            return tomli.load(fo)
    elif suffix in (".yaml", ".yml"):
        with file_path.open("rt") as fo:
            return yaml.safe_load(fo)
    elif suffix == ".json":
        with file_path.open("rt") as fo:
            return json.load(fo)
    raise DataValidationError(
        f"Unsupported config format {suffix!r}, expected .toml, .yaml or .json"
    )


def load_config(file_path: pathlib.Path | None = None) -> RunConfig:
    if file_path is None:
        return RunConfig()
    if not file_path.exists():
        raise DataValidationError(f"Config file at {file_path} does not exist")
    payload = _read_payload(file_path)
    return RunConfig.model_validate(payload or {})


def save_config(config: RunConfig, file_path: pathlib.Path):
    import tomli_w

    file_path.parent.mkdir(parents=True, exist_ok=True)
    with file_path.open("wb") as fo:
        obj = config.model_dump(mode="json", exclude_none=True)
        tomli_w.dump(obj, fo)

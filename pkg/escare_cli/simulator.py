import dataclasses
import logging

import numpy as np
import pandas as pd
from scipy import stats

from .config import DgpSpec
from .config import SimModel
from .errors import DataValidationError
from .market_data import ReturnSeries
from .models.recursions import gaussian_expectile_level
from .models.spec import ModelFamily
from .models.spec import ParamVector

logger = logging.getLogger(__name__)

SIM_MEASURE_ID = "x"
SIM_START_DATE = "2000-01-03"

# (intercept, measure loading, persistence) of the volatility equation
LINEAR_VOLATILITY = (0.02, 0.10, 0.85)
LOW_REGIME_VOLATILITY = (0.05, 0.20, 0.80)
HIGH_REGIME_VOLATILITY = (0.10, 0.10, 0.75)
MEASURE_INTERCEPT = 0.1
MEASURE_LOADING = 0.9
LEVERAGE_LINEAR = -0.02
LEVERAGE_QUADRATIC = 0.02
MEASURE_NOISE_SD = 0.3


@dataclasses.dataclass(frozen=True)
class SimulatedPath:
    returns: np.ndarray
    measures: np.ndarray
    sqrt_h: np.ndarray
    # volatility of the day after the sample, drives the true one step forecasts
    sqrt_h_next: float

    def to_series(self, start: str = SIM_START_DATE) -> ReturnSeries:
        dates = pd.bdate_range(start=start, periods=len(self.returns))
        return ReturnSeries(
            dates=dates.to_numpy(dtype="datetime64[D]"),
            returns=self.returns,
            measures={SIM_MEASURE_ID: self.measures},
            positive_measures=False,
        )


@dataclasses.dataclass(frozen=True)
class TrueRisk:
    var: np.ndarray
    es: np.ndarray
    tau: float


@dataclasses.dataclass(frozen=True)
class TrueParameters:
    params: ParamVector
    eps_sq_mean: float


def _regimes(model: SimModel) -> tuple[tuple[float, ...], tuple[float, ...]]:
    if model == SimModel.LINEAR:
        return LINEAR_VOLATILITY, LINEAR_VOLATILITY
    return LOW_REGIME_VOLATILITY, HIGH_REGIME_VOLATILITY


def unconditional_sqrt_h(model: SimModel) -> float:
    low, high = _regimes(model)
    # regimes are equally likely under symmetric shocks
    a, b, c = (np.array(low) + np.array(high)) / 2.0
    return float((a + b * MEASURE_INTERCEPT) / (1.0 - c - b * MEASURE_LOADING))


def simulate(
    spec: DgpSpec,
    rng: np.random.Generator | None = None,
    shocks: np.ndarray | None = None,
    noise: np.ndarray | None = None,
) -> SimulatedPath:
    """Realized GARCH style data, the first burn_in draws discarded.

    shocks and noise override the standard normal return shocks and the
    measurement noise, each of length burn_in + n.
    """
    total = spec.burn_in + spec.n
    rng = rng or np.random.default_rng(spec.seed)
    if shocks is None:
        shocks = rng.standard_normal(total)
    if noise is None:
        noise = rng.normal(0.0, MEASURE_NOISE_SD, size=total)
    shocks = np.asarray(shocks, dtype=np.float64)
    noise = np.asarray(noise, dtype=np.float64)
    if shocks.shape != (total,) or noise.shape != (total,):
        raise DataValidationError(f"Shocks and noise must have length {total}")

    low, high = _regimes(spec.model)
    sqrt_h = np.empty(total)
    measures = np.empty(total)
    returns = np.empty(total)
    prev_sqrt_h = unconditional_sqrt_h(spec.model)
    prev_x = MEASURE_INTERCEPT + MEASURE_LOADING * prev_sqrt_h
    prev_r = 0.0
    for t in range(total):
        a, b, c = low if prev_r <= 0.0 else high
        sqrt_h[t] = a + b * prev_x + c * prev_sqrt_h
        returns[t] = sqrt_h[t] * shocks[t]
        measures[t] = (
            MEASURE_INTERCEPT
            + MEASURE_LOADING * sqrt_h[t]
            + LEVERAGE_LINEAR * shocks[t]
            + LEVERAGE_QUADRATIC * (shocks[t] ** 2 - 1.0)
            + noise[t]
        )
        prev_sqrt_h, prev_x, prev_r = sqrt_h[t], measures[t], returns[t]
    a, b, c = low if prev_r <= 0.0 else high
    keep = slice(spec.burn_in, None)
    return SimulatedPath(
        returns=returns[keep],
        measures=measures[keep],
        sqrt_h=sqrt_h[keep],
        sqrt_h_next=float(a + b * prev_x + c * prev_sqrt_h),
    )


def simulate_replicates(spec: DgpSpec, reps: int) -> list[SimulatedPath]:
    seeds = np.random.SeedSequence(spec.seed).spawn(reps)
    return [simulate(spec, rng=np.random.default_rng(seed)) for seed in seeds]


def true_tau(alpha: float) -> float:
    return gaussian_expectile_level(alpha)


def map_to_escare(
    model: SimModel, alpha: float, sigma_u: float = MEASURE_NOISE_SD
) -> TrueParameters:
    """Parameters of the realized ES-CARE model implied by the simulation model"""
    if not 0.0 < alpha < 0.5:
        raise DataValidationError(f"alpha must be in (0, 0.5), got {alpha}")
    z = float(stats.norm.ppf(alpha))
    low, high = _regimes(model)
    measurement = {
        "tau": true_tau(alpha),
        "xi": MEASURE_INTERCEPT,
        "phi": -MEASURE_LOADING / z,
        "delta1": LEVERAGE_LINEAR * z,
        "delta2": LEVERAGE_QUADRATIC * z * z,
        "sigma_u": sigma_u,
    }
    betas = {"beta1": low[0] * z, "beta2": low[1] * z, "beta3": low[2]}
    family = ModelFamily.RE_ES_CARE
    if model == SimModel.THRESHOLD:
        family = ModelFamily.RE_T_ES_CARE
        betas.update(beta4=high[0] * z, beta5=high[1] * z, beta6=high[2])
    return TrueParameters(
        params=ParamVector.from_dict(family, {**betas, **measurement}),
        eps_sq_mean=1.0 / (z * z),
    )


def true_risk(sqrt_h: np.ndarray, alpha: float) -> TrueRisk:
    sqrt_h = np.asarray(sqrt_h, dtype=np.float64)
    if np.any(sqrt_h <= 0.0):
        raise DataValidationError("Volatilities must be positive")
    z = stats.norm.ppf(alpha)
    return TrueRisk(
        var=sqrt_h * z,
        es=-sqrt_h * stats.norm.pdf(z) / alpha,
        tau=true_tau(alpha),
    )

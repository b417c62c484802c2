import concurrent.futures
import dataclasses
import logging

import numpy as np
import pandas as pd

from .config import DgpSpec
from .config import Estimator
from .config import McmcConfig
from .config import MlConfig
from .config import SimModel
from .errors import EscareError
from .estimation import fit_model
from .models.recursions import forecast_one_step
from .models.spec import ModelFamily
from .models.spec import ModelSpec
from .simulator import map_to_escare
from .simulator import SIM_MEASURE_ID
from .simulator import simulate
from .simulator import true_risk
from .simulator import TrueParameters

logger = logging.getLogger(__name__)

VAR_NEXT = "var_next"
ES_NEXT = "es_next"


@dataclasses.dataclass(frozen=True)
class ReplicateOutcome:
    replicate: int
    estimator: Estimator
    params: dict[str, float] | None
    var_next: float
    es_next: float
    true_var_next: float
    true_es_next: float
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclasses.dataclass(frozen=True)
class StudySummary:
    # one row per quantity, true value then mean and RMSE per estimator
    table: pd.DataFrame
    sign_agreement: dict[Estimator, float]
    failures: dict[Estimator, int]


def study_family(model: SimModel) -> ModelFamily:
    if model == SimModel.THRESHOLD:
        return ModelFamily.RE_T_ES_CARE
    return ModelFamily.RE_ES_CARE


def _run_replicate(
    index: int,
    dgp: DgpSpec,
    seed: np.random.SeedSequence,
    estimators: list[Estimator],
    alpha: float,
    ml_config: MlConfig,
    mcmc_config: McmcConfig,
) -> list[ReplicateOutcome]:
    simulate_seed, *fit_seeds = seed.spawn(1 + len(estimators))
    path = simulate(dgp, rng=np.random.default_rng(simulate_seed))
    truth = true_risk(np.array([path.sqrt_h_next]), alpha)
    spec = ModelSpec(family=study_family(dgp.model), alpha=alpha, measure_id=SIM_MEASURE_ID)
    outcomes = []
    for estimator, fit_seed in zip(estimators, fit_seeds):
        try:
            fit = fit_model(
                spec,
                path.returns,
                path.measures,
                estimator,
                ml_config,
                mcmc_config,
                np.random.default_rng(fit_seed),
            )
            var, es = forecast_one_step(
                fit.params,
                fit.path,
                float(path.returns[-1]),
                float(path.measures[-1]),
                alpha=alpha,
                threshold=spec.threshold,
            )
        except EscareError as exc:
            logger.warning("Replicate %s with %s failed: %s", index, estimator.value, exc)
            outcomes.append(
                ReplicateOutcome(
                    replicate=index,
                    estimator=estimator,
                    params=None,
                    var_next=np.nan,
                    es_next=np.nan,
                    true_var_next=float(truth.var[0]),
                    true_es_next=float(truth.es[0]),
                    error=str(exc),
                )
            )
            continue
        outcomes.append(
            ReplicateOutcome(
                replicate=index,
                estimator=estimator,
                params=fit.params.as_dict(),
                var_next=var,
                es_next=es,
                true_var_next=float(truth.var[0]),
                true_es_next=float(truth.es[0]),
            )
        )
    return outcomes


def sign_pattern_matches(params: dict[str, float], truth: TrueParameters) -> bool:
    true_values = truth.params.as_dict()
    betas = [name for name in true_values if name.startswith("beta")]
    return all(np.sign(params[name]) == np.sign(true_values[name]) for name in betas)


def summarize(
    outcomes: list[ReplicateOutcome],
    truth: TrueParameters,
    estimators: list[Estimator],
) -> StudySummary:
    true_values = truth.params.as_dict()
    quantities = [*true_values, VAR_NEXT, ES_NEXT]
    table = pd.DataFrame(index=pd.Index(quantities, name="quantity"))
    usable = [outcome for outcome in outcomes if outcome.ok]
    table["true"] = [
        *true_values.values(),
        float(np.mean([outcome.true_var_next for outcome in outcomes])) if outcomes else np.nan,
        float(np.mean([outcome.true_es_next for outcome in outcomes])) if outcomes else np.nan,
    ]
    sign_agreement = {}
    failures = {}
    for estimator in estimators:
        rows = [outcome for outcome in usable if outcome.estimator == estimator]
        failures[estimator] = sum(
            1 for outcome in outcomes if outcome.estimator == estimator and not outcome.ok
        )
        if not rows:
            table[f"{estimator.value}_mean"] = np.nan
            table[f"{estimator.value}_rmse"] = np.nan
            sign_agreement[estimator] = np.nan
            continue
        estimates = np.array(
            [[outcome.params[name] for name in true_values] + [outcome.var_next, outcome.es_next] for outcome in rows]
        )
        targets = np.array(
            [[*true_values.values(), outcome.true_var_next, outcome.true_es_next] for outcome in rows]
        )
        table[f"{estimator.value}_mean"] = estimates.mean(axis=0)
        table[f"{estimator.value}_rmse"] = np.sqrt(np.mean((estimates - targets) ** 2, axis=0))
        sign_agreement[estimator] = float(
            np.mean([sign_pattern_matches(outcome.params, truth) for outcome in rows])
        )
    return StudySummary(table=table, sign_agreement=sign_agreement, failures=failures)


def run_study(
    dgp: DgpSpec,
    replicates: int,
    estimators: list[Estimator],
    alpha: float = 0.01,
    ml_config: MlConfig = MlConfig(),
    mcmc_config: McmcConfig = McmcConfig(),
    seed: int | None = None,
    threads: int = 1,
) -> tuple[list[ReplicateOutcome], StudySummary]:
    """Fit the matching realized model to simulated replicates and compare with the truth"""
    seeds = np.random.SeedSequence(seed if seed is not None else dgp.seed).spawn(replicates)
    args = [
        (index, dgp, replicate_seed, estimators, alpha, ml_config, mcmc_config)
        for index, replicate_seed in enumerate(seeds)
    ]
    logger.info(
        "Running %s replicates of simulation model %s with %s",
        replicates,
        dgp.model.value,
        ", ".join(estimator.value for estimator in estimators),
    )
    if threads > 1 and replicates > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=threads) as executor:
            results = list(executor.map(_run_replicate, *zip(*args)))
    else:
        results = [_run_replicate(*arg) for arg in args]
    outcomes = [outcome for replicate in results for outcome in replicate]
    truth = map_to_escare(dgp.model, alpha)
    return outcomes, summarize(outcomes, truth, estimators)

import dataclasses

import numpy as np

from ..config import Estimator
from ..config import McmcConfig
from ..config import MlConfig
from ..models.recursions import InitRule
from ..models.recursions import RiskPath
from ..models.recursions import run_baseline
from ..models.spec import ModelFamily
from ..models.spec import ModelSpec
from ..models.spec import ParamVector
from .expectile import care_grid_search
from .expectile import default_care_grid
from .mcmc import fit_mcmc
from .ml import fit_ml


@dataclasses.dataclass(frozen=True)
class FitResult:
    spec: ModelSpec
    estimator: str
    params: ParamVector
    loglik: float | None
    converged: bool
    path: RiskPath
    details: dict


def fit_model(
    spec: ModelSpec,
    returns: np.ndarray,
    measures: np.ndarray | None,
    estimator: Estimator,
    ml_config: MlConfig,
    mcmc_config: McmcConfig,
    rng: np.random.Generator,
    init: InitRule = InitRule(),
) -> FitResult:
    """Fit any family, CARE-SAV always through the expectile level grid search"""
    if spec.family == ModelFamily.CARE_SAV:
        grid = care_grid_search(
            returns,
            spec.alpha,
            (
                default_care_grid(spec.alpha, ml_config.care_grid_size)
                if ml_config.care_grid is None
                else np.array(ml_config.care_grid)
            ),
            starts=ml_config.expectile_starts,
            refine=ml_config.expectile_refine,
            tolerance=ml_config.tolerance,
            max_iterations=ml_config.max_iterations,
            rng=rng,
        )
        path = run_baseline(spec.family, grid.params, returns, spec.alpha, init)
        return FitResult(
            spec=spec,
            estimator="grid",
            params=grid.params,
            loglik=None,
            converged=True,
            path=path,
            details=dict(vrate=grid.vrate),
        )
    if estimator == Estimator.ML:
        result = fit_ml(spec, returns, measures, ml_config, rng=rng, init=init)
        return FitResult(
            spec=spec,
            estimator=estimator.value,
            params=result.params,
            loglik=result.loglik,
            converged=result.report.converged,
            path=result.path,
            details=dataclasses.asdict(result.report),
        )
    result = fit_mcmc(
        spec, returns, measures, mcmc_config, ml_config, rng=rng, init=init
    )
    return FitResult(
        spec=spec,
        estimator=estimator.value,
        params=result.params,
        loglik=result.loglik,
        converged=result.converged,
        path=result.path,
        details=dict(
            acceptance=result.acceptance,
            burnin_epochs=result.burnin_epochs,
            samples=result.samples,
            sample_names=result.names,
        ),
    )

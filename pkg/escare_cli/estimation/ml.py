import dataclasses
import logging

import numpy as np
from scipy import optimize

from ..config import MlConfig
from ..errors import DataValidationError
from ..errors import NumericalError
from ..models.recursions import expectile_path
from ..models.recursions import gaussian_expectile_level
from ..models.recursions import InitRule
from ..models.recursions import RiskPath
from ..models.spec import ModelFamily
from ..models.spec import ModelSpec
from ..models.spec import optimizer_bounds
from ..models.spec import ParamVector
from ..objective import LOG_2PI
from .expectile import ExpectileFamily
from .expectile import fit_expectile_regression
from .likelihood import ModelLikelihood

logger = logging.getLogger(__name__)

TAU_MARGIN = 1e-5
START_BOXES: dict[str, tuple[float, float]] = {
    "xi": (-1.0, 1.0),
    "phi": (0.0, 1.0),
    "delta1": (-0.2, 0.2),
    "delta2": (-0.3, 0.3),
    "sigma_u": (0.0, 1.0),
}
GAMMA_BOXES: dict[ModelFamily, dict[str, tuple[float, float]]] = {
    ModelFamily.ES_CAVIAR_ADD: {
        "gamma0": (0.0, 1.0),
        "gamma1": (0.0, 1.0),
        "gamma2": (0.0, 0.99),
    },
    ModelFamily.ES_CAVIAR_MULT: {"gamma0": (-5.0, 1.0)},
}


@dataclasses.dataclass(frozen=True)
class ConvergenceReport:
    converged: bool
    message: str
    iterations: int
    evaluations: int
    feasible_starts: int
    start_loglik: float
    step1_objective: float


@dataclasses.dataclass(frozen=True)
class MlResult:
    params: ParamVector
    loglik: float
    report: ConvergenceReport
    path: RiskPath


@dataclasses.dataclass(frozen=True)
class StartPoint:
    values: np.ndarray
    loglik: float
    feasible: int
    step1_objective: float


def _proportional_logliks(
    likelihood: ModelLikelihood, mu: np.ndarray, candidates: dict[str, np.ndarray]
) -> np.ndarray:
    """Likelihood of many candidates sharing the expectile path, ES = F * mu.

    Only the scaling factor and the measurement coefficients vary, so both the
    AL part and the Gaussian measurement part reduce to closed forms.
    """
    alpha = likelihood.alpha
    returns = likelihood.returns
    n = len(returns)
    if likelihood.family == ModelFamily.ES_CAVIAR_MULT:
        factor = 1.0 + np.exp(candidates["gamma0"])
    else:
        tau = candidates["tau"]
        factor = 1.0 + tau / ((1.0 - 2.0 * tau) * alpha)
    hits = returns <= mu
    log_part = float(np.sum(np.log((alpha - 1.0) / mu)))
    hinge = float(np.sum((returns - mu) * (alpha - hits) / (alpha * mu)))
    logliks = log_part - n * np.log(factor) + hinge / factor
    if not likelihood.family.is_realized:
        return logliks

    eps = returns / mu
    eps_sq = eps * eps
    design = np.column_stack([np.ones(n), np.abs(mu), eps, eps_sq - eps_sq.mean()])
    coefs = np.column_stack(
        [candidates["xi"], candidates["phi"], candidates["delta1"], candidates["delta2"]]
    )
    measures = likelihood.measures
    gram = design.T @ design
    cross = design.T @ measures
    sum_sq = (
        float(measures @ measures)
        - 2.0 * coefs @ cross
        + np.einsum("ij,jk,ik->i", coefs, gram, coefs)
    )
    variance = candidates["sigma_u"] ** 2
    return logliks - 0.5 * (n * LOG_2PI + n * np.log(variance) + sum_sq / variance)


def find_start(
    spec: ModelSpec,
    returns: np.ndarray,
    measures: np.ndarray | None,
    config: MlConfig,
    rng: np.random.Generator,
    init: InitRule = InitRule(),
) -> StartPoint:
    """First two estimation steps: expectile regression, then random starts

    Every family takes its beta start from the same asymmetric least squares
    fit, the ES-CAViaR quantile equation included. At the Gaussian implied
    level the alpha expectile and the alpha quantile of a location scale
    family coincide, so the expectile coefficients on the |r| driver are a
    quantile start without a separate quantile regression. Set step1_tau to
    move the level.
    """
    returns = np.ascontiguousarray(returns, dtype=np.float64)
    if np.ptp(returns) == 0.0:
        raise NumericalError("Degenerate series of identical returns")
    likelihood = ModelLikelihood(spec, returns, measures, init=init)
    family = spec.family
    alpha = spec.alpha
    tau0 = config.step1_tau or gaussian_expectile_level(alpha)
    driver = likelihood.measures if family.is_realized else np.abs(returns)
    mu0 = init.initial_mu(returns, alpha)
    fit = fit_expectile_regression(
        returns,
        tau0,
        ExpectileFamily.THRESHOLD if family.is_threshold else ExpectileFamily.LINEAR,
        driver=driver,
        threshold=spec.threshold,
        mu0=mu0,
        starts=config.expectile_starts,
        refine=config.expectile_refine,
        tolerance=config.tolerance,
        max_iterations=config.max_iterations,
        rng=rng,
    )
    low, high = fit.regime_betas()
    mu = expectile_path(low, high, driver, returns, mu0, spec.threshold)
    if not np.all(mu < 0.0):
        raise NumericalError(
            "Expectile regression produced a non-negative expectile path, no feasible start"
        )

    count = config.n_random_starts
    candidates: dict[str, np.ndarray] = {}
    for index, name in enumerate(likelihood.names):
        if name.startswith("beta"):
            candidates[name] = np.full(count, fit.beta[int(name[4:]) - 1])
        elif name == "tau":
            candidates[name] = rng.uniform(TAU_MARGIN, alpha - TAU_MARGIN, size=count)
        elif name == "sigma_u":
            # open at zero
            candidates[name] = START_BOXES[name][1] - rng.uniform(0.0, 1.0, size=count)
        elif name in START_BOXES:
            candidates[name] = rng.uniform(*START_BOXES[name], size=count)
        else:
            candidates[name] = rng.uniform(*GAMMA_BOXES[family][name], size=count)
    matrix = np.column_stack([candidates[name] for name in likelihood.names])

    if family == ModelFamily.ES_CAVIAR_ADD:
        logliks = np.array([likelihood.log_posterior(row) for row in matrix])
    else:
        logliks = _proportional_logliks(likelihood, mu, candidates)
    logliks = np.where(np.isfinite(logliks), logliks, -np.inf)
    feasible = int(np.count_nonzero(np.isfinite(logliks)))
    if not feasible:
        raise NumericalError("No feasible start, every candidate has -inf likelihood")
    # rank the screened candidates, then score the leaders on their exact paths
    leaders = np.argsort(-logliks, kind="stable")[: min(10, feasible)]
    exact = np.array([likelihood.log_posterior(matrix[index]) for index in leaders])
    if not np.any(np.isfinite(exact)):
        raise NumericalError("No feasible start, every candidate has -inf likelihood")
    best = leaders[int(np.argmax(exact))]
    logger.debug(
        "%s feasible starts out of %s, best log-likelihood %.6f",
        feasible,
        count,
        float(np.max(exact)),
    )
    return StartPoint(
        values=matrix[best].copy(),
        loglik=float(np.max(exact)),
        feasible=feasible,
        step1_objective=fit.objective,
    )


def fit_ml(
    spec: ModelSpec,
    returns: np.ndarray,
    measures: np.ndarray | None = None,
    config: MlConfig = MlConfig(),
    rng: np.random.Generator | None = None,
    init: InitRule = InitRule(),
) -> MlResult:
    """Three step maximum likelihood.

    1. expectile equation coefficients from asymmetric least squares,
    2. random candidates for the remaining parameters, the best one kept,
    3. bounded Nelder-Mead on the full log-likelihood from that candidate.
    """
    if spec.family == ModelFamily.CARE_SAV:
        raise DataValidationError("CARE-SAV is fitted by the expectile level grid search")
    if rng is None:
        rng = np.random.default_rng(config.seed)
    likelihood = ModelLikelihood(spec, returns, measures, init=init)
    start = find_start(spec, returns, measures, config, rng, init=init)

    def objective(values: np.ndarray) -> float:
        return -likelihood.log_posterior(values)

    result = optimize.minimize(
        objective,
        start.values,
        method="Nelder-Mead",
        bounds=optimizer_bounds(spec.family, spec.alpha, spec.constraints),
        options=dict(
            xatol=config.tolerance,
            fatol=config.tolerance,
            maxiter=config.max_iterations,
            maxfev=config.max_iterations,
            adaptive=True,
        ),
    )
    values, loglik = start.values, start.loglik
    if np.isfinite(result.fun) and -float(result.fun) >= loglik:
        values, loglik = np.array(result.x), -float(result.fun)
    if not result.success:
        logger.warning(
            "Local optimizer did not converge for %s: %s, returning best iterate",
            spec.model_id,
            result.message,
        )
    params = likelihood.params(values)
    logger.info(
        "ML fit of %s reached log-likelihood %.4f (start %.4f)",
        spec.model_id,
        loglik,
        start.loglik,
    )
    return MlResult(
        params=params,
        loglik=loglik,
        report=ConvergenceReport(
            converged=bool(result.success),
            message=str(result.message),
            iterations=int(result.nit),
            evaluations=int(result.nfev),
            feasible_starts=start.feasible,
            start_loglik=start.loglik,
            step1_objective=start.step1_objective,
        ),
        path=likelihood.path(values),
    )

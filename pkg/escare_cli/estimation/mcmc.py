import dataclasses
import logging
import typing

import numpy as np
from scipy import linalg
from scipy.special import logsumexp

from ..config import McmcConfig
from ..config import MlConfig
from ..errors import DataValidationError
from ..errors import NumericalError
from ..models.recursions import InitRule
from ..models.recursions import RiskPath
from ..models.spec import in_region
from ..models.spec import ModelFamily
from ..models.spec import ModelSpec
from ..models.spec import ParamVector
from ..models.spec import PARAM_NAMES
from .likelihood import ModelLikelihood
from .ml import find_start

logger = logging.getLogger(__name__)

LogPosterior = typing.Callable[[np.ndarray], float]

OPTIMAL_RW_SCALE = 2.38
MIN_FINAL_ACCEPTANCE = 0.01
MAX_JITTER_TRIES = 12

BETAS = ("beta1", "beta2", "beta3")
BLOCKS: dict[ModelFamily, tuple[tuple[str, ...], ...]] = {
    ModelFamily.ES_CARE: (BETAS, ("tau",)),
    ModelFamily.ES_CAVIAR_ADD: (BETAS, ("gamma0", "gamma1", "gamma2")),
    ModelFamily.ES_CAVIAR_MULT: (BETAS, ("gamma0",)),
    ModelFamily.RE_ES_CARE: (
        (*BETAS, "phi"),
        ("tau",),
        ("xi", "delta1", "delta2", "sigma_u"),
    ),
    ModelFamily.RE_T_ES_CARE: (
        (*BETAS, "beta4", "beta5", "beta6", "phi"),
        ("tau",),
        ("xi", "delta1", "delta2", "sigma_u"),
    ),
}


@dataclasses.dataclass(frozen=True)
class BlockLayout:
    names: tuple[str, ...]
    blocks: tuple[tuple[str, ...], ...]

    def __post_init__(self):
        flat = [name for block in self.blocks for name in block]
        if sorted(flat) != sorted(self.names) or len(set(flat)) != len(flat):
            raise DataValidationError("Blocks must partition the parameter vector")

    @classmethod
    def for_family(cls, family: ModelFamily) -> "BlockLayout":
        if family not in BLOCKS:
            raise DataValidationError(f"No MCMC block layout for {family.value}")
        return cls(names=PARAM_NAMES[family], blocks=BLOCKS[family])

    def indices(self) -> list[np.ndarray]:
        return [
            np.array([self.names.index(name) for name in block]) for block in self.blocks
        ]


def target_acceptance(block_dim: int) -> float:
    if block_dim < 1:
        raise DataValidationError(f"Block dimension must be positive, got {block_dim}")
    if block_dim == 1:
        return 0.44
    elif block_dim <= 4:
        return 0.35
    return 0.234


def cholesky_factor(cov: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor, adding diagonal jitter when cov is not SPD"""
    cov = np.atleast_2d(np.asarray(cov, dtype=np.float64))
    cov = 0.5 * (cov + cov.T)
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        pass
    scale = max(float(np.mean(np.abs(np.diag(cov)))), 1e-12)
    jitter = scale * 1e-10
    for _ in range(MAX_JITTER_TRIES):
        try:
            factor = np.linalg.cholesky(cov + jitter * np.eye(len(cov)))
        except np.linalg.LinAlgError:
            jitter *= 10.0
            continue
        logger.warning("Proposal covariance not SPD, repaired with jitter %.3g", jitter)
        return factor
    raise NumericalError("Proposal covariance cannot be repaired into an SPD matrix")


def propose_rw(
    current: np.ndarray,
    cov: np.ndarray,
    mixture_scales: typing.Sequence[float],
    rng: np.random.Generator,
    chol: np.ndarray | None = None,
) -> tuple[np.ndarray, int]:
    """Random walk draw from an equal weight mixture of N(current, C_i * cov)"""
    if chol is None:
        chol = cholesky_factor(cov)
    component = int(rng.integers(len(mixture_scales)))
    step = chol @ rng.standard_normal(len(current))
    return current + np.sqrt(mixture_scales[component]) * step, component


def mh_step(
    current: np.ndarray,
    current_log_post: float,
    candidate: np.ndarray,
    log_posterior: LogPosterior,
    rng: np.random.Generator,
    log_proposal_ratio: float = 0.0,
) -> tuple[bool, np.ndarray, float]:
    candidate_log_post = log_posterior(candidate)
    if not np.isfinite(candidate_log_post):
        return False, current, current_log_post
    log_ratio = candidate_log_post - current_log_post + log_proposal_ratio
    if np.log(rng.random()) < log_ratio:
        return True, candidate, candidate_log_post
    return False, current, current_log_post


def sd_change(previous: np.ndarray, current: np.ndarray) -> float:
    """Mean absolute relative change of per-parameter standard deviations"""
    previous = np.asarray(previous, dtype=np.float64)
    current = np.asarray(current, dtype=np.float64)
    diff = np.abs(current - previous)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(previous > 0.0, diff / np.abs(previous), np.where(diff > 0, np.inf, 0.0))
    return float(np.mean(ratios))


def epoch_converged(previous: np.ndarray, current: np.ndarray, threshold: float) -> bool:
    return sd_change(previous, current) < threshold


@dataclasses.dataclass
class ChainState:
    current: np.ndarray
    log_post: float
    # random walk proposal covariances, one per block
    covariances: list[np.ndarray]
    # posterior covariance estimates from the last epoch
    sample_covariances: list[np.ndarray]
    log_scales: np.ndarray
    accepted: np.ndarray
    iterations: int = 0
    sd_history: list[np.ndarray] = dataclasses.field(default_factory=list)
    last_sample: np.ndarray | None = None
    epochs: int = 0
    converged: bool = False

    def acceptance_rates(self) -> np.ndarray:
        return self.accepted / max(self.iterations, 1)


def _run_rw_epoch(
    log_posterior: LogPosterior,
    blocks: list[np.ndarray],
    state: ChainState,
    length: int,
    config: McmcConfig,
    rng: np.random.Generator,
) -> np.ndarray:
    samples = np.empty((length, len(state.current)))
    factors = [cholesky_factor(cov) for cov in state.covariances]
    targets = [target_acceptance(len(block)) for block in blocks]
    window_accepted = np.zeros(len(blocks))
    updates = 0
    current, log_post = state.current, state.log_post
    for iteration in range(length):
        for index, block in enumerate(blocks):
            chol = np.exp(state.log_scales[index]) * factors[index]
            proposal, _ = propose_rw(
                current[block], state.covariances[index], config.mixture_scales, rng, chol=chol
            )
            candidate = current.copy()
            candidate[block] = proposal
            accepted, current, log_post = mh_step(
                current, log_post, candidate, log_posterior, rng
            )
            window_accepted[index] += accepted
            state.accepted[index] += accepted
        state.iterations += 1
        samples[iteration] = current
        if (iteration + 1) % config.tuning_interval == 0:
            updates += 1
            rates = window_accepted / config.tuning_interval
            # stochastic approximation on the log scale, decaying gain
            state.log_scales += (rates - np.array(targets)) * 2.0 / np.sqrt(updates)
            window_accepted[:] = 0.0
    state.current, state.log_post = current, log_post
    return samples


def run_burnin(
    log_posterior: LogPosterior,
    layout: BlockLayout,
    start: np.ndarray,
    config: McmcConfig,
    rng: np.random.Generator,
) -> ChainState:
    """Adaptive random walk epochs until the posterior spread stabilizes"""
    start = np.array(start, dtype=np.float64)
    log_post = log_posterior(start)
    if not np.isfinite(log_post):
        raise NumericalError("MCMC starting point has -inf log posterior")
    blocks = layout.indices()
    initial = [
        OPTIMAL_RW_SCALE / np.sqrt(len(block)) * np.eye(len(block)) for block in blocks
    ]
    state = ChainState(
        current=start,
        log_post=log_post,
        covariances=initial,
        sample_covariances=[cov.copy() for cov in initial],
        log_scales=np.zeros(len(blocks)),
        accepted=np.zeros(len(blocks)),
    )
    for epoch in range(config.max_epochs):
        samples = _run_rw_epoch(
            log_posterior, blocks, state, config.epoch_length, config, rng
        )
        retained = samples[config.epoch_discard :]
        state.last_sample = retained
        state.epochs = epoch + 1
        sd = retained.std(axis=0, ddof=1) if len(retained) > 1 else np.zeros(len(start))
        change = sd_change(state.sd_history[-1], sd) if state.sd_history else np.inf
        state.sd_history.append(sd)
        for index, block in enumerate(blocks):
            sample_cov = np.atleast_2d(np.cov(retained[:, block], rowvar=False))
            if np.all(np.diag(sample_cov) > 0.0):
                state.sample_covariances[index] = sample_cov
                state.covariances[index] = OPTIMAL_RW_SCALE**2 / len(block) * sample_cov
            else:
                # block never moved, keep the tuned proposal
                state.covariances[index] = (
                    np.exp(2.0 * state.log_scales[index]) * state.covariances[index]
                )
        state.log_scales[:] = 0.0
        logger.info(
            "Epoch %s done, acceptance %s, sd change %.3f",
            state.epochs,
            np.round(state.acceptance_rates(), 3),
            change,
        )
        if change < config.convergence_threshold:
            state.converged = True
            break
    else:
        logger.warning(
            "Burn-in hit the cap of %s epochs without convergence, proceeding",
            config.max_epochs,
        )
    return state


def _mixture_logpdf(
    x: np.ndarray, mean: np.ndarray, chol: np.ndarray, scales: np.ndarray
) -> float:
    dim = len(mean)
    solved = linalg.solve_triangular(chol, x - mean, lower=True)
    quad = float(solved @ solved)
    log_det = 2.0 * float(np.sum(np.log(np.diag(chol))))
    terms = -0.5 * (
        dim * np.log(2.0 * np.pi) + dim * np.log(scales) + log_det + quad / scales
    )
    return float(logsumexp(terms) - np.log(len(scales)))


@dataclasses.dataclass(frozen=True)
class FinalEpoch:
    mean: np.ndarray
    samples: np.ndarray
    acceptance: np.ndarray


def run_final_epoch(
    log_posterior: LogPosterior,
    layout: BlockLayout,
    state: ChainState,
    config: McmcConfig,
    rng: np.random.Generator,
) -> FinalEpoch:
    """Independence Metropolis-Hastings epoch, mixture proposals centered at the burn-in mean"""
    if state.last_sample is None:
        raise DataValidationError("Burn-in must run before the final epoch")
    blocks = layout.indices()
    scales = np.asarray(config.mixture_scales, dtype=np.float64)
    means = [state.last_sample[:, block].mean(axis=0) for block in blocks]
    factors = [cholesky_factor(cov) for cov in state.sample_covariances]
    samples = np.empty((config.final_epoch, len(state.current)))
    accepted = np.zeros(len(blocks))
    current, log_post = state.current.copy(), state.log_post
    for iteration in range(config.final_epoch):
        for index, block in enumerate(blocks):
            component = int(rng.integers(len(scales)))
            proposal = means[index] + np.sqrt(scales[component]) * (
                factors[index] @ rng.standard_normal(len(block))
            )
            candidate = current.copy()
            candidate[block] = proposal
            log_q_ratio = _mixture_logpdf(
                current[block], means[index], factors[index], scales
            ) - _mixture_logpdf(proposal, means[index], factors[index], scales)
            ok, current, log_post = mh_step(
                current, log_post, candidate, log_posterior, rng, log_q_ratio
            )
            accepted[index] += ok
        samples[iteration] = current
    acceptance = accepted / config.final_epoch
    for label, rate in zip(layout.blocks, acceptance):
        if rate < MIN_FINAL_ACCEPTANCE:
            logger.warning(
                "Final epoch acceptance for block (%s) is %.2f%%",
                ", ".join(label),
                100 * rate,
            )
    retained = samples[config.final_discard :]
    return FinalEpoch(mean=retained.mean(axis=0), samples=retained, acceptance=acceptance)


@dataclasses.dataclass(frozen=True)
class McmcResult:
    params: ParamVector
    loglik: float
    samples: np.ndarray
    names: tuple[str, ...]
    acceptance: dict[str, float]
    burnin_epochs: int
    converged: bool
    path: RiskPath


def fit_mcmc(
    spec: ModelSpec,
    returns: np.ndarray,
    measures: np.ndarray | None = None,
    config: McmcConfig = McmcConfig(),
    ml_config: MlConfig = MlConfig(),
    rng: np.random.Generator | None = None,
    init: InitRule = InitRule(),
    start: np.ndarray | None = None,
) -> McmcResult:
    """Posterior mean under a flat prior over the parameter region"""
    if rng is None:
        rng = np.random.default_rng(config.seed)
    likelihood = ModelLikelihood(spec, returns, measures, init=init)
    layout = BlockLayout.for_family(spec.family)
    if start is None:
        start = find_start(spec, returns, measures, ml_config, rng, init=init).values
    state = run_burnin(likelihood.log_posterior, layout, start, config, rng)
    final = run_final_epoch(likelihood.log_posterior, layout, state, config, rng)
    if not in_region(spec.family, final.mean, spec.alpha, spec.constraints):
        raise NumericalError("Posterior mean left the parameter region")
    loglik = likelihood.loglik(final.mean)
    acceptance = {
        f"theta{index + 1}": float(rate) for index, rate in enumerate(final.acceptance)
    }
    logger.info(
        "MCMC fit of %s after %s burn-in epochs, final acceptance %s",
        spec.model_id,
        state.epochs,
        acceptance,
    )
    return McmcResult(
        params=likelihood.params(final.mean),
        loglik=loglik,
        samples=final.samples,
        names=layout.names,
        acceptance=acceptance,
        burnin_epochs=state.epochs,
        converged=state.converged,
        path=likelihood.path(final.mean),
    )

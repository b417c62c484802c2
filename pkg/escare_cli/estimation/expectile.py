import dataclasses
import enum
import logging

import numpy as np
from scipy import optimize

from ..errors import DataValidationError
from ..errors import NumericalError
from ..models.recursions import expectile_path
from ..models.recursions import INIT_WINDOW
from ..models.spec import ModelFamily
from ..models.spec import ParamVector
from ..objective import als_objective

logger = logging.getLogger(__name__)

MIN_REGRESSION_LENGTH = 50


@enum.unique
class ExpectileFamily(str, enum.Enum):
    CONSTANT = "constant"
    LINEAR = "linear"
    THRESHOLD = "threshold"


@dataclasses.dataclass(frozen=True)
class ExpectileFit:
    family: ExpectileFamily
    tau: float
    beta: np.ndarray
    objective: float
    mu: np.ndarray

    def regime_betas(self) -> tuple[np.ndarray, np.ndarray]:
        if self.family == ExpectileFamily.THRESHOLD:
            return self.beta[:3], self.beta[3:6]
        return self.beta[:3], self.beta[:3]


def sample_expectile(values: np.ndarray, tau: float) -> float:
    """Root of the asymmetric least squares first order condition"""
    values = np.asarray(values, dtype=np.float64)
    low, high = float(values.min()), float(values.max())
    if low == high:
        return low

    def first_order(mu: float) -> float:
        residuals = values - mu
        return float(np.sum(np.abs(tau - (values < mu)) * residuals))

    return float(optimize.brentq(first_order, low, high, xtol=1e-14, rtol=1e-14))


def _draw_starts(
    rng: np.random.Generator,
    count: int,
    regimes: int,
    level: float,
    driver_mean: float,
) -> np.ndarray:
    # each draw keeps the unconditional expectile at the sample level
    starts = np.empty((count, 3 * regimes))
    for regime in range(regimes):
        persistence = rng.uniform(0.0, 0.99, size=count)
        share = rng.uniform(0.0, 1.0, size=count)
        scale = (1.0 - persistence) * level
        starts[:, 3 * regime] = (1.0 - share) * scale
        starts[:, 3 * regime + 1] = share * scale / max(driver_mean, 1e-12)
        starts[:, 3 * regime + 2] = persistence
    return starts


def fit_expectile_regression(
    returns: np.ndarray,
    tau: float,
    family: ExpectileFamily = ExpectileFamily.LINEAR,
    driver: np.ndarray | None = None,
    *,
    threshold: float = 0.0,
    mu0: float | None = None,
    starts: int = 200,
    refine: int = 3,
    tolerance: float = 1e-8,
    max_iterations: int = 20_000,
    rng: np.random.Generator | None = None,
    extra_starts: list[np.ndarray] | None = None,
) -> ExpectileFit:
    """Asymmetric least squares fit of the expectile recursion at a fixed level.

    The recursion is mu_t = b1 + b2 * driver_{t-1} + b3 * mu_{t-1}, with a second
    set of coefficients when the lagged return is above the threshold for the
    threshold family. The driver defaults to the absolute return.
    """
    returns = np.ascontiguousarray(returns, dtype=np.float64)
    if len(returns) < MIN_REGRESSION_LENGTH:
        raise DataValidationError(
            f"Expectile regression needs at least {MIN_REGRESSION_LENGTH} days, got {len(returns)}"
        )
    if not 0.0 < tau < 1.0:
        raise DataValidationError(f"Expectile level must be in (0, 1), got {tau}")

    if family == ExpectileFamily.CONSTANT:
        level = sample_expectile(returns, tau)
        mu = np.full_like(returns, level)
        return ExpectileFit(
            family=family,
            tau=tau,
            beta=np.array([level]),
            objective=als_objective(returns, mu, tau),
            mu=mu,
        )

    driver = np.abs(returns) if driver is None else np.ascontiguousarray(driver, dtype=np.float64)
    if driver.shape != returns.shape:
        raise DataValidationError("Driver series is not aligned with returns")
    if mu0 is None:
        mu0 = sample_expectile(returns[:INIT_WINDOW], tau)
    regimes = 2 if family == ExpectileFamily.THRESHOLD else 1
    rng = rng or np.random.default_rng()

    def objective(beta: np.ndarray) -> float:
        if beta[2] >= 1.0 or (regimes == 2 and beta[5] >= 1.0):
            return np.inf
        high = beta[3:6] if regimes == 2 else beta[:3]
        mu = expectile_path(beta[:3], high, driver, returns, mu0, threshold)
        if not np.all(np.isfinite(mu)):
            return np.inf
        return als_objective(returns, mu, tau)

    level = sample_expectile(returns, tau)
    candidates = _draw_starts(rng, starts, regimes, level, float(driver.mean()))
    if extra_starts:
        candidates = np.vstack([candidates, *[np.atleast_2d(x) for x in extra_starts]])
    values = np.array([objective(candidate) for candidate in candidates])
    feasible = np.flatnonzero(np.isfinite(values))
    if not len(feasible):
        raise NumericalError("All expectile regression starts are invalid")
    best_starts = feasible[np.argsort(values[feasible], kind="stable")[:refine]]

    best_beta, best_value = candidates[best_starts[0]], values[best_starts[0]]
    for index in best_starts:
        result = optimize.minimize(
            objective,
            candidates[index],
            method="Nelder-Mead",
            options=dict(
                xatol=tolerance,
                fatol=tolerance,
                maxiter=max_iterations,
                maxfev=max_iterations,
                adaptive=True,
            ),
        )
        if result.fun < best_value:
            best_beta, best_value = result.x, float(result.fun)
    logger.debug(
        "Expectile regression at tau=%.6g converged to objective %.6g with beta %s",
        tau,
        best_value,
        best_beta,
    )
    high = best_beta[3:6] if regimes == 2 else best_beta[:3]
    return ExpectileFit(
        family=family,
        tau=tau,
        beta=np.array(best_beta),
        objective=float(best_value),
        mu=expectile_path(best_beta[:3], high, driver, returns, mu0, threshold),
    )


@dataclasses.dataclass(frozen=True)
class CareGridResult:
    tau: float
    params: ParamVector
    vrate: float
    taus: np.ndarray
    vrates: np.ndarray


def default_care_grid(alpha: float, size: int = 50) -> np.ndarray:
    return np.geomspace(1e-4, alpha - 1e-4, size)


def select_grid_tau(taus: np.ndarray, vrates: np.ndarray, alpha: float) -> int:
    """Index of the level whose violation rate is closest to alpha, smaller level on ties"""
    order = np.argsort(taus, kind="stable")
    best = order[0]
    best_gap = abs(vrates[best] - alpha)
    for index in order[1:]:
        gap = abs(vrates[index] - alpha)
        if gap < best_gap:
            best, best_gap = index, gap
    return int(best)


def care_grid_search(
    returns: np.ndarray,
    alpha: float,
    grid: np.ndarray | None = None,
    *,
    starts: int = 50,
    refine: int = 1,
    tolerance: float = 1e-8,
    max_iterations: int = 20_000,
    rng: np.random.Generator | None = None,
) -> CareGridResult:
    returns = np.ascontiguousarray(returns, dtype=np.float64)
    taus = default_care_grid(alpha) if grid is None else np.asarray(grid, dtype=np.float64)
    if taus.size == 0:
        raise DataValidationError("Empty expectile level grid")
    if np.any(taus <= 0.0) or np.any(taus >= alpha):
        raise DataValidationError(f"Grid levels must lie in (0, {alpha})")
    rng = rng or np.random.default_rng()
    mu0 = float(np.quantile(returns[:INIT_WINDOW], alpha))

    vrates = np.empty(len(taus))
    fits: list[ExpectileFit] = []
    previous: list[np.ndarray] = []
    for index, tau in enumerate(taus):
        fit = fit_expectile_regression(
            returns,
            float(tau),
            ExpectileFamily.LINEAR,
            mu0=mu0,
            starts=starts,
            refine=refine,
            tolerance=tolerance,
            max_iterations=max_iterations,
            rng=rng,
            extra_starts=previous,
        )
        previous = [fit.beta]
        fits.append(fit)
        vrates[index] = float(np.mean(returns < fit.mu))
    chosen = select_grid_tau(taus, vrates, alpha)
    tau = float(taus[chosen])
    logger.info(
        "CARE grid search picked tau=%.6g with in-sample VRate %.4f", tau, vrates[chosen]
    )
    return CareGridResult(
        tau=tau,
        params=ParamVector(
            family=ModelFamily.CARE_SAV, values=fits[chosen].beta, fixed_tau=tau
        ),
        vrate=float(vrates[chosen]),
        taus=taus,
        vrates=vrates,
    )

import dataclasses
import logging

import numpy as np

from .errors import DataValidationError
from .models.recursions import measurement_residuals
from .models.recursions import RiskPath
from .models.spec import ParamVector

logger = logging.getLogger(__name__)

NEG_INF = -np.inf
LOG_2PI = float(np.log(2.0 * np.pi))


@dataclasses.dataclass(frozen=True)
class LossReport:
    total: float
    per_day: np.ndarray | None = None
    valid: bool = True


INVALID = LossReport(total=NEG_INF, per_day=None, valid=False)


def _aligned(*arrays: np.ndarray) -> list[np.ndarray]:
    result = [np.asarray(array, dtype=np.float64) for array in arrays]
    shape = result[0].shape
    for array in result[1:]:
        if array.shape != shape:
            raise DataValidationError(
                f"Series are not aligned: {shape} vs {array.shape}"
            )
    return result


def als_objective(returns: np.ndarray, mu: np.ndarray, tau: float) -> float:
    returns, mu = _aligned(returns, mu)
    residuals = returns - mu
    weights = np.abs(tau - (returns < mu))
    return float(np.sum(weights * residuals * residuals))


def al_loglik_terms(
    returns: np.ndarray, var: np.ndarray, es: np.ndarray, alpha: float
) -> np.ndarray:
    """Per-day asymmetric Laplace log-likelihood, caller guarantees ES < 0"""
    hits = returns <= var
    return np.log((alpha - 1.0) / es) + (returns - var) * (alpha - hits) / (alpha * es)


def measurement_loglik_terms(u: np.ndarray, sigma_u: float) -> np.ndarray:
    variance = sigma_u * sigma_u
    return -0.5 * (LOG_2PI + np.log(variance) + u * u / variance)


def al_loglik(returns: np.ndarray, path: RiskPath, alpha: float) -> LossReport:
    returns, mu, es = _aligned(returns, path.mu, path.es)
    if not path.valid or np.any(es >= 0.0) or not np.all(np.isfinite(es)):
        return INVALID
    per_day = al_loglik_terms(returns, mu, es, alpha)
    return LossReport(total=float(per_day.sum()), per_day=per_day)


def full_loglik(
    returns: np.ndarray,
    measures: np.ndarray,
    path: RiskPath,
    params: ParamVector,
    alpha: float,
) -> LossReport:
    al_part = al_loglik(returns, path, alpha)
    if not al_part.valid:
        return al_part
    sigma_u = params["sigma_u"]
    if not sigma_u > 0.0:
        return INVALID
    u = path.u
    if u is None:
        _, u = measurement_residuals(
            path.mu,
            np.asarray(returns, dtype=np.float64),
            np.asarray(measures, dtype=np.float64),
            xi=params["xi"],
            phi=params["phi"],
            delta1=params["delta1"],
            delta2=params["delta2"],
        )
    per_day = al_part.per_day + measurement_loglik_terms(u, sigma_u)
    total = float(per_day.sum())
    if not np.isfinite(total):
        return INVALID
    return LossReport(total=total, per_day=per_day)


def quantile_loss(returns: np.ndarray, var: np.ndarray, alpha: float) -> LossReport:
    returns, var = _aligned(returns, var)
    per_day = (alpha - (returns < var)) * (returns - var)
    return LossReport(total=float(per_day.sum()), per_day=per_day)


def fz_loss(
    returns: np.ndarray, var: np.ndarray, es: np.ndarray, alpha: float
) -> LossReport:
    returns, var, es = _aligned(returns, var, es)
    if np.any(es >= 0.0) or not np.all(np.isfinite(es)):
        raise DataValidationError("FZ loss requires strictly negative ES forecasts")
    per_day = -al_loglik_terms(returns, var, es, alpha)
    return LossReport(total=float(per_day.sum()), per_day=per_day)

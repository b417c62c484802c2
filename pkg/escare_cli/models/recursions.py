import dataclasses
import logging

import numba
import numpy as np
from scipy import stats

from ..errors import DataValidationError
from .spec import ModelFamily
from .spec import ParamVector

logger = logging.getLogger(__name__)

INIT_WINDOW = 100


def es_scaling_factor(tau: float, alpha: float) -> float:
    """Factor turning the tau-level expectile into the alpha-level ES"""
    if not 0.0 < tau < alpha < 0.5:
        raise DataValidationError(
            f"Expected 0 < tau < alpha < 0.5, got tau={tau}, alpha={alpha}"
        )
    return 1.0 + tau / ((1.0 - 2.0 * tau) * alpha)


def gaussian_es_ratio(alpha: float) -> float:
    """ES / VaR ratio of a zero mean Gaussian at level alpha"""
    z = stats.norm.ppf(alpha)
    return float(stats.norm.pdf(z) / (alpha * -z))


@dataclasses.dataclass(frozen=True)
class InitRule:
    mu0: float | None = None
    es0: float | None = None
    w0: float | None = None
    window: int = INIT_WINDOW

    def initial_mu(self, returns: np.ndarray, alpha: float) -> float:
        if self.mu0 is not None:
            return float(self.mu0)
        head = returns[: min(self.window, len(returns))]
        return float(np.quantile(head, alpha))


@dataclasses.dataclass(frozen=True)
class RiskPath:
    mu: np.ndarray
    es: np.ndarray
    eps: np.ndarray | None = None
    u: np.ndarray | None = None
    w: np.ndarray | None = None
    valid: bool = True
    reason: str | None = None

    @property
    def var(self) -> np.ndarray:
        return self.mu

    def __len__(self) -> int:
        return len(self.mu)


@numba.njit(cache=True)
def _care_kernel(beta_low, beta_high, driver, lagged, threshold, mu0, es0, factor):
    n = driver.shape[0]
    mu = np.empty(n)
    es = np.empty(n)
    mu[0] = mu0
    es[0] = es0
    for t in range(1, n):
        if lagged[t - 1] <= threshold:
            b1 = beta_low[0]
            b2 = beta_low[1]
            b3 = beta_low[2]
        else:
            b1 = beta_high[0]
            b2 = beta_high[1]
            b3 = beta_high[2]
        x = driver[t - 1]
        mu[t] = b1 + b2 * x + b3 * mu[t - 1]
        es[t] = b1 * factor + b2 * factor * x + b3 * es[t - 1]
    return mu, es


@numba.njit(cache=True)
def _additive_gap_kernel(returns, q, gamma0, gamma1, gamma2, w0):
    n = returns.shape[0]
    w = np.empty(n)
    w[0] = w0
    for t in range(1, n):
        if returns[t - 1] <= q[t - 1]:
            w[t] = gamma0 + gamma1 * (q[t - 1] - returns[t - 1]) + gamma2 * w[t - 1]
        else:
            w[t] = w[t - 1]
    return w


def _as_series(values: np.ndarray, name: str) -> np.ndarray:
    array = np.ascontiguousarray(values, dtype=np.float64)
    if array.ndim != 1 or array.shape[0] == 0:
        raise DataValidationError(f"{name} must be a non-empty 1-D series")
    return array


def _aligned_measures(returns: np.ndarray, measures: np.ndarray | None) -> np.ndarray:
    if measures is None:
        raise DataValidationError("Realized model requires a measure series")
    measures = _as_series(measures, "measures")
    if measures.shape != returns.shape:
        raise DataValidationError(
            f"Measures length {measures.shape[0]} does not match returns length {returns.shape[0]}"
        )
    if not np.all(np.isfinite(measures)):
        raise DataValidationError("Measure series has absent days inside the window")
    return measures


def check_path(mu: np.ndarray, es: np.ndarray, w: np.ndarray | None = None) -> str | None:
    if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(es))):
        return "non-finite path"
    if np.any(mu >= 0.0):
        return "non-negative expectile"
    if np.any(es >= mu):
        return "ES crosses VaR"
    if w is not None and np.any(w < 0.0):
        return "negative ES gap"
    return None


def measurement_residuals(
    mu: np.ndarray,
    returns: np.ndarray,
    measures: np.ndarray,
    xi: float,
    phi: float,
    delta1: float,
    delta2: float,
    eps_sq_mean: float | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    if np.any(mu == 0.0):
        raise DataValidationError("Zero expectile, multiplicative error undefined")
    eps = returns / mu
    eps_sq = eps * eps
    if eps_sq_mean is None:
        eps_sq_mean = float(eps_sq.mean())
    u = measures - xi - phi * np.abs(mu) - delta1 * eps - delta2 * (eps_sq - eps_sq_mean)
    return eps, u


def _run_care(
    beta_low: np.ndarray,
    beta_high: np.ndarray,
    driver: np.ndarray,
    returns: np.ndarray,
    threshold: float,
    factor: float,
    alpha: float,
    init: InitRule,
) -> tuple[np.ndarray, np.ndarray]:
    mu0 = init.initial_mu(returns, alpha)
    es0 = factor * mu0 if init.es0 is None else float(init.es0)
    return _care_kernel(
        np.ascontiguousarray(beta_low),
        np.ascontiguousarray(beta_high),
        driver,
        returns,
        float(threshold),
        mu0,
        es0,
        factor,
    )


def _expect_family(params: ParamVector, *families: ModelFamily):
    if params.family not in families:
        raise DataValidationError(
            f"Expected parameters of {', '.join(f.value for f in families)}, got {params.family.value}"
        )


def run_es_care(
    params: ParamVector,
    returns: np.ndarray,
    alpha: float,
    init: InitRule = InitRule(),
) -> RiskPath:
    _expect_family(params, ModelFamily.ES_CARE)
    returns = _as_series(returns, "returns")
    factor = es_scaling_factor(params.tau, alpha)
    low, high = params.regime_betas()
    mu, es = _run_care(low, high, np.abs(returns), returns, 0.0, factor, alpha, init)
    reason = check_path(mu, es)
    return RiskPath(mu=mu, es=es, valid=reason is None, reason=reason)


def _run_realized(
    params: ParamVector,
    returns: np.ndarray,
    measures: np.ndarray | None,
    alpha: float,
    init: InitRule,
    threshold: float,
) -> RiskPath:
    returns = _as_series(returns, "returns")
    measures = _aligned_measures(returns, measures)
    factor = es_scaling_factor(params.tau, alpha)
    low, high = params.regime_betas()
    mu, es = _run_care(low, high, measures, returns, threshold, factor, alpha, init)
    reason = check_path(mu, es)
    if reason is not None:
        return RiskPath(mu=mu, es=es, valid=False, reason=reason)
    eps, u = measurement_residuals(
        mu,
        returns,
        measures,
        xi=params["xi"],
        phi=params["phi"],
        delta1=params["delta1"],
        delta2=params["delta2"],
    )
    return RiskPath(mu=mu, es=es, eps=eps, u=u)


def run_re_es_care(
    params: ParamVector,
    returns: np.ndarray,
    measures: np.ndarray,
    alpha: float,
    init: InitRule = InitRule(),
) -> RiskPath:
    _expect_family(params, ModelFamily.RE_ES_CARE)
    return _run_realized(params, returns, measures, alpha, init, threshold=0.0)


def run_re_t_es_care(
    params: ParamVector,
    returns: np.ndarray,
    measures: np.ndarray,
    alpha: float,
    init: InitRule = InitRule(),
    threshold: float = 0.0,
) -> RiskPath:
    _expect_family(params, ModelFamily.RE_T_ES_CARE)
    return _run_realized(params, returns, measures, alpha, init, threshold=threshold)


def run_baseline(
    family: ModelFamily,
    params: ParamVector,
    returns: np.ndarray,
    alpha: float,
    init: InitRule = InitRule(),
    tau: float | None = None,
) -> RiskPath:
    _expect_family(params, family)
    returns = _as_series(returns, "returns")
    low, high = params.regime_betas()
    driver = np.abs(returns)
    if family == ModelFamily.CARE_SAV:
        tau = tau if tau is not None else params.fixed_tau
        if tau is None:
            raise DataValidationError("CARE-SAV needs an externally supplied tau")
        factor = es_scaling_factor(tau, alpha)
        mu, es = _run_care(low, high, driver, returns, 0.0, factor, alpha, init)
        reason = check_path(mu, es)
        return RiskPath(mu=mu, es=es, valid=reason is None, reason=reason)
    elif family == ModelFamily.ES_CAVIAR_ADD:
        q, _ = _run_care(low, high, driver, returns, 0.0, 1.0, alpha, init)
        if init.w0 is not None:
            w0 = float(init.w0)
        else:
            w0 = (1.0 - gaussian_es_ratio(alpha)) * q[0]
        w = _additive_gap_kernel(
            returns, q, params["gamma0"], params["gamma1"], params["gamma2"], w0
        )
        es = q - w
        reason = check_path(q, es, w)
        return RiskPath(mu=q, es=es, w=w, valid=reason is None, reason=reason)
    elif family == ModelFamily.ES_CAVIAR_MULT:
        q, _ = _run_care(low, high, driver, returns, 0.0, 1.0, alpha, init)
        es = (1.0 + np.exp(params["gamma0"])) * q
        reason = check_path(q, es)
        return RiskPath(mu=q, es=es, valid=reason is None, reason=reason)
    raise DataValidationError(f"{family.value} is not a baseline family")


def run_model(
    family: ModelFamily,
    params: ParamVector,
    returns: np.ndarray,
    alpha: float,
    measures: np.ndarray | None = None,
    init: InitRule = InitRule(),
    threshold: float = 0.0,
) -> RiskPath:
    if family == ModelFamily.ES_CARE:
        return run_es_care(params, returns, alpha, init)
    elif family == ModelFamily.RE_ES_CARE:
        return run_re_es_care(params, returns, measures, alpha, init)
    elif family == ModelFamily.RE_T_ES_CARE:
        return run_re_t_es_care(params, returns, measures, alpha, init, threshold)
    return run_baseline(family, params, returns, alpha, init)


def forecast_one_step(
    params: ParamVector,
    path: RiskPath,
    last_return: float,
    last_measure: float | None = None,
    *,
    alpha: float,
    threshold: float = 0.0,
) -> tuple[float, float]:
    """Push the day-n state through the recursion once, giving (VaR, ES) for day n+1"""
    if not path.valid:
        raise DataValidationError(f"Cannot forecast from an invalid path: {path.reason}")
    family = params.family
    low, high = params.regime_betas()
    b1, b2, b3 = low if last_return <= threshold else high
    if family.is_realized:
        if last_measure is None or not np.isfinite(last_measure):
            raise DataValidationError("Realized model forecast requires the last measure")
        x = float(last_measure)
    else:
        x = abs(float(last_return))
    mu_n = float(path.mu[-1])
    var = b1 + b2 * x + b3 * mu_n
    if family in (
        ModelFamily.CARE_SAV,
        ModelFamily.ES_CARE,
        ModelFamily.RE_ES_CARE,
        ModelFamily.RE_T_ES_CARE,
    ):
        factor = es_scaling_factor(params.tau, alpha)
        es = b1 * factor + b2 * factor * x + b3 * float(path.es[-1])
    elif family == ModelFamily.ES_CAVIAR_ADD:
        w_n = float(path.w[-1])
        if last_return <= mu_n:
            w = (
                params["gamma0"]
                + params["gamma1"] * (mu_n - last_return)
                + params["gamma2"] * w_n
            )
        else:
            w = w_n
        es = var - w
    else:
        es = (1.0 + np.exp(params["gamma0"])) * var
    return float(var), float(es)


def expectile_path(
    beta_low: np.ndarray,
    beta_high: np.ndarray,
    driver: np.ndarray,
    lagged: np.ndarray,
    mu0: float,
    threshold: float = 0.0,
) -> np.ndarray:
    """Expectile recursion alone, as used by asymmetric least squares fits"""
    mu, _ = _care_kernel(
        np.ascontiguousarray(beta_low, dtype=np.float64),
        np.ascontiguousarray(beta_high, dtype=np.float64),
        np.ascontiguousarray(driver, dtype=np.float64),
        np.ascontiguousarray(lagged, dtype=np.float64),
        float(threshold),
        float(mu0),
        float(mu0),
        1.0,
    )
    return mu


def gaussian_expectile_level(alpha: float) -> float:
    """Expectile level whose scaling factor reproduces the Gaussian ES / VaR ratio"""
    k = (gaussian_es_ratio(alpha) - 1.0) * alpha
    return k / (1.0 + 2.0 * k)

import dataclasses
import logging
import warnings

import numpy as np
import statsmodels.api as sm
from scipy import stats
from scipy.special import xlogy
from statsmodels.tools.sm_exceptions import ConvergenceWarning
from statsmodels.tools.sm_exceptions import IterationLimitWarning

from ..errors import DataValidationError
from ..errors import NumericalError

logger = logging.getLogger(__name__)

SIGNIFICANCE = 0.05
ES_TARGET = 0.0035
MIN_VQR_LENGTH = 50


@dataclasses.dataclass(frozen=True)
class HitSeries:
    hits: np.ndarray
    alpha: float

    def __post_init__(self):
        hits = np.asarray(self.hits)
        if hits.ndim != 1 or not np.all((hits == 0) | (hits == 1)):
            raise DataValidationError("Hits must be a 1-D series of 0 and 1")
        object.__setattr__(self, "hits", hits.astype(np.int64))

    @property
    def m(self) -> int:
        return len(self.hits)

    @classmethod
    def from_forecasts(
        cls, returns: np.ndarray, var: np.ndarray, alpha: float
    ) -> "HitSeries":
        returns = np.asarray(returns, dtype=np.float64)
        var = np.asarray(var, dtype=np.float64)
        if returns.shape != var.shape:
            raise DataValidationError("Returns and VaR forecasts are not aligned")
        return cls(hits=(returns < var).astype(np.int64), alpha=alpha)


@dataclasses.dataclass(frozen=True)
class TestResult:
    __test__ = False

    name: str
    statistic: float
    p_value: float
    dof: int
    extras: dict[str, float] = dataclasses.field(default_factory=dict)

    @property
    def reject_at_5pct(self) -> bool:
        return self.p_value < SIGNIFICANCE

    def as_dict(self) -> dict:
        return dict(
            name=self.name,
            statistic=self.statistic,
            p_value=self.p_value,
            dof=self.dof,
            reject_at_5pct=self.reject_at_5pct,
            **self.extras,
        )


def _chi2_result(name: str, statistic: float, dof: int, **extras: float) -> TestResult:
    statistic = max(float(statistic), 0.0)
    return TestResult(
        name=name,
        statistic=statistic,
        p_value=float(stats.chi2.sf(statistic, dof)),
        dof=dof,
        extras=extras,
    )


def vrate(hits: HitSeries) -> float:
    if hits.m < 1:
        raise DataValidationError("VRate needs at least one forecast")
    return float(hits.hits.sum() / hits.m)


def _bernoulli_loglik(x: int, m: int, p: float) -> float:
    # xlogy keeps 0 * log(0) at 0
    return float(xlogy(x, p) + xlogy(m - x, 1.0 - p))


def kupiec_uc(hits: HitSeries, alpha: float | None = None) -> TestResult:
    alpha = hits.alpha if alpha is None else alpha
    if hits.m < 1:
        raise DataValidationError("Unconditional coverage test needs at least one forecast")
    x, m = int(hits.hits.sum()), hits.m
    lr = -2.0 * (_bernoulli_loglik(x, m, alpha) - _bernoulli_loglik(x, m, x / m))
    return _chi2_result("uc", lr, 1)


def christoffersen_cc(hits: HitSeries) -> TestResult:
    if hits.m < 2:
        raise DataValidationError("Conditional coverage test needs at least two forecasts")
    previous, current = hits.hits[:-1], hits.hits[1:]
    n00 = int(np.sum((previous == 0) & (current == 0)))
    n01 = int(np.sum((previous == 0) & (current == 1)))
    n10 = int(np.sum((previous == 1) & (current == 0)))
    n11 = int(np.sum((previous == 1) & (current == 1)))
    uc = kupiec_uc(hits)
    if n00 + n01 == 0 or n10 + n11 == 0:
        logger.warning(
            "Degenerate hit transitions (n00=%s, n01=%s, n10=%s, n11=%s), independence LR set to 0",
            n00,
            n01,
            n10,
            n11,
        )
        lr_ind = 0.0
    else:
        pi01 = n01 / (n00 + n01)
        pi11 = n11 / (n10 + n11)
        pi = (n01 + n11) / (n00 + n01 + n10 + n11)
        markov = (
            xlogy(n00, 1.0 - pi01)
            + xlogy(n01, pi01)
            + xlogy(n10, 1.0 - pi11)
            + xlogy(n11, pi11)
        )
        independent = xlogy(n00 + n10, 1.0 - pi) + xlogy(n01 + n11, pi)
        lr_ind = max(2.0 * float(markov - independent), 0.0)
    return _chi2_result(
        "cc", uc.statistic + lr_ind, 2, lr_uc=uc.statistic, lr_ind=lr_ind
    )


def dq_test(hits: HitSeries, var: np.ndarray, lags: int = 4) -> TestResult:
    """Dynamic quantile test: centered hits on an intercept, lagged centered hits and VaR"""
    var = np.asarray(var, dtype=np.float64)
    if var.shape != hits.hits.shape:
        raise DataValidationError("Hits and VaR forecasts are not aligned")
    if hits.m <= lags + 2:
        raise DataValidationError(f"DQ test with {lags} lags needs more than {lags + 2} forecasts")
    centered = hits.hits - hits.alpha
    y = centered[lags:]
    columns = [np.ones(len(y))]
    columns += [centered[lags - lag : hits.m - lag] for lag in range(1, lags + 1)]
    columns.append(var[lags:])
    design = np.column_stack(columns)
    if np.linalg.matrix_rank(design) < design.shape[1]:
        raise NumericalError("Singular DQ design matrix")
    beta, *_ = np.linalg.lstsq(design, y, rcond=None)
    statistic = beta @ design.T @ design @ beta / (hits.alpha * (1.0 - hits.alpha))
    return _chi2_result(f"dq{lags}", statistic, lags + 2)


def vqr_test(returns: np.ndarray, var: np.ndarray, alpha: float) -> TestResult:
    """Quantile regression of returns on VaR, Wald test of (intercept, slope) = (0, 1)"""
    returns = np.asarray(returns, dtype=np.float64)
    var = np.asarray(var, dtype=np.float64)
    if returns.shape != var.shape:
        raise DataValidationError("Returns and VaR forecasts are not aligned")
    if len(returns) < MIN_VQR_LENGTH:
        raise DataValidationError(f"VQR test needs at least {MIN_VQR_LENGTH} forecasts")
    design = np.column_stack([np.ones(len(var)), var])
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            fit = sm.QuantReg(returns, design).fit(q=alpha, max_iter=5000)
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise NumericalError(f"Quantile regression failed: {exc}") from exc
    if any(
        issubclass(item.category, (IterationLimitWarning, ConvergenceWarning))
        for item in caught
    ):
        raise NumericalError("Quantile regression did not converge")
    diff = np.asarray(fit.params) - np.array([0.0, 1.0])
    cov = np.asarray(fit.cov_params())
    try:
        statistic = float(diff @ np.linalg.solve(cov, diff))
    except np.linalg.LinAlgError as exc:
        raise NumericalError("Singular quantile regression covariance") from exc
    return _chi2_result(
        "vqr", statistic, 2, intercept=float(fit.params[0]), slope=float(fit.params[1])
    )


def _check_es(returns: np.ndarray, es: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    returns = np.asarray(returns, dtype=np.float64)
    es = np.asarray(es, dtype=np.float64)
    if returns.shape != es.shape:
        raise DataValidationError("Returns and ES forecasts are not aligned")
    if len(es) < 1:
        raise DataValidationError("ES rate needs at least one forecast")
    if not np.all(np.isfinite(es)) or np.any(es >= 0.0):
        raise DataValidationError("ES forecasts must be finite and negative")
    return returns, es


def es_rate(returns: np.ndarray, es: np.ndarray) -> float:
    returns, es = _check_es(returns, es)
    return float(np.mean(returns < es))


def es_uc(returns: np.ndarray, es: np.ndarray, target: float = ES_TARGET) -> TestResult:
    """Unconditional coverage of ES violations against the nominal ES level"""
    returns, es = _check_es(returns, es)
    hits = HitSeries(hits=(returns < es).astype(np.int64), alpha=target)
    result = kupiec_uc(hits)
    return dataclasses.replace(result, name="es-uc")


@dataclasses.dataclass(frozen=True)
class ExtremityComparison:
    less_extreme_days: int
    m: int

    @property
    def share(self) -> float:
        return self.less_extreme_days / self.m


def extremity_comparison(first: np.ndarray, second: np.ndarray) -> ExtremityComparison:
    """Days on which the first lower-tail forecast is closer to zero than the second"""
    first = np.asarray(first, dtype=np.float64)
    second = np.asarray(second, dtype=np.float64)
    if first.shape != second.shape or len(first) == 0:
        raise DataValidationError("Forecast series must be aligned and non-empty")
    return ExtremityComparison(
        less_extreme_days=int(np.sum(first > second)), m=len(first)
    )

import logging

import numpy as np

from ..errors import DataValidationError
from ..models.recursions import InitRule
from ..models.recursions import RiskPath
from ..models.recursions import run_model
from ..models.spec import in_region
from ..models.spec import ModelFamily
from ..models.spec import ModelSpec
from ..models.spec import ParamVector
from ..models.spec import PARAM_NAMES
from ..objective import al_loglik
from ..objective import full_loglik
from ..objective import NEG_INF

logger = logging.getLogger(__name__)


class ModelLikelihood:
    """Log-likelihood and flat-prior log-posterior of one model on one data window"""

    def __init__(
        self,
        spec: ModelSpec,
        returns: np.ndarray,
        measures: np.ndarray | None = None,
        init: InitRule = InitRule(),
    ):
        if spec.family == ModelFamily.CARE_SAV:
            raise DataValidationError("CARE-SAV has no likelihood, it is fitted by grid search")
        self.spec = spec
        self.returns = np.ascontiguousarray(returns, dtype=np.float64)
        if spec.family.is_realized:
            if measures is None:
                raise DataValidationError(f"{spec.model_id} requires measure {spec.measure_id}")
            measures = np.ascontiguousarray(measures, dtype=np.float64)
            if measures.shape != self.returns.shape:
                raise DataValidationError("Measures are not aligned with returns")
            if not np.all(np.isfinite(measures)):
                raise DataValidationError(
                    f"Measure {spec.measure_id} is absent on some in-sample days"
                )
        self.measures = measures
        self.init = init
        logger.debug(
            "Region of %s bounds persistence below 1 only, stationarity is not checked",
            spec.model_id,
        )

    @property
    def family(self) -> ModelFamily:
        return self.spec.family

    @property
    def names(self) -> tuple[str, ...]:
        return PARAM_NAMES[self.spec.family]

    @property
    def alpha(self) -> float:
        return self.spec.alpha

    def params(self, values: np.ndarray) -> ParamVector:
        return ParamVector(family=self.family, values=values)

    def path(self, values: np.ndarray) -> RiskPath:
        return run_model(
            self.family,
            self.params(values),
            self.returns,
            self.alpha,
            measures=self.measures,
            init=self.init,
            threshold=self.spec.threshold,
        )

    def loglik(self, values: np.ndarray) -> float:
        params = self.params(values)
        path = run_model(
            self.family,
            params,
            self.returns,
            self.alpha,
            measures=self.measures,
            init=self.init,
            threshold=self.spec.threshold,
        )
        if not path.valid:
            return NEG_INF
        if self.family.is_realized:
            report = full_loglik(self.returns, self.measures, path, params, self.alpha)
        else:
            report = al_loglik(self.returns, path, self.alpha)
        return report.total

    def log_posterior(self, values: np.ndarray) -> float:
        values = np.asarray(values, dtype=np.float64)
        if not in_region(self.family, values, self.alpha, self.spec.constraints):
            return NEG_INF
        return self.loglik(values)

    __call__ = log_posterior

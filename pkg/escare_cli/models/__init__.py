from .recursions import es_scaling_factor
from .recursions import forecast_one_step
from .recursions import InitRule
from .recursions import RiskPath
from .recursions import run_baseline
from .recursions import run_es_care
from .recursions import run_model
from .recursions import run_re_es_care
from .recursions import run_re_t_es_care
from .spec import ModelFamily
from .spec import ModelSpec
from .spec import ParamVector

__all__ = [
    "InitRule",
    "ModelFamily",
    "ModelSpec",
    "ParamVector",
    "RiskPath",
    "es_scaling_factor",
    "forecast_one_step",
    "run_baseline",
    "run_es_care",
    "run_model",
    "run_re_es_care",
    "run_re_t_es_care",
]

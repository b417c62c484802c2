from .coverage import christoffersen_cc
from .coverage import dq_test
from .coverage import es_rate
from .coverage import es_uc
from .coverage import extremity_comparison
from .coverage import HitSeries
from .coverage import kupiec_uc
from .coverage import TestResult
from .coverage import vqr_test
from .coverage import vrate
from .mcs import mcs
from .mcs import McsResult

__all__ = [
    "HitSeries",
    "McsResult",
    "TestResult",
    "christoffersen_cc",
    "dq_test",
    "es_rate",
    "es_uc",
    "extremity_comparison",
    "kupiec_uc",
    "mcs",
    "vqr_test",
    "vrate",
]

import dataclasses
import enum
import logging
import typing

import numpy as np
from pydantic import BaseModel
from pydantic import ConfigDict
from pydantic import Field
from pydantic import field_validator
from pydantic import model_validator

from ..errors import DataValidationError

logger = logging.getLogger(__name__)

# Coordinates the stated constraints leave unbounded are kept within this
# magnitude so the flat prior over the region stays proper.
PRIOR_LIMIT = 10.0
# Distance kept from open interval ends when handing bounds to optimizers.
BOUND_EPS = 1e-8


@enum.unique
class ModelFamily(str, enum.Enum):
    CARE_SAV = "care-sav"
    ES_CAVIAR_ADD = "es-caviar-add"
    ES_CAVIAR_MULT = "es-caviar-mult"
    ES_CARE = "es-care"
    RE_ES_CARE = "re-es-care"
    RE_T_ES_CARE = "re-t-es-care"

    @property
    def is_realized(self) -> bool:
        return self in (ModelFamily.RE_ES_CARE, ModelFamily.RE_T_ES_CARE)

    @property
    def is_threshold(self) -> bool:
        return self == ModelFamily.RE_T_ES_CARE

    @property
    def has_tau(self) -> bool:
        return self in (
            ModelFamily.ES_CARE,
            ModelFamily.RE_ES_CARE,
            ModelFamily.RE_T_ES_CARE,
        )


MEASUREMENT_PARAMS = ("xi", "phi", "delta1", "delta2", "sigma_u")

PARAM_NAMES: dict[ModelFamily, tuple[str, ...]] = {
    ModelFamily.CARE_SAV: ("beta1", "beta2", "beta3"),
    ModelFamily.ES_CAVIAR_ADD: (
        "beta1",
        "beta2",
        "beta3",
        "gamma0",
        "gamma1",
        "gamma2",
    ),
    ModelFamily.ES_CAVIAR_MULT: ("beta1", "beta2", "beta3", "gamma0"),
    ModelFamily.ES_CARE: ("beta1", "beta2", "beta3", "tau"),
    ModelFamily.RE_ES_CARE: ("beta1", "beta2", "beta3", "tau", *MEASUREMENT_PARAMS),
    ModelFamily.RE_T_ES_CARE: (
        "beta1",
        "beta2",
        "beta3",
        "beta4",
        "beta5",
        "beta6",
        "tau",
        *MEASUREMENT_PARAMS,
    ),
}


class RegionLimits(BaseModel):
    """Box limits of the parameter region beyond the stated model constraints"""

    model_config = ConfigDict(frozen=True)

    # bound on |coefficient| for coordinates otherwise unconstrained
    param_limit: float = Field(PRIOR_LIMIT, gt=0)
    sigma_u_max: float = Field(PRIOR_LIMIT, gt=0)


class ModelSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    family: ModelFamily
    alpha: float = 0.01
    measure_id: str | None = None
    # threshold on the lagged return, self-exciting
    threshold: float = 0.0
    constraints: RegionLimits = RegionLimits()

    @field_validator("alpha")
    @classmethod
    def check_alpha(cls, value: float) -> float:
        if not 0.0 < value < 0.5:
            raise ValueError(f"alpha must be in (0, 0.5), got {value}")
        return value

    @model_validator(mode="after")
    def check_measure(self) -> "ModelSpec":
        if self.family.is_realized and not self.measure_id:
            raise ValueError(f"Model family {self.family.value} requires measure_id")
        return self

    @property
    def model_id(self) -> str:
        if self.measure_id is None or not self.family.is_realized:
            return self.family.value
        return f"{self.family.value}-{self.measure_id.lower()}"


@dataclasses.dataclass(frozen=True)
class ParamVector:
    family: ModelFamily
    values: np.ndarray
    # expectile level supplied from outside the vector (CARE-SAV grid search)
    fixed_tau: float | None = None

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        expected = len(PARAM_NAMES[self.family])
        if values.shape != (expected,):
            raise DataValidationError(
                f"{self.family.value} expects {expected} parameters, got shape {values.shape}"
            )
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def names(self) -> tuple[str, ...]:
        return PARAM_NAMES[self.family]

    def __getitem__(self, name: str) -> float:
        try:
            return float(self.values[self.names.index(name)])
        except ValueError:
            raise KeyError(name) from None

    def get(self, name: str, default: float | None = None) -> float | None:
        if name not in self.names:
            return default
        return self[name]

    @property
    def tau(self) -> float | None:
        if "tau" in self.names:
            return self["tau"]
        return self.fixed_tau

    def regime_betas(self) -> tuple[np.ndarray, np.ndarray]:
        low = self.values[:3].copy()
        if self.family.is_threshold:
            high = self.values[3:6].copy()
        else:
            high = low.copy()
        return low, high

    def as_dict(self) -> dict[str, float]:
        result = {name: float(value) for name, value in zip(self.names, self.values)}
        if self.fixed_tau is not None:
            result["tau"] = self.fixed_tau
        return result

    @classmethod
    def from_dict(
        cls, family: ModelFamily, mapping: typing.Mapping[str, float]
    ) -> "ParamVector":
        names = PARAM_NAMES[family]
        missing = [name for name in names if name not in mapping]
        if missing:
            raise DataValidationError(
                f"Missing parameters for {family.value}: {', '.join(missing)}"
            )
        fixed_tau = None
        if "tau" not in names and "tau" in mapping:
            fixed_tau = float(mapping["tau"])
        return cls(
            family=family,
            values=np.array([mapping[name] for name in names], dtype=np.float64),
            fixed_tau=fixed_tau,
        )

    def replace(self, **kwargs: float) -> "ParamVector":
        mapping = self.as_dict()
        mapping.update(kwargs)
        return ParamVector.from_dict(self.family, mapping)


def region_violations(
    family: ModelFamily,
    values: np.ndarray,
    alpha: float,
    limits: RegionLimits = RegionLimits(),
) -> list[str]:
    """Constraint violations of a raw parameter vector, empty when inside the region"""
    limit, sigma_max = limits.param_limit, limits.sigma_u_max
    names = PARAM_NAMES[family]
    violations: list[str] = []
    if not np.all(np.isfinite(values)):
        return ["non-finite parameter"]
    for name, value in zip(names, values):
        if name == "tau":
            if not 0.0 < value < alpha:
                violations.append(f"tau={value} outside (0, {alpha})")
        elif name in ("beta3", "beta6"):
            if not value < 1.0:
                violations.append(f"{name}={value} not below 1")
            elif value < -limit:
                violations.append(f"{name}={value} below {-limit}")
        elif name == "sigma_u":
            if not 0.0 < value <= sigma_max:
                violations.append(f"sigma_u={value} outside (0, {sigma_max}]")
        elif family == ModelFamily.ES_CAVIAR_ADD and name.startswith("gamma"):
            if not 0.0 <= value <= limit:
                violations.append(f"{name}={value} outside [0, {limit}]")
        elif abs(value) > limit:
            violations.append(f"|{name}|={abs(value)} above {limit}")
    return violations


def in_region(
    family: ModelFamily,
    values: np.ndarray,
    alpha: float,
    limits: RegionLimits = RegionLimits(),
) -> bool:
    return not region_violations(family, values, alpha, limits)


def optimizer_bounds(
    family: ModelFamily, alpha: float, limits: RegionLimits = RegionLimits()
) -> list[tuple[float, float]]:
    limit = limits.param_limit
    bounds: list[tuple[float, float]] = []
    for name in PARAM_NAMES[family]:
        if name == "tau":
            bounds.append((BOUND_EPS, alpha - BOUND_EPS))
        elif name in ("beta3", "beta6"):
            bounds.append((-limit, 1.0 - BOUND_EPS))
        elif name == "sigma_u":
            bounds.append((BOUND_EPS, limits.sigma_u_max))
        elif family == ModelFamily.ES_CAVIAR_ADD and name.startswith("gamma"):
            bounds.append((0.0, limit))
        else:
            bounds.append((-limit, limit))
    return bounds

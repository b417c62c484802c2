import numpy as np
import pytest
from pydantic import ValidationError

from escare_cli.errors import DataValidationError
from escare_cli.models.spec import in_region
from escare_cli.models.spec import ModelFamily
from escare_cli.models.spec import ModelSpec
from escare_cli.models.spec import optimizer_bounds
from escare_cli.models.spec import PARAM_NAMES
from escare_cli.models.spec import ParamVector
from escare_cli.models.spec import RegionLimits
from escare_cli.models.spec import region_violations


@pytest.mark.parametrize(
    "family, measure_id, expected",
    [
        (ModelFamily.ES_CARE, None, "es-care"),
        (ModelFamily.ES_CARE, "rv", "es-care"),
        (ModelFamily.RE_ES_CARE, "RR", "re-es-care-rr"),
        (ModelFamily.RE_T_ES_CARE, "ssrr", "re-t-es-care-ssrr"),
    ],
)
def test_model_id(family: ModelFamily, measure_id: str | None, expected: str):
    assert ModelSpec(family=family, measure_id=measure_id).model_id == expected


@pytest.mark.parametrize(
    "payload",
    [
        dict(family="es-care", alpha=0.0),
        dict(family="es-care", alpha=0.5),
        dict(family="re-es-care"),
        dict(family="garch"),
    ],
)
def test_model_spec_invalid(payload: dict):
    with pytest.raises(ValidationError):
        ModelSpec.model_validate(payload)


@pytest.mark.parametrize(
    "family, size",
    [
        (ModelFamily.CARE_SAV, 3),
        (ModelFamily.ES_CAVIAR_ADD, 6),
        (ModelFamily.ES_CAVIAR_MULT, 4),
        (ModelFamily.ES_CARE, 4),
        (ModelFamily.RE_ES_CARE, 9),
        (ModelFamily.RE_T_ES_CARE, 12),
    ],
)
def test_param_names(family: ModelFamily, size: int):
    assert len(PARAM_NAMES[family]) == size
    assert len(optimizer_bounds(family, 0.01)) == size


def test_param_vector_access():
    params = ParamVector.from_dict(
        ModelFamily.ES_CARE, dict(beta1=-0.05, beta2=-0.2, beta3=0.85, tau=0.0015)
    )
    assert params["beta3"] == 0.85
    assert params.tau == 0.0015
    assert params.get("gamma0") is None
    with pytest.raises(KeyError):
        params["gamma0"]
    low, high = params.regime_betas()
    np.testing.assert_array_equal(low, high)
    assert params.replace(tau=0.002).tau == 0.002
    assert params.tau == 0.0015


def test_param_vector_fixed_tau():
    params = ParamVector.from_dict(
        ModelFamily.CARE_SAV, dict(beta1=-0.05, beta2=-0.2, beta3=0.85, tau=0.002)
    )
    assert params.tau == 0.002
    assert params.as_dict()["tau"] == 0.002


def test_param_vector_errors():
    with pytest.raises(DataValidationError, match="expects 4 parameters"):
        ParamVector(family=ModelFamily.ES_CARE, values=np.zeros(3))
    with pytest.raises(DataValidationError, match="Missing parameters"):
        ParamVector.from_dict(ModelFamily.ES_CARE, dict(beta1=0.0))


def test_threshold_regimes():
    values = np.arange(1.0, 13.0)
    params = ParamVector(family=ModelFamily.RE_T_ES_CARE, values=values)
    low, high = params.regime_betas()
    assert low.tolist() == [1.0, 2.0, 3.0]
    assert high.tolist() == [4.0, 5.0, 6.0]


@pytest.mark.parametrize(
    "family, values, message",
    [
        (ModelFamily.ES_CARE, [-0.05, -0.2, 0.85, 0.0015], None),
        (ModelFamily.ES_CARE, [-0.05, -0.2, 0.85, 0.0], "tau"),
        (ModelFamily.ES_CARE, [-0.05, -0.2, 0.85, 0.01], "tau"),
        (ModelFamily.ES_CARE, [-0.05, -0.2, 1.0, 0.0015], "beta3"),
        (ModelFamily.ES_CARE, [-11.0, -0.2, 0.85, 0.0015], "beta1"),
        (ModelFamily.ES_CAVIAR_ADD, [-0.05, -0.2, 0.85, 0.1, -0.1, 0.5], "gamma1"),
        (ModelFamily.ES_CARE, [np.nan, -0.2, 0.85, 0.0015], "non-finite"),
        (
            ModelFamily.RE_ES_CARE,
            [-0.05, -0.2, 0.85, 0.0015, 0.1, 0.39, 0.05, 0.1, 0.0],
            "sigma_u",
        ),
        (
            ModelFamily.RE_T_ES_CARE,
            [-0.1, -0.5, 0.8, -0.2, -0.2, 1.2, 0.0015, 0.1, 0.39, 0.05, 0.1, 0.3],
            "beta6",
        ),
    ],
)
def test_region(family: ModelFamily, values: list[float], message: str | None):
    violations = region_violations(family, np.array(values), 0.01)
    if message is None:
        assert violations == []
        assert in_region(family, np.array(values), 0.01)
    else:
        assert len(violations) == 1
        assert message in violations[0]


def test_region_limits():
    values = np.array([-11.0, -0.2, 0.85, 0.0015])
    assert not in_region(ModelFamily.ES_CARE, values, 0.01)
    wide = RegionLimits(param_limit=20.0)
    assert in_region(ModelFamily.ES_CARE, values, 0.01, wide)
    bounds = optimizer_bounds(ModelFamily.ES_CARE, 0.01, wide)
    assert bounds[0] == (-20.0, 20.0)
    assert bounds[2][0] == -20.0

    realized = np.array([-0.05, -0.2, 0.85, 0.0015, 0.1, 0.39, 0.05, 0.1, 0.3])
    assert in_region(ModelFamily.RE_ES_CARE, realized, 0.01)
    tight = RegionLimits(sigma_u_max=0.2)
    violations = region_violations(ModelFamily.RE_ES_CARE, realized, 0.01, tight)
    assert len(violations) == 1
    assert "outside (0, 0.2]" in violations[0]
    assert optimizer_bounds(ModelFamily.RE_ES_CARE, 0.01, tight)[-1][1] == 0.2


def test_model_spec_constraints():
    spec = ModelSpec.model_validate(
        dict(family="es-care", constraints=dict(param_limit=5.0))
    )
    assert spec.constraints.param_limit == 5.0
    assert spec.constraints.sigma_u_max == 10.0
    assert ModelSpec(family=ModelFamily.ES_CARE).constraints == RegionLimits()
    with pytest.raises(ValidationError):
        ModelSpec.model_validate(dict(family="es-care", constraints=dict(param_limit=0.0)))

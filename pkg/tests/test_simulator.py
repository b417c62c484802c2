import numpy as np
import pytest

from .factories import DgpSpecFactory
from escare_cli.config import SimModel
from escare_cli.errors import DataValidationError
from escare_cli.models.recursions import es_scaling_factor
from escare_cli.models.recursions import run_re_es_care
from escare_cli.models.recursions import run_re_t_es_care
from escare_cli.models.recursions import InitRule
from escare_cli.models.spec import in_region
from escare_cli.models.spec import ModelFamily
from escare_cli.simulator import map_to_escare
from escare_cli.simulator import MEASURE_INTERCEPT
from escare_cli.simulator import MEASURE_LOADING
from escare_cli.simulator import simulate
from escare_cli.simulator import simulate_replicates
from escare_cli.simulator import SIM_MEASURE_ID
from escare_cli.simulator import true_risk
from escare_cli.simulator import true_tau


def test_linear_mapping():
    truth = map_to_escare(SimModel.LINEAR, 0.01)
    params = truth.params
    assert params.family == ModelFamily.RE_ES_CARE
    expected = dict(
        beta1=-0.0465,
        beta2=-0.2326,
        beta3=0.85,
        xi=0.1,
        phi=0.3869,
        delta1=0.0465,
        delta2=0.1082,
        sigma_u=0.3,
    )
    for name, value in expected.items():
        assert params[name] == pytest.approx(value, abs=1e-4), name
    assert params.tau == pytest.approx(0.0014525, abs=1e-6)
    assert in_region(params.family, params.values, 0.01)


def test_threshold_mapping():
    params = map_to_escare(SimModel.THRESHOLD, 0.01).params
    assert params.family == ModelFamily.RE_T_ES_CARE
    for name, value in dict(
        beta1=-0.1163, beta2=-0.4653, beta3=0.8, beta4=-0.2326, beta5=-0.2326, beta6=0.75
    ).items():
        assert params[name] == pytest.approx(value, abs=1e-4), name


def test_mapping_invalid_alpha():
    with pytest.raises(DataValidationError):
        map_to_escare(SimModel.LINEAR, 0.7)


def test_true_risk():
    risk = true_risk(np.array([1.0, 2.0]), 0.01)
    np.testing.assert_allclose(risk.var, [-2.32635, -4.65270], atol=1e-4)
    np.testing.assert_allclose(risk.es, [-2.66521, -5.33042], atol=1e-4)
    # the Gaussian level turns VaR into ES through the scaling factor
    np.testing.assert_allclose(risk.es, es_scaling_factor(risk.tau, 0.01) * risk.var, rtol=1e-6)


def test_true_risk_rejects_nonpositive():
    with pytest.raises(DataValidationError):
        true_risk(np.array([1.0, 0.0]), 0.01)


def test_true_tau():
    assert 0.0 < true_tau(0.01) < 0.01
    assert true_tau(0.025) > true_tau(0.01)


def test_simulate_shapes():
    spec = DgpSpecFactory(n=300, burn_in=50, seed=4)
    path = simulate(spec)
    assert path.returns.shape == path.measures.shape == path.sqrt_h.shape == (300,)
    assert np.all(path.sqrt_h > 0.0)
    assert path.sqrt_h_next > 0.0
    series = path.to_series()
    assert len(series) == 300
    np.testing.assert_array_equal(series.measure(SIM_MEASURE_ID), path.measures)


def test_simulate_is_seeded():
    first = simulate(DgpSpecFactory(n=200, seed=3))
    second = simulate(DgpSpecFactory(n=200, seed=3))
    np.testing.assert_array_equal(first.returns, second.returns)


def test_simulate_without_noise():
    spec = DgpSpecFactory(n=150, burn_in=0, seed=8)
    shocks = np.random.default_rng(1).standard_normal(150)
    path = simulate(spec, shocks=shocks, noise=np.zeros(150))
    expected = (
        MEASURE_INTERCEPT
        + MEASURE_LOADING * path.sqrt_h
        - 0.02 * shocks
        + 0.02 * (shocks**2 - 1.0)
    )
    np.testing.assert_allclose(path.measures, expected)
    np.testing.assert_allclose(path.returns, path.sqrt_h * shocks)


def test_simulate_bad_overrides():
    with pytest.raises(DataValidationError, match="length"):
        simulate(DgpSpecFactory(n=100, burn_in=0), shocks=np.zeros(10))


def test_threshold_regimes_follow_lagged_sign():
    spec = DgpSpecFactory(model=SimModel.THRESHOLD, n=200, burn_in=0, seed=2)
    path = simulate(spec)
    low = 0.05 + 0.20 * path.measures[:-1] + 0.80 * path.sqrt_h[:-1]
    high = 0.10 + 0.10 * path.measures[:-1] + 0.75 * path.sqrt_h[:-1]
    expected = np.where(path.returns[:-1] <= 0.0, low, high)
    np.testing.assert_allclose(path.sqrt_h[1:], expected)


@pytest.mark.parametrize(
    "model, runner",
    [
        (SimModel.LINEAR, run_re_es_care),
        (SimModel.THRESHOLD, run_re_t_es_care),
    ],
)
def test_true_parameters_reproduce_var(model: SimModel, runner):
    spec = DgpSpecFactory(model=model, n=300, seed=6)
    path = simulate(spec)
    truth = map_to_escare(model, 0.01)
    risk = true_risk(path.sqrt_h, 0.01)
    init = InitRule(mu0=float(risk.var[0]), es0=float(risk.es[0]))
    fitted = runner(truth.params, path.returns, path.measures, 0.01, init)
    np.testing.assert_allclose(fitted.mu, risk.var, rtol=1e-8)
    np.testing.assert_allclose(fitted.es, risk.es, rtol=1e-3)


def test_replicates_differ():
    paths = simulate_replicates(DgpSpecFactory(n=100, seed=1), 3)
    assert len(paths) == 3
    assert not np.array_equal(paths[0].returns, paths[1].returns)

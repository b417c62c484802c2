import os

import numpy as np
import pytest
from pytest_mock import MockFixture

from .factories import DgpSpecFactory
from .factories import McmcConfigFactory
from .factories import MlConfigFactory
from escare_cli.config import Estimator
from escare_cli.config import SimModel
from escare_cli.errors import NumericalError
from escare_cli.models.spec import ModelFamily
from escare_cli.simulator import map_to_escare
from escare_cli.study import ES_NEXT
from escare_cli.study import ReplicateOutcome
from escare_cli.study import run_study
from escare_cli.study import sign_pattern_matches
from escare_cli.study import study_family
from escare_cli.study import summarize
from escare_cli.study import VAR_NEXT


@pytest.mark.parametrize(
    "model, family",
    [
        (SimModel.LINEAR, ModelFamily.RE_ES_CARE),
        (SimModel.THRESHOLD, ModelFamily.RE_T_ES_CARE),
    ],
)
def test_study_family(model: SimModel, family: ModelFamily):
    assert study_family(model) == family


def test_sign_pattern():
    truth = map_to_escare(SimModel.LINEAR, 0.01)
    params = truth.params.as_dict()
    assert sign_pattern_matches(params, truth)
    assert not sign_pattern_matches({**params, "beta2": 0.1}, truth)


def make_outcome(replicate: int, shift: float, error: str | None = None) -> ReplicateOutcome:
    truth = map_to_escare(SimModel.LINEAR, 0.01)
    params = {name: value + shift for name, value in truth.params.as_dict().items()}
    return ReplicateOutcome(
        replicate=replicate,
        estimator=Estimator.ML,
        params=None if error else params,
        var_next=np.nan if error else -2.0 + shift,
        es_next=np.nan if error else -2.5 + shift,
        true_var_next=-2.0,
        true_es_next=-2.5,
        error=error,
    )


def test_summarize():
    truth = map_to_escare(SimModel.LINEAR, 0.01)
    outcomes = [make_outcome(0, 0.01), make_outcome(1, -0.01), make_outcome(2, 0.0, "boom")]
    summary = summarize(outcomes, truth, [Estimator.ML, Estimator.MCMC])
    table = summary.table
    assert table.index.name == "quantity"
    assert list(table.index)[-2:] == [VAR_NEXT, ES_NEXT]
    np.testing.assert_allclose(table["ml_mean"], table["true"], atol=1e-12)
    np.testing.assert_allclose(table["ml_rmse"], 0.01)
    assert table["mcmc_mean"].isna().all()
    assert summary.failures == {Estimator.ML: 1, Estimator.MCMC: 0}
    assert summary.sign_agreement[Estimator.ML] == 1.0
    assert np.isnan(summary.sign_agreement[Estimator.MCMC])


def test_failed_fit_is_recorded(mocker: MockFixture):
    mocker.patch("escare_cli.study.fit_model", side_effect=NumericalError("No feasible start"))
    outcomes, summary = run_study(
        DgpSpecFactory(n=150, seed=2), 2, [Estimator.ML], seed=3
    )
    assert len(outcomes) == 2
    assert all(not outcome.ok for outcome in outcomes)
    assert all(outcome.error == "No feasible start" for outcome in outcomes)
    assert summary.failures[Estimator.ML] == 2
    assert np.all(np.array([outcome.true_es_next for outcome in outcomes]) < 0.0)


def test_run_study_ml():
    outcomes, summary = run_study(
        DgpSpecFactory(n=500, seed=5),
        2,
        [Estimator.ML],
        ml_config=MlConfigFactory(),
        seed=11,
    )
    assert [outcome.replicate for outcome in outcomes] == [0, 1]
    assert all(outcome.ok for outcome in outcomes)
    for outcome in outcomes:
        assert outcome.es_next < outcome.var_next < 0.0
        assert outcome.true_es_next < outcome.true_var_next < 0.0
    assert set(summary.table.columns) == {"true", "ml_mean", "ml_rmse"}


@pytest.mark.slow
def test_run_study_threshold_both_estimators():
    outcomes, summary = run_study(
        DgpSpecFactory(model=SimModel.THRESHOLD, n=800, seed=21),
        2,
        [Estimator.MCMC, Estimator.ML],
        ml_config=MlConfigFactory(),
        mcmc_config=McmcConfigFactory(),
        seed=4,
        threads=2,
    )
    assert len(outcomes) == 4
    assert "beta6" in summary.table.index
    assert set(summary.failures) == {Estimator.MCMC, Estimator.ML}


ACCEPTANCE_MCMC = dict(epoch_length=5000, epoch_discard=1000, final_epoch=5000, final_discard=1000)


@pytest.mark.slow
def test_linear_recovery():
    _, summary = run_study(
        DgpSpecFactory(n=1900, seed=1),
        100,
        [Estimator.MCMC, Estimator.ML],
        mcmc_config=McmcConfigFactory(**ACCEPTANCE_MCMC, max_epochs=15),
        seed=2024,
        threads=os.cpu_count() or 1,
    )
    table = summary.table
    assert 0.79 <= table.loc["beta3", "mcmc_mean"] <= 0.86
    assert 0.0010 <= table.loc["tau", "mcmc_mean"] <= 0.0017
    # the truth is the mean over replicates of the true next day values
    for quantity in (VAR_NEXT, ES_NEXT):
        assert abs(table.loc[quantity, "mcmc_mean"] - table.loc[quantity, "true"]) < 0.07
        assert table.loc[quantity, "mcmc_rmse"] <= 1.15 * table.loc[quantity, "ml_rmse"]
    assert summary.failures[Estimator.MCMC] <= 5


@pytest.mark.slow
def test_threshold_recovery():
    _, summary = run_study(
        DgpSpecFactory(model=SimModel.THRESHOLD, n=1900, seed=3),
        50,
        [Estimator.MCMC],
        mcmc_config=McmcConfigFactory(**ACCEPTANCE_MCMC, max_epochs=15),
        seed=2025,
        threads=os.cpu_count() or 1,
    )
    table = summary.table
    assert 0.72 <= table.loc["beta3", "mcmc_mean"] <= 0.82
    assert 0.70 <= table.loc["beta6", "mcmc_mean"] <= 0.80
    assert summary.sign_agreement[Estimator.MCMC] >= 0.9

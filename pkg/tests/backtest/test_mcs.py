import numpy as np
import pytest

from escare_cli.backtest.mcs import block_bootstrap_indices
from escare_cli.backtest.mcs import default_block_length
from escare_cli.backtest.mcs import mcs
from escare_cli.errors import DataValidationError


@pytest.mark.parametrize("m, expected", [(1, 1), (8, 2), (1000, 10), (1001, 11)])
def test_default_block_length(m: int, expected: int):
    assert default_block_length(m) == expected


def test_block_bootstrap_indices(rng: np.random.Generator):
    indices = block_bootstrap_indices(100, 50, 7, rng)
    assert indices.shape == (50, 100)
    assert indices.min() >= 0 and indices.max() < 100
    # every block is a run of consecutive days
    assert np.all(np.diff(indices[:, :7], axis=1) == 1)


def test_identical_models_survive(rng: np.random.Generator):
    column = rng.exponential(size=300)
    result = mcs(np.column_stack([column, column]), ["a", "b"], rng=rng, bootstrap_replicates=200)
    assert result.included == ["a", "b"]
    assert result.eliminated == []
    assert result.pvalues == {"a": 1.0, "b": 1.0}


def test_dominated_model_eliminated(rng: np.random.Generator):
    base = rng.exponential(size=300)
    losses = np.column_stack([base, base + 10.0, base.copy()])
    result = mcs(losses, ["good", "bad", "close"], rng=rng, bootstrap_replicates=500)
    assert "bad" in result.eliminated
    assert result.eliminated[0] == "bad"
    assert result.pvalues["bad"] < 0.1
    assert "good" in result.included
    assert all(result.pvalues[name] >= result.pvalues["bad"] for name in result.included)


def test_single_survivor_pvalue(rng: np.random.Generator):
    base = rng.exponential(size=200)
    result = mcs(np.column_stack([base, base + 5.0]), ["x", "y"], rng=rng, bootstrap_replicates=200)
    assert result.included == ["x"]
    assert result.pvalues["x"] == 1.0


def test_permutation_invariant():
    rng = np.random.default_rng(3)
    base = rng.exponential(size=250)
    losses = np.column_stack([base, base + 1.0, base + rng.normal(0.5, 1.0, size=250), base + 3.0])
    names = ["m1", "m2", "m3", "m4"]
    first = mcs(losses, names, rng=np.random.default_rng(9), bootstrap_replicates=300)
    order = [2, 0, 3, 1]
    second = mcs(
        losses[:, order],
        [names[i] for i in order],
        rng=np.random.default_rng(9),
        bootstrap_replicates=300,
    )
    assert sorted(first.included) == sorted(second.included)


@pytest.mark.parametrize(
    "kwargs, match",
    [
        (dict(bootstrap_replicates=99), "bootstrap replicates"),
        (dict(level=1.0), "level"),
    ],
)
def test_invalid_arguments(kwargs: dict, match: str):
    with pytest.raises(DataValidationError, match=match):
        mcs(np.ones((10, 2)), ["a", "b"], **kwargs)


def test_needs_two_models():
    with pytest.raises(DataValidationError, match="at least 2 models"):
        mcs(np.ones((10, 1)), ["a"])


def test_missing_losses():
    losses = np.ones((10, 2))
    losses[0, 0] = np.nan
    with pytest.raises(DataValidationError, match="missing"):
        mcs(losses, ["a", "b"])


@pytest.mark.slow
def test_best_model_coverage():
    rng = np.random.default_rng(20240612)
    offsets = np.array([0.0, 0.05, 0.1, 0.3])
    names = ["best", "near", "worse", "worst"]
    retained = 0
    trials = 200
    for _ in range(trials):
        common = rng.exponential(size=(500, 1))
        losses = common + offsets + rng.normal(size=(500, len(offsets)))
        result = mcs(losses, names, level=0.90, bootstrap_replicates=1000, rng=rng)
        retained += "best" in result.included
    assert retained / trials >= 0.85

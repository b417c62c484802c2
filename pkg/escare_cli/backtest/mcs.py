import dataclasses
import logging
import math

import numpy as np

from ..errors import DataValidationError

logger = logging.getLogger(__name__)

MIN_BOOTSTRAP_REPLICATES = 100


@dataclasses.dataclass(frozen=True)
class McsResult:
    included: list[str]
    eliminated: list[str]
    pvalues: dict[str, float]
    level: float


def default_block_length(m: int) -> int:
    return max(int(math.ceil(m ** (1.0 / 3.0))), 1)


def block_bootstrap_indices(
    m: int, replicates: int, block_length: int, rng: np.random.Generator
) -> np.ndarray:
    """Moving block bootstrap resamples of range(m), one row per replicate"""
    block_length = min(block_length, m)
    blocks = math.ceil(m / block_length)
    starts = rng.integers(0, m - block_length + 1, size=(replicates, blocks))
    indices = starts[:, :, None] + np.arange(block_length)
    return indices.reshape(replicates, blocks * block_length)[:, :m]


def _studentize(numerator: np.ndarray, variance: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        scaled = numerator / np.sqrt(variance)
    zero_variance = variance <= 0.0
    return np.where(
        zero_variance,
        np.where(numerator == 0.0, 0.0, np.sign(numerator) * np.inf),
        scaled,
    )


def mcs(
    losses: np.ndarray,
    names: list[str],
    level: float = 0.90,
    bootstrap_replicates: int = 5_000,
    block_length: int | None = None,
    rng: np.random.Generator | None = None,
) -> McsResult:
    """Model confidence set with the range statistic max |t_ij| over pairs"""
    losses = np.asarray(losses, dtype=np.float64)
    if losses.ndim != 2 or losses.shape[1] < 2:
        raise DataValidationError("MCS needs a day by model loss matrix with at least 2 models")
    if len(names) != losses.shape[1]:
        raise DataValidationError("Model names do not match loss columns")
    if not np.all(np.isfinite(losses)):
        raise DataValidationError("Loss matrix contains missing values")
    if bootstrap_replicates < MIN_BOOTSTRAP_REPLICATES:
        raise DataValidationError(
            f"MCS needs at least {MIN_BOOTSTRAP_REPLICATES} bootstrap replicates, got {bootstrap_replicates}"
        )
    if not 0.0 < level < 1.0:
        raise DataValidationError(f"MCS level must be in (0, 1), got {level}")
    m = losses.shape[0]
    block_length = block_length or default_block_length(m)
    rng = rng or np.random.default_rng()
    indices = block_bootstrap_indices(m, bootstrap_replicates, block_length, rng)
    means = losses.mean(axis=0)
    boot_means = np.column_stack(
        [losses[:, column][indices].mean(axis=1) for column in range(losses.shape[1])]
    )

    active = list(range(losses.shape[1]))
    eliminated: list[str] = []
    pvalues: dict[str, float] = {}
    running = 0.0
    while len(active) > 1:
        diff = means[active][:, None] - means[active][None, :]
        boot_diff = boot_means[:, active][:, :, None] - boot_means[:, active][:, None, :]
        centered = boot_diff - diff
        variance = np.mean(centered * centered, axis=0)
        t_stats = _studentize(diff, variance)
        statistic = float(np.max(np.abs(t_stats)))
        boot_stats = np.max(np.abs(_studentize(centered, variance)), axis=(1, 2))
        p_value = float(np.mean(boot_stats >= statistic))
        running = max(running, p_value)
        if p_value >= 1.0 - level:
            break
        worst = np.max(t_stats, axis=1)
        candidates = [active[i] for i in np.flatnonzero(worst == worst.max())]
        # exact ties go to the lexically first name
        loser = min(candidates, key=lambda column: names[column])
        pvalues[names[loser]] = running
        eliminated.append(names[loser])
        active.remove(loser)
        logger.debug("MCS eliminated %s with p-value %.4f", names[loser], running)
    final = 1.0 if len(active) == 1 else running
    for column in active:
        pvalues[names[column]] = final
    return McsResult(
        included=[names[column] for column in active],
        eliminated=eliminated,
        pvalues=pvalues,
        level=level,
    )

"""
Ensemble verification metrics.

All functions take ensembles as (M, n) arrays and truths as (n,) arrays.
"""

from __future__ import annotations

import numpy as np
from numpy.typing import ArrayLike, NDArray

COVERAGE_LEVELS = (0.025, 0.975)


def rmse(mean: ArrayLike, truth: ArrayLike) -> float:
    """||mean - truth||_2 / sqrt(n)."""
    diff = np.asarray(mean, dtype=float) - np.asarray(truth, dtype=float)
    return float(np.sqrt(np.mean(diff**2)))


def spread(states: ArrayLike) -> float:
    """sqrt(tr(Sigma) / n) with the unbiased (M - 1) sample variance."""
    matrix = np.atleast_2d(np.asarray(states, dtype=float))
    return float(np.sqrt(np.mean(np.var(matrix, axis=0, ddof=1))))


def coverage_hits(states: ArrayLike, truth: ArrayLike) -> int:
    """Components whose truth lies inside the ensemble's central 95% interval."""
    matrix = np.atleast_2d(np.asarray(states, dtype=float))
    lower, upper = np.quantile(matrix, COVERAGE_LEVELS, axis=0)
    z = np.asarray(truth, dtype=float)
    return int(np.sum((z >= lower) & (z <= upper)))


def crps(members: ArrayLike, truth: float) -> float:
    """
    CRPS of the empirical CDF of ``members`` against the truth.

    Energy form: mean|X_i - z| - 0.5 mean|X_i - X_j|, with the pair sum
    taken from the sorted sample.
    """
    x = np.sort(np.asarray(members, dtype=float).ravel())
    m = x.size
    weights = 2.0 * np.arange(m) - m + 1.0
    return float(np.mean(np.abs(x - truth)) - weights @ x / m**2)


def ensemble_crps(states: ArrayLike, truth: ArrayLike) -> float:
    """CRPS averaged over components."""
    matrix = np.sort(np.atleast_2d(np.asarray(states, dtype=float)), axis=0)
    z = np.asarray(truth, dtype=float)
    m = matrix.shape[0]
    weights = 2.0 * np.arange(m) - m + 1.0
    per_component = np.mean(np.abs(matrix - z), axis=0) - weights @ matrix / m**2
    return float(np.mean(per_component))


def mean_error(mean: ArrayLike, reference_mean: ArrayLike) -> float:
    """||mean - reference_mean||_2 / sqrt(n)."""
    return rmse(mean, reference_mean)


def covariance_error(covariance: ArrayLike, reference_covariance: ArrayLike) -> float:
    """||Sigma - Sigma_ref||_F / n."""
    a = np.atleast_2d(np.asarray(covariance, dtype=float))
    b = np.atleast_2d(np.asarray(reference_covariance, dtype=float))
    return float(np.linalg.norm(a - b, "fro") / a.shape[0])


def climatological_spread(trajectory: ArrayLike) -> float:
    """Spread of the truth states over time, the skill of a climatology forecast."""
    return spread(trajectory)


def ensemble_statistics(states: NDArray[np.float64], truth: NDArray[np.float64]) -> dict[str, float]:
    """rmse, spread, coverage hits and CRPS of one analysis ensemble."""
    return {
        "rmse": rmse(states.mean(axis=0), truth),
        "spread": spread(states),
        "coverage_hits": coverage_hits(states, truth),
        "crps": ensemble_crps(states, truth),
    }

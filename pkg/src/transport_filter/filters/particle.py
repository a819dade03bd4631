"""Sequential importance resampling (SIR) particle filter analysis."""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from scipy.special import logsumexp

from transport_filter.core.exceptions import DegeneracyError
from transport_filter.dynamics.observations import ScalarObservation
from transport_filter.filters.ensemble import Ensemble

logger = logging.getLogger(__name__)

LOW_ESS_FRACTION = 0.01


@dataclass(frozen=True)
class SirUpdate:
    """Resampled ensemble with the effective sample size before resampling."""

    ensemble: Ensemble
    ess: float
    indices: NDArray[np.intp]


def systematic_resample(weights: NDArray[np.float64], rng: np.random.Generator) -> NDArray[np.intp]:
    """One uniform offset, M evenly spaced pointers into the weight CDF."""
    rows = weights.shape[0]
    pointers = (rng.uniform() + np.arange(rows)) / rows
    cumulative = np.cumsum(weights)
    cumulative[-1] = 1.0
    return np.minimum(np.searchsorted(cumulative, pointers), rows - 1)


def sir_step(
    ensemble: Ensemble,
    observations: Sequence[ScalarObservation],
    rng: np.random.Generator,
) -> SirUpdate:
    """
    Reweight by the likelihood of every observation, then resample.

    Starting weights are uniform unless the ensemble carries weights. The
    returned ensemble has uniform weights again.
    """
    states = ensemble.states
    rows = states.shape[0]
    prior = ensemble.weights if ensemble.weights is not None else np.full(rows, 1.0 / rows)
    with np.errstate(divide="ignore"):
        log_weights = np.log(prior)
    for observation in observations:
        log_weights = log_weights + observation.log_likelihood(states[:, observation.index])

    total = logsumexp(log_weights)
    if not np.isfinite(total):
        raise DegeneracyError("all particle weights vanished")
    weights = np.exp(log_weights - total)
    ess = float(1.0 / np.sum(weights**2))
    if ess < LOW_ESS_FRACTION * rows:
        logger.warning("effective sample size %.1f of %d particles", ess, rows)

    indices = systematic_resample(weights, rng)
    resampled = Ensemble(states[indices], weights=np.full(rows, 1.0 / rows))
    return SirUpdate(resampled, ess, indices)

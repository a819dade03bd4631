"""
Stochastic map filter analysis for one scalar observation.

The joint forecast of (y, x) is Gaussianized by a triangular map S whose
first input is the simulated observation. The analysis map

    T(y, x) = S(y*, .)^{-1}( S(y, x) )

moves every particle (y^i, x^i) to a sample of the posterior without
evaluating the likelihood.
"""

from __future__ import annotations

import logging

import numpy as np
from numpy.typing import NDArray

from transport_filter.core.exceptions import MapArgumentError
from transport_filter.core.models import FilterConfig
from transport_filter.dynamics.observations import ScalarObservation
from transport_filter.estimation.fit import MapParameterization, fit_map
from transport_filter.estimation.sparsity import (
    Distance,
    SparsityPattern,
    distance_sparsity,
    permutation_by_distance,
)
from transport_filter.filters.ensemble import Ensemble, inflate

logger = logging.getLogger(__name__)


def parameterization_for(config: FilterConfig) -> MapParameterization:
    return MapParameterization(p=config.p, gamma=config.gamma, diagonal=config.diagonal)


def permuted_sparsity(
    config: FilterConfig, distance: Distance, permutation: tuple[int, ...]
) -> SparsityPattern:
    """Distance-band sparsity in permuted coordinates, with the identity cutoff."""
    n = len(permutation)

    def permuted(i: int, j: int) -> float:
        return distance(permutation[i], permutation[j])

    return distance_sparsity(permuted, n, config.radius, config.identity_cutoff)


def stochastic_map_analysis(
    ensemble: Ensemble,
    observation: ScalarObservation,
    config: FilterConfig,
    *,
    distance: Distance,
    rng: np.random.Generator | None = None,
    noise: NDArray[np.float64] | None = None,
    workers: int | None = None,
) -> Ensemble:
    """
    Assimilate one scalar observation.

    Components are reordered so the observed one comes first and the rest
    follow by distance. ``noise`` supplies the perturbation draws eps^i;
    otherwise they come from ``rng``. The map is fitted on the inflated
    copy (x~_l + eps, x~) and applied to the forecast pairs (x_l + eps, x).
    With ``config.local_likelihood`` only the first component reads y.
    """
    states = ensemble.states
    n = states.shape[1]
    permutation = permutation_by_distance(distance, n, observation.index)
    x = states[:, list(permutation)]
    if noise is None:
        if rng is None:
            raise MapArgumentError("stochastic_map_analysis needs a random stream or explicit noise")
        noise = observation.noise.sample(rng, x.shape[0])

    fitting = inflate(x, config.inflation)
    fit_samples = np.column_stack([fitting[:, 0] + noise, fitting])
    forecast = np.column_stack([x[:, 0] + noise, x])

    attached = [0] if config.local_likelihood else None
    sparsity = permuted_sparsity(config, distance, permutation).with_data(1, attached)
    transport_map, report = fit_map(
        fit_samples, parameterization_for(config), sparsity, workers=workers
    )
    logger.debug(
        "observation %d: joint map objective %.4f", observation.index, report.objective
    )

    reference = transport_map.evaluate(forecast)
    analysis = transport_map.invert(reference, data_values=[observation.value])

    out = np.empty_like(states)
    out[:, list(permutation)] = analysis
    return ensemble.with_states(out)

"""
Sequential assimilation of scalar observations.

Observations are conditionally independent given the state, so a batch
is assimilated one scalar at a time in ascending component order, each
analysis feeding the next.
"""

from __future__ import annotations

import logging
from collections.abc import Callable, Sequence
from functools import partial

import numpy as np

from transport_filter.core.exceptions import AnalysisError, ConfigError, TransportFilterError
from transport_filter.core.models import FilterConfig, FilterKind
from transport_filter.dynamics.observations import ScalarObservation
from transport_filter.estimation.sparsity import Distance
from transport_filter.filters.deterministic import (
    deterministic_local_analysis,
    deterministic_map_analysis,
)
from transport_filter.filters.ensemble import Ensemble
from transport_filter.filters.stochastic_map import stochastic_map_analysis

logger = logging.getLogger(__name__)

ScalarAnalysis = Callable[[Ensemble, ScalarObservation], Ensemble]
StreamFactory = Callable[[ScalarObservation], np.random.Generator]


def sequential_assimilate(
    ensemble: Ensemble,
    observations: Sequence[ScalarObservation],
    analysis: ScalarAnalysis,
) -> Ensemble:
    """
    Fold ``analysis`` over the observations in ascending index order.

    Failures are re-raised as AnalysisError naming the observation.
    """
    for observation in sorted(observations, key=lambda o: o.index):
        try:
            ensemble = analysis(ensemble, observation)
        except TransportFilterError as exc:
            raise AnalysisError(
                f"analysis of observation {observation.index} failed: {exc}",
                observation_index=observation.index,
            ) from exc
    return ensemble


def scalar_analysis(
    config: FilterConfig,
    distance: Distance,
    stream: StreamFactory,
    workers: int | None = None,
) -> ScalarAnalysis:
    """
    Bind a scalar analysis for ``config.kind``.

    ``stream`` hands out the random stream for each observation.
    EnKF and SIR update whole observation batches and have no scalar form.
    """
    kind = config.kind
    if kind == FilterKind.STOCHASTIC_MAP:

        def stochastic(ensemble: Ensemble, observation: ScalarObservation) -> Ensemble:
            return stochastic_map_analysis(
                ensemble, observation, config,
                distance=distance, rng=stream(observation), workers=workers,
            )

        return stochastic
    if kind == FilterKind.DETERMINISTIC_MAP:

        def deterministic(ensemble: Ensemble, observation: ScalarObservation) -> Ensemble:
            return deterministic_map_analysis(
                ensemble, observation, config,
                distance=distance, rng=stream(observation), workers=workers,
            )

        return deterministic
    if kind == FilterKind.DETERMINISTIC_LOCAL:
        return partial(deterministic_local_analysis, config=config, distance=distance, workers=workers)
    raise ConfigError(f"{kind.value} analyses update observation batches, not scalars")

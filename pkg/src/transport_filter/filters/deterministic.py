"""
Deterministic map filter analyses.

Both analyses first Gaussianize the forecast with a map S fitted to the
(inflated) ensemble, which gives a forecast density pi_S, the pullback
of the standard normal through S. The posterior is then proportional to
likelihood(y* | x) * pi_S(x).

``deterministic_map_analysis`` fits a map T pushing N(0, I) to that
posterior and moves every particle to T(S(x)).

``deterministic_local_analysis`` only updates the observed coordinate
exactly: a scalar monotone map m pushes N(0, 1) to the posterior
marginal of x_1, and the particles move by S_Id^{-1}(m(S^1(x)), S^2(x),
...), where S_Id is S with its first component replaced by the identity.
"""

from __future__ import annotations

import logging

import numpy as np
from numpy.typing import NDArray

from transport_filter.core.models import FilterConfig
from transport_filter.density.fit import fit_map_from_density, fit_scalar_rearrangement
from transport_filter.density.targets import UnnormalizedLogDensity, default_grid
from transport_filter.dynamics.observations import ScalarObservation
from transport_filter.estimation.fit import MapParameterization, fit_map
from transport_filter.estimation.sparsity import Distance, distance_sparsity, permutation_by_distance
from transport_filter.filters.ensemble import Ensemble, inflate
from transport_filter.filters.stochastic_map import parameterization_for, permuted_sparsity
from transport_filter.transport.maps import TriangularMap

logger = logging.getLogger(__name__)

MIN_REFERENCE_SAMPLES = 1000


def _fit_forecast_map(
    x: NDArray[np.float64],
    config: FilterConfig,
    distance: Distance,
    permutation: tuple[int, ...],
    workers: int | None,
) -> TriangularMap:
    fitting = inflate(x, config.inflation)
    sparsity = permuted_sparsity(config, distance, permutation)
    forecast_map, _ = fit_map(fitting, parameterization_for(config), sparsity, workers=workers)
    return forecast_map


def posterior_target(forecast_map: TriangularMap, observation: ScalarObservation) -> UnnormalizedLogDensity:
    """log likelihood(y* | x_1) + log pullback of N(0, I) through the forecast map."""

    def log_density(x: NDArray[np.float64]) -> NDArray[np.float64]:
        return observation.log_likelihood(x[:, 0]) + forecast_map.log_pullback_density(x)

    def gradient(x: NDArray[np.float64]) -> NDArray[np.float64]:
        grad = forecast_map.grad_log_pullback_density(x)
        grad[:, 0] += observation.grad_log_likelihood(x[:, 0])
        return grad

    return UnnormalizedLogDensity(forecast_map.dimension, log_density, gradient)


def deterministic_map_analysis(
    ensemble: Ensemble,
    observation: ScalarObservation,
    config: FilterConfig,
    *,
    distance: Distance,
    rng: np.random.Generator | None = None,
    workers: int | None = None,
) -> Ensemble:
    """
    Assimilate one scalar observation with a density-targeted map.

    The posterior map uses the same distance band as the forecast map and
    starts from the diagonal affine map matching the forecast mean and
    standard deviation. Reference sample count is
    ``config.reference_samples`` or max(10 M, 1000).

    With an identity cutoff j the forecast density factorizes after the
    first j permuted components, so only those are updated and the rest
    keep their forecast values.
    """
    states = ensemble.states
    rows, n = states.shape
    permutation = permutation_by_distance(distance, n, observation.index)
    x = states[:, list(permutation)]
    head = n if config.identity_cutoff is None else min(config.identity_cutoff, n)
    forecast_map = _fit_forecast_map(x, config, distance, permutation, workers)
    forecast_head = TriangularMap(forecast_map.components[:head])
    leading = x[:, :head]

    def permuted(i: int, j: int) -> float:
        return distance(permutation[i], permutation[j])

    samples = config.reference_samples or max(10 * rows, MIN_REFERENCE_SAMPLES)
    posterior_map, report = fit_map_from_density(
        posterior_target(forecast_head, observation),
        samples,
        parameterization_for(config),
        distance_sparsity(permuted, head, config.radius),
        rng if rng is not None else config.seed,
        initial_location=leading.mean(axis=0),
        initial_scale=leading.std(axis=0, ddof=1),
    )
    logger.debug(
        "observation %d: posterior map objective %.4f after %d iterations",
        observation.index, report.objective, report.iterations,
    )

    analysis = x.copy()
    analysis[:, :head] = posterior_map.evaluate(forecast_head.evaluate(leading))
    out = np.empty_like(states)
    out[:, list(permutation)] = analysis
    return ensemble.with_states(out)


def deterministic_local_analysis(
    ensemble: Ensemble,
    observation: ScalarObservation,
    config: FilterConfig,
    *,
    distance: Distance,
    workers: int | None = None,
) -> Ensemble:
    """
    Assimilate one scalar observation through a 1-D rearrangement.

    The posterior marginal of the observed coordinate is normalized on a
    ``config.grid_points`` grid spanning the forecast values +/- 6 sd.
    """
    states = ensemble.states
    n = states.shape[1]
    permutation = permutation_by_distance(distance, n, observation.index)
    x = states[:, list(permutation)]
    forecast_map = _fit_forecast_map(x, config, distance, permutation, workers)

    marginal_map = TriangularMap((forecast_map.components[0],))
    target = posterior_target(marginal_map, observation)
    grid = default_grid(x[:, 0], config.grid_points)
    rearrangement = fit_scalar_rearrangement(
        target, grid, MapParameterization(p=config.p, gamma=config.gamma)
    )

    reference = forecast_map.evaluate(x)
    updated = reference.copy()
    updated[:, 0] = rearrangement.evaluate(reference[:, 0])
    analysis = forecast_map.with_identity(0).invert(updated)

    out = np.empty_like(states)
    out[:, list(permutation)] = analysis
    return ensemble.with_states(out)

"""
Stochastic (perturbed-observation) ensemble Kalman filter.

    z^i = x^i - Sigma_XY Sigma_Y^{-1} (y^i - y*)

with maximum-likelihood moments of the simulated pairs (x^i, y^i). The
cross covariance can be tapered elementwise with Gaspari-Cohn weights.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from transport_filter.core.exceptions import MapArgumentError
from transport_filter.estimation.sparsity import Distance
from transport_filter.filters.ensemble import Ensemble, gaspari_cohn, inflate

logger = logging.getLogger(__name__)

INNOVATION_RIDGE = 1e-10
CONDITION_LIMIT = 1e12


def kalman_gain(
    states: NDArray[np.float64],
    simulated: NDArray[np.float64],
    observed_indices: Sequence[int] | None = None,
    *,
    radius: float | None = None,
    distance: Distance | None = None,
) -> NDArray[np.float64]:
    """Gain (n, d) from ML sample moments, optionally tapered by distance."""
    rows = states.shape[0]
    dx = states - states.mean(axis=0)
    dy = simulated - simulated.mean(axis=0)
    cov_xy = dx.T @ dy / rows
    cov_y = dy.T @ dy / rows

    if radius is not None:
        if distance is None or observed_indices is None:
            raise MapArgumentError("localization needs a distance and the observed indices")
        taper = np.array(
            [[distance(i, j) for j in observed_indices] for i in range(states.shape[1])]
        )
        cov_xy = cov_xy * gaspari_cohn(taper, radius)

    if np.linalg.cond(cov_y) > CONDITION_LIMIT:
        logger.warning("innovation covariance is singular, adding ridge %.0e", INNOVATION_RIDGE)
        cov_y = cov_y + INNOVATION_RIDGE * np.eye(cov_y.shape[0])
    return np.linalg.solve(cov_y, cov_xy.T).T


def enkf_analysis(
    ensemble: Ensemble,
    observed_values: ArrayLike,
    observed_indices: Sequence[int],
    *,
    inflation: float = 1.0,
    radius: float | None = None,
    distance: Distance | None = None,
) -> Ensemble:
    """
    Perturbed-observation EnKF update of a batch of observations.

    ``ensemble.simulated_obs`` must hold y^i = H x^i + eps^i. The gain is
    estimated from the inflated copy of the forecast carrying the same
    eps^i; the update moves the uninflated particles.
    """
    if ensemble.simulated_obs is None:
        raise MapArgumentError("EnKF analysis needs simulated observations")
    indices = list(observed_indices)
    states = ensemble.states
    simulated = ensemble.simulated_obs
    y_star = np.asarray(observed_values, dtype=float).reshape(1, -1)
    if simulated.shape[1] != len(indices) or y_star.shape[1] != len(indices):
        raise MapArgumentError("observation count does not match the simulated observations")

    noise = simulated - states[:, indices]
    fitting = inflate(states, inflation)
    gain = kalman_gain(
        fitting, fitting[:, indices] + noise, indices, radius=radius, distance=distance
    )
    return ensemble.with_states(states - (simulated - y_star) @ gain.T)

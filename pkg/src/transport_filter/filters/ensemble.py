"""Ensembles, multiplicative inflation and Gaspari-Cohn tapering."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import overload

import numpy as np
from numpy.typing import ArrayLike, NDArray

from transport_filter.core.exceptions import MapArgumentError


@dataclass(frozen=True)
class Ensemble:
    """
    M particles of an n-dimensional state.

    ``simulated_obs`` holds perturbed observations y^i (M, d) for the
    stochastic analyses; ``weights`` is only set by particle filters.
    """

    states: NDArray[np.float64]
    simulated_obs: NDArray[np.float64] | None = None
    weights: NDArray[np.float64] | None = None

    def __post_init__(self) -> None:
        states = np.atleast_2d(np.asarray(self.states, dtype=float))
        object.__setattr__(self, "states", states)
        if states.shape[0] < 2:
            raise MapArgumentError(f"an ensemble needs at least 2 members, got {states.shape[0]}")
        if self.simulated_obs is not None:
            simulated = np.asarray(self.simulated_obs, dtype=float).reshape(states.shape[0], -1)
            object.__setattr__(self, "simulated_obs", simulated)
        if self.weights is not None:
            weights = np.asarray(self.weights, dtype=float).ravel()
            if weights.shape[0] != states.shape[0]:
                raise MapArgumentError("one weight per particle is required")
            if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-8:
                raise MapArgumentError("weights must be nonnegative and sum to one")
            object.__setattr__(self, "weights", weights)

    @property
    def size(self) -> int:
        return self.states.shape[0]

    @property
    def dimension(self) -> int:
        return self.states.shape[1]

    def mean(self) -> NDArray[np.float64]:
        if self.weights is None:
            return self.states.mean(axis=0)
        return self.weights @ self.states

    def covariance(self, ddof: int = 1) -> NDArray[np.float64]:
        if self.weights is None:
            return np.atleast_2d(np.cov(self.states, rowvar=False, ddof=ddof))
        deviations = self.states - self.mean()
        return (deviations * self.weights[:, None]).T @ deviations

    def with_states(self, states: NDArray[np.float64]) -> Ensemble:
        """Same metadata, new particle positions; simulated observations are dropped."""
        return replace(self, states=states, simulated_obs=None)


@overload
def inflate(ensemble: Ensemble, zeta: float) -> Ensemble: ...
@overload
def inflate(ensemble: NDArray[np.float64], zeta: float) -> NDArray[np.float64]: ...


def inflate(ensemble: Ensemble | NDArray[np.float64], zeta: float) -> Ensemble | NDArray[np.float64]:
    """z^i <- mean + zeta (z^i - mean)."""
    if zeta < 1.0:
        raise MapArgumentError(f"inflation must be at least 1, got {zeta}")
    if isinstance(ensemble, Ensemble):
        return replace(ensemble, states=inflate(ensemble.states, zeta))
    states = np.asarray(ensemble, dtype=float)
    if zeta == 1.0:
        return states.copy()
    mean = states.mean(axis=0)
    return mean + zeta * (states - mean)


def gaspari_cohn(distance: ArrayLike, c: float) -> NDArray[np.float64]:
    """
    Fifth-order piecewise rational taper with half-width ``c``.

    Equals 1 at distance 0, 5/24 at distance c and vanishes beyond 2c.
    """
    if not c > 0:
        raise MapArgumentError(f"taper half-width must be positive, got {c}")
    z = np.abs(np.asarray(distance, dtype=float)) / c
    out = np.zeros_like(z)
    inner = z <= 1.0
    outer = (z > 1.0) & (z < 2.0)
    zi = z[inner]
    out[inner] = -0.25 * zi**5 + 0.5 * zi**4 + 0.625 * zi**3 - 5.0 / 3.0 * zi**2 + 1.0
    zo = z[outer]
    out[outer] = (
        zo**5 / 12.0 - 0.5 * zo**4 + 0.625 * zo**3 + 5.0 / 3.0 * zo**2 - 5.0 * zo + 4.0 - 2.0 / (3.0 * zo)
    )
    return out

"""Lorenz test dynamics and observation models."""

from transport_filter.dynamics.lorenz import propagate, rhs, rk4_step, trajectory
from transport_filter.dynamics.observations import (
    GaussianNoise,
    LaplaceNoise,
    ObservationNoise,
    ScalarObservation,
    log_likelihood,
    make_noise,
    observe,
    scalar_observations,
)

__all__ = [
    "GaussianNoise",
    "LaplaceNoise",
    "ObservationNoise",
    "ScalarObservation",
    "log_likelihood",
    "make_noise",
    "observe",
    "propagate",
    "rhs",
    "rk4_step",
    "scalar_observations",
    "trajectory",
]

"""
Observation operators and noise models.

Observations select components of the state and add independent
Gaussian (variance theta^2) or Laplace (scale theta, variance 2 theta^2)
noise. Filters that never evaluate the likelihood only call ``sample``.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from transport_filter.core.exceptions import LikelihoodUnavailableError, MapArgumentError
from transport_filter.core.models import NoiseKind, ObservationSpec

LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


class ObservationNoise(ABC):
    """Additive scalar noise with a sampler and an exact density."""

    theta: float

    @property
    @abstractmethod
    def std(self) -> float:
        """Standard deviation of one draw."""

    @abstractmethod
    def sample(self, rng: np.random.Generator, shape: int | tuple[int, ...]) -> NDArray[np.float64]:
        """Independent draws of the given shape."""

    @abstractmethod
    def log_pdf(self, eps: ArrayLike) -> NDArray[np.float64]:
        """Log-density of a noise value."""

    @abstractmethod
    def grad_log_pdf(self, eps: ArrayLike) -> NDArray[np.float64]:
        """Derivative of log_pdf."""

    def _require_scale(self) -> None:
        if not self.theta > 0:
            raise LikelihoodUnavailableError("zero-scale noise has no density")


@dataclass(frozen=True)
class GaussianNoise(ObservationNoise):
    theta: float = 1.0

    @property
    def std(self) -> float:
        return self.theta

    def sample(self, rng: np.random.Generator, shape: int | tuple[int, ...]) -> NDArray[np.float64]:
        return self.theta * rng.standard_normal(shape)

    def log_pdf(self, eps: ArrayLike) -> NDArray[np.float64]:
        self._require_scale()
        e = np.asarray(eps, dtype=float) / self.theta
        return -0.5 * e * e - LOG_SQRT_2PI - math.log(self.theta)

    def grad_log_pdf(self, eps: ArrayLike) -> NDArray[np.float64]:
        self._require_scale()
        return -np.asarray(eps, dtype=float) / self.theta**2


@dataclass(frozen=True)
class LaplaceNoise(ObservationNoise):
    """Laplace noise sampled by inverting its CDF."""

    theta: float = 1.0

    @property
    def std(self) -> float:
        return math.sqrt(2.0) * self.theta

    def sample(self, rng: np.random.Generator, shape: int | tuple[int, ...]) -> NDArray[np.float64]:
        u = rng.uniform(-0.5, 0.5, shape)
        return -self.theta * np.sign(u) * np.log1p(-2.0 * np.abs(u))

    def log_pdf(self, eps: ArrayLike) -> NDArray[np.float64]:
        self._require_scale()
        return -np.abs(np.asarray(eps, dtype=float)) / self.theta - math.log(2.0 * self.theta)

    def grad_log_pdf(self, eps: ArrayLike) -> NDArray[np.float64]:
        self._require_scale()
        return -np.sign(np.asarray(eps, dtype=float)) / self.theta


def make_noise(spec: ObservationSpec) -> ObservationNoise:
    if spec.noise == NoiseKind.LAPLACE:
        return LaplaceNoise(spec.theta)
    return GaussianNoise(spec.theta)


def observe(
    spec: ObservationSpec,
    z: ArrayLike,
    rng: np.random.Generator,
    noise: ObservationNoise | None = None,
) -> NDArray[np.float64]:
    """y = Hz + noise for one state (n,) or a batch (M, n)."""
    state = np.asarray(z, dtype=float)
    indices = list(spec.observed_indices(state.shape[-1]))
    clean = state[..., indices]
    noise = make_noise(spec) if noise is None else noise
    if not noise.theta > 0:
        return clean.copy()
    return clean + noise.sample(rng, clean.shape)


def log_likelihood(
    spec: ObservationSpec,
    y: ArrayLike,
    z: ArrayLike,
    noise: ObservationNoise | None = None,
) -> NDArray[np.float64]:
    """log p(y | z) summed over observed components, per row of ``z``."""
    state = np.asarray(z, dtype=float)
    indices = list(spec.observed_indices(state.shape[-1]))
    noise = make_noise(spec) if noise is None else noise
    residual = np.asarray(y, dtype=float) - state[..., indices]
    return np.sum(noise.log_pdf(residual), axis=-1)


@dataclass(frozen=True)
class ScalarObservation:
    """
    One observed value y* of state component ``index``.

    ``likelihood_available`` is cleared for filters that must not evaluate
    the observation density.
    """

    value: float
    index: int
    noise: ObservationNoise
    likelihood_available: bool = True

    def __post_init__(self) -> None:
        if self.index < 0:
            raise MapArgumentError(f"observed index must be nonnegative, got {self.index}")

    def simulate(
        self,
        states: NDArray[np.float64],
        rng: np.random.Generator | None = None,
        noise: NDArray[np.float64] | None = None,
    ) -> NDArray[np.float64]:
        """Perturbed observations y^i = x^i_index + eps^i; pass ``noise`` to reuse draws."""
        if noise is None:
            if rng is None:
                raise MapArgumentError("simulate needs a random stream or explicit noise draws")
            noise = self.noise.sample(rng, states.shape[0])
        return states[:, self.index] + noise

    def _check(self) -> None:
        if not self.likelihood_available:
            raise LikelihoodUnavailableError(f"likelihood of observation {self.index} is not available")

    def log_likelihood(self, observed_component: ArrayLike) -> NDArray[np.float64]:
        """log p(y* | x_index) as a function of the observed component values."""
        self._check()
        return self.noise.log_pdf(self.value - np.asarray(observed_component, dtype=float))

    def grad_log_likelihood(self, observed_component: ArrayLike) -> NDArray[np.float64]:
        """d/dx log p(y* | x) at the observed component values."""
        self._check()
        return -self.noise.grad_log_pdf(self.value - np.asarray(observed_component, dtype=float))

    def relabeled(self, index: int) -> ScalarObservation:
        return ScalarObservation(self.value, index, self.noise, self.likelihood_available)


def scalar_observations(
    spec: ObservationSpec,
    y: ArrayLike,
    n: int,
    likelihood_available: bool = True,
) -> list[ScalarObservation]:
    """Split an observation vector into scalar observations in ascending index order."""
    values = np.asarray(y, dtype=float).ravel()
    indices = spec.observed_indices(n)
    if values.size != len(indices):
        raise MapArgumentError(f"{values.size} values for {len(indices)} observed components")
    noise = make_noise(spec)
    return [
        ScalarObservation(float(v), i, noise, likelihood_available)
        for i, v in sorted(zip(indices, values, strict=True))
    ]

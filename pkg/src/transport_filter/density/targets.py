"""Unnormalized log-densities and CDF grids built from them."""

from __future__ import annotations

import logging
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.integrate import cumulative_trapezoid, trapezoid

from transport_filter.core.exceptions import DensityTargetError, MapArgumentError

logger = logging.getLogger(__name__)

TAIL_MASS_LIMIT = 1e-6

LogDensityFn = Callable[[NDArray[np.float64]], NDArray[np.float64]]


@dataclass(frozen=True)
class UnnormalizedLogDensity:
    """
    log pi up to an additive constant, evaluated row-wise on (N, n) arrays.

    ``gradient`` is optional; without it gradients come from central
    differences.
    """

    dimension: int
    evaluator: LogDensityFn
    gradient_fn: LogDensityFn | None = None

    def __call__(self, points: ArrayLike) -> NDArray[np.float64]:
        matrix = np.atleast_2d(np.asarray(points, dtype=float))
        if matrix.shape[1] != self.dimension:
            raise MapArgumentError(f"target expects {self.dimension} columns, got {matrix.shape[1]}")
        return np.asarray(self.evaluator(matrix), dtype=float).reshape(matrix.shape[0])

    def gradient(self, points: ArrayLike) -> NDArray[np.float64]:
        matrix = np.atleast_2d(np.asarray(points, dtype=float))
        if self.gradient_fn is not None:
            return np.asarray(self.gradient_fn(matrix), dtype=float).reshape(matrix.shape)
        grad = np.empty_like(matrix)
        for j in range(self.dimension):
            step = 1e-6 * np.maximum(1.0, np.abs(matrix[:, j]))
            forward, backward = matrix.copy(), matrix.copy()
            forward[:, j] += step
            backward[:, j] -= step
            grad[:, j] = (self(forward) - self(backward)) / (2.0 * step)
        return grad


@dataclass(frozen=True)
class CdfGrid:
    """CDF and survival values of a 1-D density on an increasing grid."""

    points: NDArray[np.float64]
    cdf: NDArray[np.float64]
    survival: NDArray[np.float64]
    normalizer: float

    def __len__(self) -> int:
        return len(self.points)

    @classmethod
    def from_log_density(cls, target: UnnormalizedLogDensity, grid: ArrayLike) -> CdfGrid:
        """
        Normalize exp(target) on ``grid`` by the trapezoid rule.

        Survival values are accumulated from the right so upper-tail
        quantiles keep their relative precision.
        """
        points = np.asarray(grid, dtype=float).ravel()
        if points.size < 3 or np.any(np.diff(points) <= 0):
            raise MapArgumentError("CDF grid must be strictly increasing with at least 3 points")
        log_values = target(points[:, None])
        if np.any(np.isnan(log_values)) or np.any(log_values == np.inf):
            raise DensityTargetError("target log-density is NaN or +inf on the grid")
        peak = np.max(log_values)
        if not np.isfinite(peak):
            raise DensityTargetError("target density vanishes on the whole grid")
        density = np.exp(log_values - peak)
        normalizer = float(trapezoid(density, points))
        if not (normalizer > 0 and np.isfinite(normalizer)):
            raise DensityTargetError(f"trapezoid normalizer is {normalizer}")

        cdf = cumulative_trapezoid(density, points, initial=0.0) / normalizer
        survival = -cumulative_trapezoid(density[::-1], points[::-1], initial=0.0)[::-1] / normalizer
        cdf = np.maximum.accumulate(np.clip(cdf, 0.0, 1.0))
        survival = np.clip(survival, 0.0, 1.0)

        spacing = float(np.mean(np.diff(points)))
        tail = (density[0] + density[-1]) * spacing / normalizer
        if tail > TAIL_MASS_LIMIT:
            logger.warning("grid may truncate the target: edge mass estimate %.2e", tail)
        return cls(points, cdf, survival, normalizer * float(np.exp(peak)))


def default_grid(values: ArrayLike, points: int = 2001, width: float = 6.0) -> NDArray[np.float64]:
    """Uniform grid over [min - width*sd, max + width*sd] of ``values``."""
    x = np.asarray(values, dtype=float).ravel()
    spread = float(np.std(x, ddof=1)) if x.size > 1 else 1.0
    if not spread > 0:
        spread = 1.0
    return np.linspace(x.min() - width * spread, x.max() + width * spread, points)

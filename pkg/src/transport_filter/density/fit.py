"""
Maps estimated against a target density instead of samples.

``fit_map_from_density`` finds a triangular map T pushing the standard
normal to an unnormalized target pi by minimizing the Monte Carlo
estimate of KL(T#eta || pi):

    -(1/N) sum_i [ log pi(T(z^i)) + sum_k log dT^k/dz_k (z^i) ]

over reference draws z^i. ``fit_scalar_rearrangement`` builds the 1-D
increasing rearrangement F_pi^{-1} o Phi by regressing grid points on
the normal quantiles of their CDF values.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.optimize import OptimizeResult, lsq_linear, minimize
from scipy.special import ndtri

from transport_filter.core.exceptions import (
    DensityTargetError,
    InsufficientSamplesError,
    MapArgumentError,
    NonconvergenceError,
)
from transport_filter.density.targets import CdfGrid, UnnormalizedLogDensity
from transport_filter.estimation.fit import ComponentDesign, MapParameterization
from transport_filter.estimation.sparsity import SparsityPattern
from transport_filter.transport.basis import (
    CONSTANT,
    UnivariateFunction,
    monotone_bases,
    select_centers_scales,
)
from transport_filter.transport.maps import MapComponent, TriangularMap

logger = logging.getLogger(__name__)

GRADIENT_TOLERANCE = 1e-6
MAX_ITERATIONS = 500
NEAR_OPTIMAL_FACTOR = 1e3
NONFINITE_PENALTY = 1e12
TAIL_PROBABILITY = 1e-10
MIN_MONOTONE_COEFFICIENT = 1e-10


@dataclass
class DensityFitReport:
    """Outcome of a density-targeted fit."""

    objective: float
    iterations: int
    converged: bool
    n_samples: int
    history: list[float] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return {
            "objective": self.objective,
            "iterations": self.iterations,
            "converged": self.converged,
            "n_samples": self.n_samples,
        }


@dataclass
class _Block:
    index: int
    design: ComponentDesign
    features: NDArray[np.float64]     # non-monotone features plus a constant column
    monotone: NDArray[np.float64]
    derivatives: NDArray[np.float64]
    start: int                        # offset of this block in the parameter vector

    @property
    def linear_size(self) -> int:
        return self.features.shape[1]

    @property
    def size(self) -> int:
        return self.features.shape[1] + self.monotone.shape[1]


class _DensityObjective:
    """KL objective and gradient over log-parameterized monotone coefficients."""

    def __init__(
        self,
        target: UnnormalizedLogDensity,
        reference: NDArray[np.float64],
        blocks: list[_Block],
        sparsity: SparsityPattern,
    ) -> None:
        self.target = target
        self.reference = reference
        self.blocks = blocks
        self.sparsity = sparsity
        self.size = sum(b.size for b in blocks)

    def unpack(self, theta: NDArray[np.float64], block: _Block) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
        chunk = theta[block.start : block.start + block.size]
        return chunk[: block.linear_size], np.exp(chunk[block.linear_size :])

    def push(self, theta: NDArray[np.float64]) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
        rows = self.reference.shape[0]
        mapped = self.reference.copy()
        slopes = np.ones((rows, self.sparsity.n))
        for block in self.blocks:
            beta, w = self.unpack(theta, block)
            mapped[:, block.index] = block.features @ beta + block.monotone @ w
            slopes[:, block.index] = block.derivatives @ w
        return mapped, slopes

    def value(self, theta: NDArray[np.float64]) -> float:
        mapped, slopes = self.push(theta)
        if not np.all(slopes > 0):
            return np.inf
        log_target = self.target(mapped)
        if not np.all(np.isfinite(log_target)):
            return np.inf
        return float(-np.mean(log_target + np.sum(np.log(slopes), axis=1)))

    def gradient(self, theta: NDArray[np.float64]) -> NDArray[np.float64]:
        rows = self.reference.shape[0]
        mapped, slopes = self.push(theta)
        grad_target = self.target.gradient(mapped)
        out = np.zeros(self.size)
        for block in self.blocks:
            _, w = self.unpack(theta, block)
            g = grad_target[:, block.index]
            linear = -block.features.T @ g / rows
            monotone = -(block.monotone.T @ g + block.derivatives.T @ (1.0 / slopes[:, block.index])) / rows
            out[block.start : block.start + block.linear_size] = linear
            out[block.start + block.linear_size : block.start + block.size] = monotone * w
        return out


class _PenalizedObjective:
    """Finite stand-in for the KL objective during line searches."""

    def __init__(self, objective: _DensityObjective) -> None:
        self.objective = objective
        self.hits = 0

    def value(self, theta: NDArray[np.float64]) -> float:
        value = self.objective.value(theta)
        if np.isfinite(value):
            return value
        self.hits += 1
        return NONFINITE_PENALTY

    def gradient(self, theta: NDArray[np.float64]) -> NDArray[np.float64]:
        grad = self.objective.gradient(theta)
        return grad if np.all(np.isfinite(grad)) else np.zeros_like(theta)


def _minimize(
    objective: _DensityObjective,
    theta: NDArray[np.float64],
    tolerance: float,
    max_iterations: int,
) -> tuple[NDArray[np.float64], float, bool, list[float]]:
    """
    Run scipy's BFGS on the KL objective.

    Trial points where the target is not finite get a large finite
    penalty, so the line search backs away from them. Returns the final
    coefficients, objective, convergence flag and the objective after
    each accepted step.
    """
    value = objective.value(theta)
    if not np.isfinite(value):
        raise DensityTargetError("target is not finite at the mapped starting points")
    history = [value]
    if theta.size == 0:
        return theta, value, True, history

    penalized = _PenalizedObjective(objective)

    def record(intermediate_result: OptimizeResult) -> None:
        history.append(float(intermediate_result.fun))

    result = minimize(
        penalized.value,
        theta,
        jac=penalized.gradient,
        method="BFGS",
        callback=record,
        options={"gtol": tolerance, "maxiter": max_iterations},
    )
    final = objective.value(result.x)
    if not np.isfinite(final):
        raise DensityTargetError(
            f"optimizer stopped where the target is not finite ({penalized.hits} penalized evaluations)"
        )
    if result.success:
        return result.x, final, True, history
    if result.status == 1:
        raise NonconvergenceError(
            f"density fit hit {max_iterations} iterations",
            best_objective=final,
        )
    if np.abs(result.jac).max() <= NEAR_OPTIMAL_FACTOR * tolerance:
        logger.debug("density fit: line search stalled near optimum (%s)", result.message)
        return result.x, final, True, history
    if penalized.hits:
        raise DensityTargetError(
            f"line search kept reaching points where the target is not finite "
            f"({penalized.hits} penalized evaluations, objective {final:.6g})"
        )
    logger.warning("density fit stopped early: %s (objective %.6g)", result.message, final)
    return result.x, final, False, history


def fit_map_from_density(
    target: UnnormalizedLogDensity,
    n_samples: int,
    parameterization: MapParameterization,
    sparsity: SparsityPattern,
    seed: int | np.random.Generator = 0,
    *,
    initial_location: ArrayLike | None = None,
    initial_scale: ArrayLike | None = None,
    tolerance: float = GRADIENT_TOLERANCE,
    max_iterations: int = MAX_ITERATIONS,
) -> tuple[TriangularMap, DensityFitReport]:
    """
    Fit a triangular map pushing N(0, I) to ``target``.

    Optimization starts from the diagonal affine map
    z -> initial_location + initial_scale * z (the identity by default).
    Returns the fitted map and the best iterate's report.
    """
    n = target.dimension
    if sparsity.n != n or sparsity.data_dimension:
        raise MapArgumentError("sparsity must describe the target dimension without a data slot")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    reference = rng.standard_normal((n_samples, n))
    location = np.zeros(n) if initial_location is None else np.asarray(initial_location, float)
    scale = np.ones(n) if initial_scale is None else np.asarray(initial_scale, float)

    blocks: list[_Block] = []
    theta0: list[NDArray[np.float64]] = []
    cursor = 0
    for k in range(n):
        if sparsity.is_identity(k):
            continue
        inputs = sparsity[k]
        design = ComponentDesign.from_samples(
            reference[:, list(inputs)],
            inputs,
            parameterization.p,
            parameterization.gamma,
            parameterization.monotone_p(k),
            standardize=False,
        )
        standard = reference[:, list(inputs)]
        features = np.column_stack([design.nonmonotone_matrix(standard), np.ones(n_samples)])
        block = _Block(
            index=k,
            design=design,
            features=features,
            monotone=design.monotone_matrix(standard),
            derivatives=design.monotone_derivative_matrix(standard),
            start=cursor,
        )
        blocks.append(block)
        cursor += block.size

        beta = np.zeros(block.linear_size)
        beta[-1] = location[k]
        w = np.full(block.monotone.shape[1], 1e-4 * scale[k])
        w[0] = w[-1] = scale[k]
        theta0.append(np.concatenate([beta, np.log(w)]))

    objective = _DensityObjective(target, reference, blocks, sparsity)
    if n_samples < objective.size:
        raise InsufficientSamplesError(f"{n_samples} reference samples for {objective.size} coefficients")
    theta, value, converged, history = _minimize(
        objective, np.concatenate(theta0) if theta0 else np.zeros(0), tolerance, max_iterations
    )
    iterations = len(history) - 1

    components: list[MapComponent] = []
    fitted = {b.index: b for b in blocks}
    for k in range(n):
        if k not in fitted:
            components.append(MapComponent.identity(k))
            continue
        block = fitted[k]
        beta, w = objective.unpack(theta, block)
        components.append(block.design.build(k, beta[:-1], beta[-1], w))
    report = DensityFitReport(value, iterations, converged, n_samples, history)
    logger.debug("density fit: objective %.6f after %d iterations", value, iterations)
    return TriangularMap(tuple(components)), report


def fit_scalar_rearrangement(
    target: UnnormalizedLogDensity,
    grid: ArrayLike,
    parameterization: MapParameterization,
) -> UnivariateFunction:
    """
    Monotone 1-D map pushing N(0, 1) to a scalar target.

    Grid points x_i are paired with xi_i = Phi^{-1}(F(x_i)); points whose
    CDF is exactly 0 or 1 are dropped, and so are points in the outer
    1e-10 tails. The pairs are fitted by bounded least squares over the
    monotone family with ``parameterization.p`` interior sigmoids.
    """
    if target.dimension != 1:
        raise MapArgumentError("scalar rearrangement needs a one-dimensional target")
    cdf = CdfGrid.from_log_density(target, grid)

    saturated = (cdf.cdf <= 0.0) | (cdf.survival <= 0.0)
    interior = saturated[1:-1].sum()
    if interior:
        logger.warning("dropping %d grid points with CDF exactly 0 or 1", int(saturated.sum()))
    keep = ~saturated & (np.minimum(cdf.cdf, cdf.survival) >= TAIL_PROBABILITY)
    with np.errstate(divide="ignore"):
        quantiles = np.where(cdf.cdf <= 0.5, ndtri(cdf.cdf), -ndtri(cdf.survival))
    keep &= np.isfinite(quantiles)
    xi, x = quantiles[keep], cdf.points[keep]
    if xi.size < parameterization.p + 3:
        raise InsufficientSamplesError(f"only {xi.size} usable grid points")

    bases = monotone_bases(
        *select_centers_scales(xi, parameterization.p, parameterization.gamma, monotone=True)
    )
    design = np.column_stack([np.ones_like(xi)] + [basis.evaluate(xi) for basis in bases])
    lower = np.array([-np.inf] + [MIN_MONOTONE_COEFFICIENT] * len(bases))
    solution = lsq_linear(design, x, bounds=(lower, np.full(design.shape[1], np.inf)))
    coefficients = solution.x
    terms = ((float(coefficients[0]), CONSTANT),) + tuple(
        (float(c), b) for c, b in zip(coefficients[1:], bases, strict=True)
    )
    return UnivariateFunction(terms, monotone=True)

"""
Maximum-likelihood estimation of triangular maps from samples.

Each component minimizes

    J_k = (1/M) sum_i [ 0.5 * U^k(z^i)^2 - log dU^k/dz_k (z^i) ]

independently. The non-monotone coefficients enter quadratically and
are eliminated by least squares; what remains is convex in the monotone
coefficients. An affine monotone term has a closed-form solution (a
linear regression of z_k on the other features). The sigmoid family is
solved by projected Newton on the nonnegative orthant.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray

from transport_filter.core.exceptions import (
    FitError,
    InsufficientSamplesError,
    MapArgumentError,
    NonconvergenceError,
)
from transport_filter.core.models import DiagonalMode
from transport_filter.core.settings import get_settings
from transport_filter.estimation.sparsity import SparsityPattern
from transport_filter.transport.basis import (
    BasisFunction,
    UnivariateFunction,
    monotone_bases,
    nonmonotone_bases,
    select_centers_scales,
)
from transport_filter.transport.maps import MapComponent, TriangularMap

logger = logging.getLogger(__name__)

RIDGE = 1e-8
KAPPA_FLOOR = 1e-12
NEWTON_TOLERANCE = 1e-8
NEWTON_MAX_ITERATIONS = 200
ARMIJO_SLOPE = 1e-4
STAGNATION_TOLERANCE = 1e-6
MIN_EDGE_COEFFICIENT = 1e-8


class FitMethod(str, Enum):
    """How to solve a component problem."""
    AUTO = "auto"              # closed form when the monotone term is affine
    CLOSED_FORM = "closed_form"
    NEWTON = "newton"


@dataclass(frozen=True)
class MapParameterization:
    """
    Separable map class.

    ``p`` Gaussian RBFs (plus a linear term) per non-monotone input;
    ``diagonal`` picks the components whose last-variable term uses the
    sigmoid family with p interior sigmoids. All other last-variable
    terms are affine. ``p=0`` gives the linear class.
    """

    p: int = 0
    gamma: float = 2.0
    diagonal: DiagonalMode = DiagonalMode.FIRST

    def __post_init__(self) -> None:
        if self.p < 0:
            raise MapArgumentError(f"p must be nonnegative, got {self.p}")
        if not self.gamma > 0:
            raise MapArgumentError(f"gamma must be positive, got {self.gamma}")

    def monotone_p(self, k: int) -> int:
        """Interior sigmoid count for component k (0 means affine)."""
        if self.diagonal == DiagonalMode.ALL or (self.diagonal == DiagonalMode.FIRST and k == 0):
            return self.p
        return 0


@dataclass
class ComponentFitReport:
    """Outcome of one component fit."""

    index: int
    objective: float
    iterations: int = 0
    converged: bool = True
    used_closed_form: bool = False
    regularized: bool = False
    degenerate: bool = False


@dataclass
class FitReport:
    """Per-component fit outcomes, ordered by component index."""

    components: list[ComponentFitReport] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.components)

    @property
    def objective(self) -> float:
        """Sum of component objectives (the full negative log-likelihood)."""
        return float(sum(c.objective for c in self.components))

    @property
    def converged(self) -> bool:
        return all(c.converged for c in self.components)

    @property
    def used_closed_form(self) -> bool:
        return all(c.used_closed_form for c in self.components)

    @property
    def iterations(self) -> list[int]:
        return [c.iterations for c in self.components]

    def to_dict(self) -> dict[str, Any]:
        return {
            "objective": self.objective,
            "converged": self.converged,
            "components": [asdict(c) for c in self.components],
        }


@dataclass(frozen=True)
class RegressionSolution:
    """Closed-form fit of an affine-monotone component in standardized coordinates."""

    coefficients: NDArray[np.float64]
    constant: float
    alpha: float
    kappa: float
    regularized: bool = False
    degenerate: bool = False

    @property
    def objective(self) -> float:
        return 0.5 + 0.5 * float(np.log(self.kappa))


def fit_regression_path(last: ArrayLike, design: ArrayLike | None = None) -> RegressionSolution:
    """
    Solve the affine-monotone component problem by linear regression.

    Minimizes mean((design @ u + c + last)^2) over (u, c); with kappa the
    minimum, the component is alpha * (last + design @ u + c) where
    alpha = 1 / sqrt(kappa). ``kappa`` is floored at 1e-12.
    """
    z = np.asarray(last, dtype=float).ravel()
    rows = z.shape[0]
    features = np.zeros((rows, 0)) if design is None else np.asarray(design, dtype=float).reshape(rows, -1)
    system = np.column_stack([features, np.ones(rows)])

    beta, _, rank, _ = np.linalg.lstsq(system, -z, rcond=None)
    regularized = rank < system.shape[1]
    if regularized:
        logger.warning(
            "rank-deficient regression (rank %d of %d), using ridge %.0e",
            rank, system.shape[1], RIDGE,
        )
        gram = system.T @ system + RIDGE * np.eye(system.shape[1])
        beta = np.linalg.solve(gram, -system.T @ z)

    residual = system @ beta + z
    kappa = float(np.mean(residual**2))
    degenerate = kappa <= KAPPA_FLOOR
    if degenerate:
        logger.warning("regression residual %.3e at floor, last variable is nearly determined", kappa)
        kappa = KAPPA_FLOOR
    alpha = 1.0 / np.sqrt(kappa)
    return RegressionSolution(
        coefficients=alpha * beta[:-1],
        constant=float(alpha * beta[-1]),
        alpha=float(alpha),
        kappa=kappa,
        regularized=bool(regularized),
        degenerate=degenerate,
    )


# =============================================================================
# Component design
# =============================================================================


@dataclass(frozen=True)
class ComponentDesign:
    """
    Feature layout of one component in standardized coordinates.

    Inputs are shifted and scaled by ``locations`` / ``scales``; the bases
    are defined on the standardized variables and ``build`` folds the
    standardization back into a component on raw inputs.
    """

    active_inputs: tuple[int, ...]
    locations: NDArray[np.float64]
    scales: NDArray[np.float64]
    nonmonotone: tuple[tuple[BasisFunction, ...], ...]
    monotone: tuple[BasisFunction, ...]

    @classmethod
    def from_samples(
        cls,
        samples: NDArray[np.float64],
        active_inputs: tuple[int, ...],
        p: int,
        gamma: float,
        monotone_p: int,
        standardize: bool = True,
    ) -> ComponentDesign:
        width = len(active_inputs)
        if standardize:
            locations = samples.mean(axis=0)
            scales = samples.std(axis=0)
            scales = np.where(scales > 0, scales, 1.0)
        else:
            locations, scales = np.zeros(width), np.ones(width)
        standard = (samples - locations) / scales
        nonmonotone = tuple(
            tuple(nonmonotone_bases(*select_centers_scales(standard[:, col], p, gamma)))
            for col in range(width - 1)
        )
        monotone = tuple(
            monotone_bases(*select_centers_scales(standard[:, -1], monotone_p, gamma, monotone=True))
        )
        return cls(tuple(active_inputs), locations, scales, nonmonotone, monotone)

    @property
    def nonmonotone_count(self) -> int:
        return sum(len(b) for b in self.nonmonotone)

    @property
    def free_coefficients(self) -> int:
        return self.nonmonotone_count + 1 + len(self.monotone)

    @property
    def affine_monotone(self) -> bool:
        return len(self.monotone) == 1

    def standardize(self, samples: NDArray[np.float64]) -> NDArray[np.float64]:
        return (samples - self.locations) / self.scales

    def nonmonotone_matrix(self, standard: NDArray[np.float64]) -> NDArray[np.float64]:
        columns = [
            basis.evaluate(standard[:, col])
            for col, bases in enumerate(self.nonmonotone)
            for basis in bases
        ]
        return np.column_stack(columns) if columns else np.zeros((standard.shape[0], 0))

    def monotone_matrix(self, standard: NDArray[np.float64]) -> NDArray[np.float64]:
        last = standard[:, -1]
        return np.column_stack([basis.evaluate(last) for basis in self.monotone])

    def monotone_derivative_matrix(self, standard: NDArray[np.float64]) -> NDArray[np.float64]:
        last = standard[:, -1]
        return np.column_stack([basis.derivative(last) for basis in self.monotone])

    def build(
        self,
        index: int,
        nonmonotone_coefficients: NDArray[np.float64],
        constant: float,
        monotone_coefficients: NDArray[np.float64],
    ) -> MapComponent:
        """Assemble a component on raw inputs from standardized coefficients."""
        constant = float(constant)
        parts: dict[int, UnivariateFunction] = {}
        cursor = 0
        for col, bases in enumerate(self.nonmonotone):
            terms = []
            for basis in bases:
                raw, multiplier, offset = basis.destandardized(self.locations[col], self.scales[col])
                coefficient = float(nonmonotone_coefficients[cursor])
                terms.append((coefficient * multiplier, raw))
                constant += coefficient * offset
                cursor += 1
            parts[self.active_inputs[col]] = UnivariateFunction(tuple(terms))

        terms = []
        for basis, coefficient in zip(self.monotone, monotone_coefficients, strict=True):
            raw, multiplier, offset = basis.destandardized(self.locations[-1], self.scales[-1])
            terms.append((max(float(coefficient), 0.0) * multiplier, raw))
            constant += float(coefficient) * offset
        return MapComponent(
            index=index,
            active_inputs=self.active_inputs,
            monotone=UnivariateFunction(tuple(terms), monotone=True),
            nonmonotone=parts,
            constant=constant,
            location=float(self.locations[-1]),
            scale=float(self.scales[-1]),
        )


# =============================================================================
# Solvers
# =============================================================================


def _monotone_objective(
    w: NDArray[np.float64], gram: NDArray[np.float64], derivatives: NDArray[np.float64]
) -> float:
    slopes = derivatives @ w
    if not np.all(slopes > 0):
        return np.inf
    return float(0.5 * w @ gram @ w - np.mean(np.log(slopes)))


def projected_newton(
    gram: NDArray[np.float64],
    derivatives: NDArray[np.float64],
    start: NDArray[np.float64],
    tolerance: float = NEWTON_TOLERANCE,
    max_iterations: int = NEWTON_MAX_ITERATIONS,
    index: int = 0,
    lower: NDArray[np.float64] | None = None,
) -> tuple[NDArray[np.float64], float, int]:
    """
    Minimize 0.5 w'Gw - mean(log(Dw)) subject to w >= lower.

    ``lower`` defaults to zero. Newton steps on the free variables with
    Armijo backtracking along the projection arc. Returns
    ``(w, objective, iterations)``.
    """
    rows = derivatives.shape[0]
    lower = np.zeros(derivatives.shape[1]) if lower is None else np.asarray(lower, dtype=float)
    w = np.maximum(np.asarray(start, dtype=float), lower)
    objective = _monotone_objective(w, gram, derivatives)
    if not np.isfinite(objective):
        raise FitError(f"component {index}: starting point is not strictly monotone", component=index)

    for iteration in range(1, max_iterations + 1):
        slopes = derivatives @ w
        inverse = 1.0 / slopes
        gradient = gram @ w - derivatives.T @ inverse / rows
        bound = (w <= lower + 1e-12) & (gradient > 0)
        free = ~bound
        projected = np.abs(gradient[free]).max(initial=0.0)
        if projected <= tolerance:
            return w, objective, iteration - 1

        weighted = derivatives * inverse[:, None]
        hessian = gram + weighted.T @ weighted / rows
        direction = np.zeros_like(w)
        reduced = hessian[np.ix_(free, free)]
        try:
            direction[free] = np.linalg.solve(reduced, gradient[free])
        except np.linalg.LinAlgError:
            direction[free] = np.linalg.solve(reduced + RIDGE * np.eye(reduced.shape[0]), gradient[free])

        step = 1.0
        accepted = False
        while step > 1e-20:
            candidate = np.maximum(w - step * direction, lower)
            value = _monotone_objective(candidate, gram, derivatives)
            if np.isfinite(value) and value <= objective - ARMIJO_SLOPE * gradient @ (w - candidate):
                accepted = True
                break
            step *= 0.5
        if not accepted:
            if projected <= STAGNATION_TOLERANCE:
                logger.debug("component %d: line search stalled at gradient %.2e", index, projected)
                return w, objective, iteration
            raise NonconvergenceError(
                f"component {index}: line search failed (projected gradient {projected:.2e})",
                component=index,
                best_objective=objective,
            )
        w, objective = candidate, value

    raise NonconvergenceError(
        f"component {index}: projected Newton hit {max_iterations} iterations",
        component=index,
        best_objective=objective,
    )


def component_objective(component: MapComponent, samples: ArrayLike) -> float:
    """(1/M) sum [0.5 U^k(z)^2 - log dU^k/dz_k(z)] over rows of ``samples``."""
    matrix = np.atleast_2d(np.asarray(samples, dtype=float))
    values = component.evaluate(matrix)
    slopes = component.partial_last(matrix)
    if not np.all(slopes > 0):
        return float("inf")
    return float(np.mean(0.5 * values**2 - np.log(slopes)))


def fit_component(
    samples: ArrayLike,
    active_inputs: tuple[int, ...] | list[int],
    parameterization: MapParameterization,
    *,
    index: int,
    monotone_p: int | None = None,
    method: FitMethod = FitMethod.AUTO,
) -> tuple[MapComponent, ComponentFitReport]:
    """
    Fit component ``index`` on samples whose columns follow ``active_inputs``.

    The last column is the monotone variable. ``monotone_p`` overrides the
    parameterization's choice of last-variable family.
    """
    matrix = np.atleast_2d(np.asarray(samples, dtype=float))
    active_inputs = tuple(int(i) for i in active_inputs)
    if matrix.shape[1] != len(active_inputs):
        raise MapArgumentError(
            f"component {index}: {matrix.shape[1]} sample columns for {len(active_inputs)} inputs"
        )
    if not np.all(np.isfinite(matrix)):
        raise FitError(f"component {index}: non-finite samples", component=index)
    monotone_p = parameterization.monotone_p(index) if monotone_p is None else monotone_p

    design = ComponentDesign.from_samples(
        matrix, active_inputs, parameterization.p, parameterization.gamma, monotone_p
    )
    rows = matrix.shape[0]
    if rows < design.free_coefficients:
        raise InsufficientSamplesError(
            f"component {index}: {rows} samples for {design.free_coefficients} coefficients"
        )
    standard = design.standardize(matrix)
    features = design.nonmonotone_matrix(standard)
    log_scale = float(np.log(design.scales[-1]))

    closed_form = design.affine_monotone and method != FitMethod.NEWTON
    if method == FitMethod.CLOSED_FORM and not design.affine_monotone:
        raise MapArgumentError(f"component {index}: closed form needs an affine monotone term")

    if closed_form:
        solution = fit_regression_path(standard[:, -1], features)
        component = design.build(
            index, solution.coefficients, solution.constant, np.array([solution.alpha])
        )
        report = ComponentFitReport(
            index=index,
            objective=solution.objective + log_scale,
            used_closed_form=True,
            regularized=solution.regularized,
            degenerate=solution.degenerate,
        )
        return component, report

    system = np.column_stack([features, np.ones(rows)])
    mono = design.monotone_matrix(standard)
    derivatives = design.monotone_derivative_matrix(standard)
    projection, _, rank, _ = np.linalg.lstsq(system, mono, rcond=None)
    regularized = rank < system.shape[1]
    if regularized:
        logger.warning("component %d: rank-deficient features, using ridge %.0e", index, RIDGE)
        gram_features = system.T @ system + RIDGE * np.eye(system.shape[1])
        projection = np.linalg.solve(gram_features, system.T @ mono)
    residual = mono - system @ projection
    gram = residual.T @ residual / rows

    start = np.zeros(len(design.monotone))
    start[0] = start[-1] = 1.0
    # edge terms carry the tail slopes and stay strictly positive
    lower = np.zeros_like(start)
    lower[0] = lower[-1] = MIN_EDGE_COEFFICIENT
    try:
        w, objective, iterations = projected_newton(gram, derivatives, start, index=index, lower=lower)
    except NonconvergenceError as exc:
        exc.report = ComponentFitReport(
            index=index,
            objective=float(exc.best_objective or np.nan) + log_scale,
            iterations=NEWTON_MAX_ITERATIONS,
            converged=False,
        )
        raise
    if not np.all(derivatives @ w > 0):
        raise FitError(f"component {index}: fitted map is not strictly monotone", component=index)

    beta = -projection @ w
    component = design.build(index, beta[:-1], beta[-1], w)
    report = ComponentFitReport(
        index=index,
        objective=objective + log_scale,
        iterations=iterations,
        regularized=bool(regularized),
    )
    logger.debug("component %d: objective %.6f after %d Newton steps", index, report.objective, iterations)
    return component, report


# =============================================================================
# Whole maps
# =============================================================================


@lru_cache(maxsize=4)
def _pool(workers: int) -> ThreadPoolExecutor:
    return ThreadPoolExecutor(max_workers=workers, thread_name_prefix="fit-map")


def fit_map(
    samples: ArrayLike,
    parameterization: MapParameterization,
    sparsity: SparsityPattern,
    *,
    workers: int | None = None,
    method: FitMethod = FitMethod.AUTO,
) -> tuple[TriangularMap, FitReport]:
    """
    Fit every component of a triangular map.

    Rows of ``samples`` hold the data inputs (``sparsity.data_dimension``
    columns) followed by the n state variables. Components past the
    identity cutoff are the identity. Components are independent and run
    on a thread pool when ``workers`` > 1.
    """
    matrix = np.atleast_2d(np.asarray(samples, dtype=float))
    width = sparsity.data_dimension + sparsity.n
    if matrix.shape[1] != width:
        raise MapArgumentError(f"expected {width} sample columns, got {matrix.shape[1]}")
    workers = get_settings().workers if workers is None else workers

    def fit_one(k: int) -> tuple[MapComponent, ComponentFitReport]:
        variable = sparsity.data_dimension + k
        if sparsity.is_identity(k):
            component = MapComponent.identity(k, variable)
            return component, ComponentFitReport(
                index=k,
                objective=component_objective(component, matrix),
                used_closed_form=True,
            )
        inputs = sparsity[k]
        try:
            return fit_component(
                matrix[:, list(inputs)],
                inputs,
                parameterization,
                index=k,
                monotone_p=parameterization.monotone_p(k),
                method=method,
            )
        except FitError as exc:
            exc.component = k
            raise
        except InsufficientSamplesError as exc:
            exc.add_note(f"while fitting component {k}")
            raise

    fitted = sum(1 for k in range(sparsity.n) if not sparsity.is_identity(k))
    if workers > 1 and fitted > 1:
        results = list(_pool(workers).map(fit_one, range(sparsity.n)))
    else:
        results = [fit_one(k) for k in range(sparsity.n)]

    transport_map = TriangularMap(tuple(c for c, _ in results), sparsity.data_dimension)
    return transport_map, FitReport([r for _, r in results])

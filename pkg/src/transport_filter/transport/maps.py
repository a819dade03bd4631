"""
Monotone lower-triangular transport maps.

A component k of a map evaluates

    U^k(z) = c + sum_{i in A_k, i != k} u_i(z_i) + u_k(z_k)

with u_k strictly increasing. Maps may carry leading *data* inputs that
have no component of their own (the conditioning slot of a joint
state-data map); component k's last input is then ``data_dimension + k``.

All evaluation routines accept one point (1-D array) or a batch of
points (rows of a 2-D array) and return the matching shape.
"""

from __future__ import annotations

import math
from collections.abc import Mapping
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import orjson
from numpy.typing import ArrayLike, NDArray

from transport_filter.core.exceptions import InversionError, MapArgumentError, MonotonicityError
from transport_filter.transport.basis import UnivariateFunction

MAP_FORMAT = "transport-filter/triangular-map"
MAP_FORMAT_VERSION = 1

INVERSION_TOLERANCE = 1e-10
BRACKET_WIDTH = 10.0
BRACKET_DOUBLINGS = 60
NEWTON_ITERATIONS = 200

LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def _as_matrix(z: ArrayLike, width: int, what: str) -> tuple[NDArray[np.float64], bool]:
    array = np.asarray(z, dtype=float)
    single = array.ndim == 1
    matrix = np.atleast_2d(array)
    if matrix.ndim != 2 or matrix.shape[1] != width:
        raise MapArgumentError(f"{what}: expected {width} columns, got shape {array.shape}")
    return matrix, single


@dataclass(frozen=True)
class MapComponent:
    """
    One separable component of a triangular map.

    ``location`` and ``scale`` describe the training marginal of the last
    variable and seed the inversion bracket.
    """

    index: int
    active_inputs: tuple[int, ...]
    monotone: UnivariateFunction
    nonmonotone: Mapping[int, UnivariateFunction] = field(default_factory=dict)
    constant: float = 0.0
    location: float = 0.0
    scale: float = 1.0

    def __post_init__(self) -> None:
        inputs = tuple(int(i) for i in self.active_inputs)
        object.__setattr__(self, "active_inputs", inputs)
        object.__setattr__(self, "nonmonotone", dict(self.nonmonotone))
        if not inputs:
            raise MapArgumentError(f"component {self.index} has no inputs")
        if any(b <= a for a, b in zip(inputs, inputs[1:], strict=False)) or inputs[0] < 0:
            raise MapArgumentError(f"component {self.index}: inputs must be increasing, got {inputs}")
        if not self.monotone.monotone:
            raise MonotonicityError(
                f"component {self.index}: last-variable term is not monotone", self.index
            )
        extra = set(self.nonmonotone) - set(inputs[:-1])
        if extra:
            raise MapArgumentError(f"component {self.index}: terms on inactive inputs {sorted(extra)}")
        if not self.scale > 0:
            object.__setattr__(self, "scale", 1.0)

    @property
    def variable(self) -> int:
        """Input column of the monotone (last) variable."""
        return self.active_inputs[-1]

    @property
    def is_identity(self) -> bool:
        return (
            self.constant == 0.0
            and not self.nonmonotone
            and self.monotone.is_linear
            and float(self.monotone.coefficients.sum()) == 1.0
        )

    @classmethod
    def identity(cls, index: int, variable: int | None = None) -> MapComponent:
        variable = index if variable is None else variable
        return cls(index=index, active_inputs=(variable,), monotone=UnivariateFunction.linear(1.0))

    def _check_width(self, inputs: NDArray[np.float64]) -> None:
        if inputs.shape[1] <= self.variable:
            raise MapArgumentError(
                f"component {self.index} reads input {self.variable}, "
                f"but only {inputs.shape[1]} inputs were given"
            )

    def offset(self, inputs: NDArray[np.float64]) -> NDArray[np.float64]:
        """Everything except the last-variable term: c + sum of u_i(z_i)."""
        out = np.full(inputs.shape[0], self.constant)
        for i, fn in self.nonmonotone.items():
            out += fn.evaluate(inputs[:, i])
        return out

    def evaluate(self, inputs: ArrayLike) -> NDArray[np.float64]:
        """U^k at each row of ``inputs`` (columns indexed by input number)."""
        matrix = np.atleast_2d(np.asarray(inputs, dtype=float))
        self._check_width(matrix)
        value = self.offset(matrix) + self.monotone.evaluate(matrix[:, self.variable])
        return value if np.ndim(inputs) > 1 else value[0]

    def partial_last(self, inputs: ArrayLike) -> NDArray[np.float64]:
        """Derivative of U^k in its last variable."""
        matrix = np.atleast_2d(np.asarray(inputs, dtype=float))
        self._check_width(matrix)
        value = self.monotone.derivative(matrix[:, self.variable])
        return value if np.ndim(inputs) > 1 else value[0]

    def solve_last(self, inputs: NDArray[np.float64], targets: NDArray[np.float64]) -> NDArray[np.float64]:
        """
        Solve U^k(inputs[:, :variable], xi) = targets for xi.

        Columns from ``variable`` onward are ignored.
        """
        residual_target = targets - self.constant
        for i, fn in self.nonmonotone.items():
            residual_target = residual_target - fn.evaluate(inputs[:, i])
        return solve_monotone(
            self.monotone,
            residual_target,
            location=self.location,
            scale=self.scale,
            component=self.index,
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "index": self.index,
            "active_inputs": list(self.active_inputs),
            "constant": self.constant,
            "location": self.location,
            "scale": self.scale,
            "monotone": self.monotone.to_dict(),
            "nonmonotone": {str(i): fn.to_dict() for i, fn in self.nonmonotone.items()},
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> MapComponent:
        return cls(
            index=int(data["index"]),
            active_inputs=tuple(data["active_inputs"]),
            monotone=UnivariateFunction.from_dict(data["monotone"]),
            nonmonotone={
                int(i): UnivariateFunction.from_dict(fn)
                for i, fn in data.get("nonmonotone", {}).items()
            },
            constant=float(data.get("constant", 0.0)),
            location=float(data.get("location", 0.0)),
            scale=float(data.get("scale", 1.0)),
        )


def solve_monotone(
    fn: UnivariateFunction,
    targets: NDArray[np.float64],
    location: float = 0.0,
    scale: float = 1.0,
    component: int = 0,
) -> NDArray[np.float64]:
    """
    Solve fn(xi) = target for every target by bracketed safeguarded Newton.

    Affine functions are solved in closed form. Otherwise the bracket
    starts at location +/- 10 * scale and doubles (up to 60 times) until
    it contains every root; Newton steps that leave the bracket are
    replaced by bisection.
    """
    targets = np.asarray(targets, dtype=float)
    if fn.is_linear:
        slope = float(fn.coefficients.sum())
        if not slope > 0:
            raise MonotonicityError(f"component {component}: non-positive slope {slope}", component)
        return targets / slope

    lo = np.full_like(targets, location - BRACKET_WIDTH * scale)
    hi = np.full_like(targets, location + BRACKET_WIDTH * scale)
    for _ in range(BRACKET_DOUBLINGS):
        low_bad = fn.evaluate(lo) > targets
        high_bad = fn.evaluate(hi) < targets
        if not (low_bad.any() or high_bad.any()):
            break
        width = hi - lo
        lo = np.where(low_bad, lo - width, lo)
        hi = np.where(high_bad, hi + width, hi)
    else:
        low_bad = fn.evaluate(lo) > targets
        high_bad = fn.evaluate(hi) < targets
        if low_bad.any() or high_bad.any():
            raise InversionError(
                f"component {component}: root not bracketed after {BRACKET_DOUBLINGS} doublings",
                component=component,
                particles=np.flatnonzero(low_bad | high_bad),
            )

    xi = 0.5 * (lo + hi)
    converged = np.zeros(targets.shape, dtype=bool)
    for _ in range(NEWTON_ITERATIONS):
        residual = fn.evaluate(xi) - targets
        collapsed = (hi - lo) <= 4.0 * np.finfo(float).eps * np.maximum(1.0, np.abs(xi))
        converged = (np.abs(residual) <= INVERSION_TOLERANCE) | collapsed
        if converged.all():
            break
        lo = np.where(residual < 0, xi, lo)
        hi = np.where(residual > 0, xi, hi)
        slope = fn.derivative(xi)
        with np.errstate(divide="ignore", invalid="ignore"):
            newton = xi - residual / slope
        inside = np.isfinite(newton) & (newton > lo) & (newton < hi)
        step = np.where(inside, newton, 0.5 * (lo + hi))
        xi = np.where(converged, xi, step)
    else:
        raise InversionError(
            f"component {component}: root finding did not converge",
            component=component,
            particles=np.flatnonzero(~converged),
        )
    return xi


@dataclass(frozen=True)
class TriangularMap:
    """Ordered monotone components with an optional leading data slot."""

    components: tuple[MapComponent, ...]
    data_dimension: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "components", tuple(self.components))
        for k, comp in enumerate(self.components):
            if comp.index != k:
                raise MapArgumentError(f"component at position {k} has index {comp.index}")
            if comp.variable != self.data_dimension + k:
                raise MapArgumentError(
                    f"component {k} must be monotone in input {self.data_dimension + k}, "
                    f"not {comp.variable}"
                )

    def __len__(self) -> int:
        return len(self.components)

    def __repr__(self) -> str:
        return f"TriangularMap(dimension={self.dimension}, data_dimension={self.data_dimension})"

    @property
    def dimension(self) -> int:
        return len(self.components)

    @property
    def input_dimension(self) -> int:
        return self.data_dimension + self.dimension

    @classmethod
    def identity(cls, n: int, data_dimension: int = 0) -> TriangularMap:
        return cls(
            tuple(MapComponent.identity(k, data_dimension + k) for k in range(n)),
            data_dimension,
        )

    def with_identity(self, k: int) -> TriangularMap:
        """Copy with component k replaced by the identity in its variable."""
        components = list(self.components)
        components[k] = MapComponent.identity(k, self.data_dimension + k)
        return TriangularMap(tuple(components), self.data_dimension)

    def evaluate(self, z: ArrayLike) -> NDArray[np.float64]:
        """Apply every component; rows of ``z`` hold data inputs then states."""
        matrix, single = _as_matrix(z, self.input_dimension, "evaluate")
        out = np.empty((matrix.shape[0], self.dimension))
        for k, comp in enumerate(self.components):
            if comp.is_identity:
                out[:, k] = matrix[:, comp.variable]
            else:
                out[:, k] = comp.offset(matrix) + comp.monotone.evaluate(matrix[:, comp.variable])
        return out[0] if single else out

    def partial_diagonal(self, z: ArrayLike) -> NDArray[np.float64]:
        """Diagonal of the Jacobian: d U^k / d z_k for every component."""
        matrix, single = _as_matrix(z, self.input_dimension, "partial_diagonal")
        out = np.column_stack(
            [comp.monotone.derivative(matrix[:, comp.variable]) for comp in self.components]
        )
        return out[0] if single else out

    def invert(self, x: ArrayLike, data_values: ArrayLike | None = None) -> NDArray[np.float64]:
        """
        Solve U(data, z) = x for z, one component at a time.

        ``data_values`` holds one row per point (or one row broadcast to
        all points) when the map has a data slot.
        """
        targets, single = _as_matrix(x, self.dimension, "invert")
        rows = targets.shape[0]
        inputs = np.zeros((rows, self.input_dimension))
        if self.data_dimension:
            if data_values is None:
                raise MapArgumentError("map has a data slot but no data values were given")
            data = np.asarray(data_values, dtype=float).reshape(-1, self.data_dimension)
            inputs[:, : self.data_dimension] = np.broadcast_to(data, (rows, self.data_dimension))
        for k, comp in enumerate(self.components):
            inputs[:, comp.variable] = comp.solve_last(inputs, targets[:, k])
        states = inputs[:, self.data_dimension :]
        return states[0] if single else states

    def log_pullback_density(self, z: ArrayLike) -> NDArray[np.float64]:
        """
        log eta(U(z)) + sum_k log dU^k/dz_k with eta the standard normal.

        Raises MonotonicityError where a diagonal derivative is not positive.
        """
        matrix, single = _as_matrix(z, self.input_dimension, "log_pullback_density")
        values = self.evaluate(matrix)
        partials = self.partial_diagonal(matrix)
        if not np.all(partials > 0):
            bad = int(np.argwhere(~(partials > 0))[0, 1])
            raise MonotonicityError(f"component {bad} has a non-positive derivative", bad)
        out = (
            -0.5 * np.sum(values**2, axis=1)
            - self.dimension * LOG_SQRT_2PI
            + np.sum(np.log(partials), axis=1)
        )
        return out[0] if single else out

    def grad_log_pullback_density(self, z: ArrayLike) -> NDArray[np.float64]:
        """Gradient of log_pullback_density with respect to every input."""
        matrix, single = _as_matrix(z, self.input_dimension, "grad_log_pullback_density")
        grad = np.zeros_like(matrix)
        for comp in self.components:
            value = comp.offset(matrix) + comp.monotone.evaluate(matrix[:, comp.variable])
            last = matrix[:, comp.variable]
            slope = comp.monotone.derivative(last)
            for i, fn in comp.nonmonotone.items():
                grad[:, i] -= value * fn.derivative(matrix[:, i])
            grad[:, comp.variable] += -value * slope + comp.monotone.second_derivative(last) / slope
        return grad[0] if single else grad

    def sample_pushforward(
        self,
        n_samples: int,
        rng: np.random.Generator,
        data_values: ArrayLike | None = None,
    ) -> NDArray[np.float64]:
        """Draw standard normal references and map them through the inverse."""
        reference = rng.standard_normal((n_samples, self.dimension))
        return self.invert(reference, data_values)

    def to_dict(self) -> dict[str, Any]:
        return {
            "format": MAP_FORMAT,
            "version": MAP_FORMAT_VERSION,
            "dimension": self.dimension,
            "data_dimension": self.data_dimension,
            "components": [comp.to_dict() for comp in self.components],
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> TriangularMap:
        if data.get("format") != MAP_FORMAT:
            raise MapArgumentError(f"not a triangular map document: {data.get('format')!r}")
        components = tuple(MapComponent.from_dict(c) for c in data["components"])
        if len(components) != int(data["dimension"]):
            raise MapArgumentError("component count does not match the declared dimension")
        return cls(components, int(data.get("data_dimension", 0)))


def dumps_map(transport_map: TriangularMap) -> bytes:
    """Serialize a map to indented JSON at full double precision."""
    return orjson.dumps(transport_map.to_dict(), option=orjson.OPT_INDENT_2 | orjson.OPT_SERIALIZE_NUMPY)


def loads_map(payload: bytes | str) -> TriangularMap:
    return TriangularMap.from_dict(orjson.loads(payload))

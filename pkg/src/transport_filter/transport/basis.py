"""
Univariate basis functions for separable triangular map components.

Non-monotone terms combine a linear term with Gaussian RBFs. Monotone
terms use the erf-sigmoid family: a left edge term, interior sigmoids
and a right edge term, all with closed forms so no quadrature is needed.
"""

from __future__ import annotations

import math
from collections.abc import Iterable
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.special import erf, erfc

from transport_filter.core.exceptions import InsufficientSamplesError, MapArgumentError

SQRT2 = math.sqrt(2.0)
SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)
INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


class BasisKind(str, Enum):
    """Shapes a univariate basis function can take."""
    LINEAR = "linear"
    CONSTANT = "constant"
    GAUSSIAN_RBF = "gaussian_rbf"
    SIGMOID_LEFT = "sigmoid_left"    # integral of a decreasing sigmoid
    SIGMOID_BUMP = "sigmoid_bump"    # erf sigmoid
    SIGMOID_RIGHT = "sigmoid_right"  # integral of an increasing sigmoid

    @property
    def is_monotone(self) -> bool:
        return self is not BasisKind.GAUSSIAN_RBF


_CENTERED = {
    BasisKind.GAUSSIAN_RBF,
    BasisKind.SIGMOID_LEFT,
    BasisKind.SIGMOID_BUMP,
    BasisKind.SIGMOID_RIGHT,
}


def normal_pdf(z: NDArray[np.float64], center: float, scale: float) -> NDArray[np.float64]:
    """N(z; center, scale^2)."""
    u = (z - center) / scale
    return INV_SQRT_2PI / scale * np.exp(-0.5 * u * u)


@dataclass(frozen=True)
class BasisFunction:
    """One univariate basis function with its center and scale."""

    kind: BasisKind
    center: float = 0.0
    scale: float = 1.0

    def __post_init__(self) -> None:
        if self.kind in _CENTERED and not (self.scale > 0 and math.isfinite(self.scale)):
            raise MapArgumentError(f"{self.kind.value} basis needs a positive scale, got {self.scale}")

    @property
    def is_monotone(self) -> bool:
        return self.kind.is_monotone

    def _delta(self, z: NDArray[np.float64]) -> NDArray[np.float64]:
        return (z - self.center) / (SQRT2 * self.scale)

    def evaluate(self, z: ArrayLike) -> NDArray[np.float64]:
        z = np.asarray(z, dtype=float)
        kind = self.kind
        if kind is BasisKind.LINEAR:
            return z.copy()
        if kind is BasisKind.CONSTANT:
            return np.ones_like(z)
        if kind is BasisKind.GAUSSIAN_RBF:
            return normal_pdf(z, self.center, self.scale)
        delta = self._delta(z)
        if kind is BasisKind.SIGMOID_BUMP:
            return 0.5 * (1.0 + erf(delta))
        bump = self.scale * SQRT_2_OVER_PI * np.exp(-delta * delta)
        if kind is BasisKind.SIGMOID_LEFT:
            return 0.5 * ((z - self.center) * erfc(delta) - bump)
        return 0.5 * ((z - self.center) * erfc(-delta) + bump)

    def derivative(self, z: ArrayLike) -> NDArray[np.float64]:
        z = np.asarray(z, dtype=float)
        kind = self.kind
        if kind is BasisKind.LINEAR:
            return np.ones_like(z)
        if kind is BasisKind.CONSTANT:
            return np.zeros_like(z)
        if kind is BasisKind.GAUSSIAN_RBF:
            return -(z - self.center) / self.scale**2 * normal_pdf(z, self.center, self.scale)
        if kind is BasisKind.SIGMOID_BUMP:
            return normal_pdf(z, self.center, self.scale)
        delta = self._delta(z)
        if kind is BasisKind.SIGMOID_LEFT:
            return 0.5 * erfc(delta)
        return 0.5 * erfc(-delta)

    def second_derivative(self, z: ArrayLike) -> NDArray[np.float64]:
        z = np.asarray(z, dtype=float)
        kind = self.kind
        if kind in (BasisKind.LINEAR, BasisKind.CONSTANT):
            return np.zeros_like(z)
        pdf = normal_pdf(z, self.center, self.scale)
        if kind is BasisKind.GAUSSIAN_RBF:
            u2 = ((z - self.center) / self.scale) ** 2
            return (u2 - 1.0) / self.scale**2 * pdf
        if kind is BasisKind.SIGMOID_BUMP:
            return -(z - self.center) / self.scale**2 * pdf
        if kind is BasisKind.SIGMOID_LEFT:
            return -pdf
        return pdf

    def destandardized(self, location: float, scale: float) -> tuple[BasisFunction, float, float]:
        """
        Re-express this basis of s = (x - location) / scale in terms of x.

        Returns ``(basis, multiplier, offset)`` with
        ``self(s) == multiplier * basis(x) + offset``.
        """
        kind = self.kind
        if kind is BasisKind.LINEAR:
            return self, 1.0 / scale, -location / scale
        if kind is BasisKind.CONSTANT:
            return self, 1.0, 0.0
        moved = BasisFunction(kind, location + scale * self.center, scale * self.scale)
        if kind is BasisKind.GAUSSIAN_RBF:
            return moved, scale, 0.0
        if kind is BasisKind.SIGMOID_BUMP:
            return moved, 1.0, 0.0
        return moved, 1.0 / scale, 0.0

    def to_dict(self) -> dict[str, Any]:
        data: dict[str, Any] = {"kind": self.kind.value}
        if self.kind in _CENTERED:
            data["center"] = self.center
            data["scale"] = self.scale
        return data

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> BasisFunction:
        return cls(
            kind=BasisKind(data["kind"]),
            center=float(data.get("center", 0.0)),
            scale=float(data.get("scale", 1.0)),
        )


LINEAR = BasisFunction(BasisKind.LINEAR)
CONSTANT = BasisFunction(BasisKind.CONSTANT)


@dataclass(frozen=True)
class UnivariateFunction:
    """
    Weighted sum of basis functions of one variable.

    With ``monotone`` set, every basis must be monotone and every
    coefficient on a non-constant basis nonnegative.
    """

    terms: tuple[tuple[float, BasisFunction], ...] = field(default_factory=tuple)
    monotone: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "terms", tuple((float(c), b) for c, b in self.terms)
        )
        if self.monotone:
            for coefficient, basis in self.terms:
                if not basis.is_monotone:
                    raise MapArgumentError(f"{basis.kind.value} basis in a monotone function")
                if basis.kind is not BasisKind.CONSTANT and coefficient < 0:
                    raise MapArgumentError(
                        f"negative coefficient {coefficient} on monotone {basis.kind.value} basis"
                    )

    @classmethod
    def from_terms(
        cls,
        coefficients: Iterable[float],
        bases: Iterable[BasisFunction],
        monotone: bool = False,
    ) -> UnivariateFunction:
        return cls(tuple(zip(coefficients, bases, strict=True)), monotone)

    @classmethod
    def linear(cls, slope: float = 1.0) -> UnivariateFunction:
        return cls(((slope, LINEAR),), monotone=slope >= 0)

    @property
    def coefficients(self) -> NDArray[np.float64]:
        return np.array([c for c, _ in self.terms], dtype=float)

    @property
    def bases(self) -> tuple[BasisFunction, ...]:
        return tuple(b for _, b in self.terms)

    @property
    def is_linear(self) -> bool:
        """True when the function is a multiple of the identity."""
        return all(b.kind is BasisKind.LINEAR for _, b in self.terms)

    def evaluate(self, z: ArrayLike) -> NDArray[np.float64]:
        z = np.asarray(z, dtype=float)
        out = np.zeros_like(z)
        for coefficient, basis in self.terms:
            out += coefficient * basis.evaluate(z)
        return out

    def derivative(self, z: ArrayLike) -> NDArray[np.float64]:
        z = np.asarray(z, dtype=float)
        out = np.zeros_like(z)
        for coefficient, basis in self.terms:
            if basis.kind is not BasisKind.CONSTANT:
                out += coefficient * basis.derivative(z)
        return out

    def second_derivative(self, z: ArrayLike) -> NDArray[np.float64]:
        z = np.asarray(z, dtype=float)
        out = np.zeros_like(z)
        for coefficient, basis in self.terms:
            out += coefficient * basis.second_derivative(z)
        return out

    def to_dict(self) -> dict[str, Any]:
        return {
            "monotone": self.monotone,
            "terms": [{"coefficient": c, **b.to_dict()} for c, b in self.terms],
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> UnivariateFunction:
        return cls(
            tuple((float(t["coefficient"]), BasisFunction.from_dict(t)) for t in data["terms"]),
            monotone=bool(data.get("monotone", False)),
        )


def nonmonotone_bases(centers: NDArray[np.float64], scales: NDArray[np.float64]) -> list[BasisFunction]:
    """Linear term followed by one Gaussian RBF per center."""
    return [LINEAR] + [
        BasisFunction(BasisKind.GAUSSIAN_RBF, float(c), float(s))
        for c, s in zip(centers, scales, strict=True)
    ]


def monotone_bases(centers: NDArray[np.float64], scales: NDArray[np.float64]) -> list[BasisFunction]:
    """
    Monotone family for p + 2 centers: left edge, p sigmoids, right edge.

    An empty center list gives the affine family (a single linear term).
    """
    if len(centers) == 0:
        return [LINEAR]
    if len(centers) < 2:
        raise MapArgumentError("the sigmoid family needs at least two centers")
    kinds = (
        [BasisKind.SIGMOID_LEFT]
        + [BasisKind.SIGMOID_BUMP] * (len(centers) - 2)
        + [BasisKind.SIGMOID_RIGHT]
    )
    return [
        BasisFunction(kind, float(c), float(s))
        for kind, c, s in zip(kinds, centers, scales, strict=True)
    ]


def select_centers_scales(
    samples: ArrayLike,
    p: int,
    gamma: float = 2.0,
    monotone: bool = False,
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """
    Place basis centers at empirical quantiles and derive their widths.

    The non-monotone case uses p centers at quantiles j/(p+1); the monotone
    case uses p + 2 centers at quantiles j/(p+3). Widths are
    gamma * (next center - previous center) / 2, with the outermost
    centers standing in for their missing neighbors. A zero width falls
    back to gamma times the sample standard deviation.
    """
    x = np.asarray(samples, dtype=float).ravel()
    if gamma <= 0:
        raise MapArgumentError(f"gamma must be positive, got {gamma}")
    if p < 0:
        raise MapArgumentError(f"p must be nonnegative, got {p}")
    if x.size < p + 2:
        raise InsufficientSamplesError(f"{x.size} samples cannot support p={p} centers")
    if p == 0:
        return np.empty(0), np.empty(0)

    count = p + 2 if monotone else p
    levels = np.arange(1, count + 1) / (count + 1)
    centers = np.quantile(x, levels)

    padded = np.concatenate([centers[:1], centers, centers[-1:]])
    scales = gamma * (padded[2:] - padded[:-2]) / 2.0
    fallback = gamma * float(np.std(x, ddof=1))
    if not fallback > 0:
        fallback = gamma
    scales = np.where(scales > 0, scales, fallback)
    return centers, scales

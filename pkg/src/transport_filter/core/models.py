"""
Typed configuration models for filters, test dynamics and experiments.

These models enforce:
- Valid parameter ranges (inflation >= 1, RBF counts >= 0, positive steps)
- Observation intervals that are whole multiples of the integration step
- Metric windows that fit inside the test phase
"""

from __future__ import annotations

import itertools
import math
from enum import Enum
from pathlib import Path
from typing import Any

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from transport_filter.core.exceptions import ConfigError


class DynamicsKind(str, Enum):
    """Supported test dynamics."""
    LORENZ63 = "lorenz63"
    LORENZ96 = "lorenz96"


class NoiseKind(str, Enum):
    """Observation noise families."""
    GAUSSIAN = "gaussian"  # variance theta^2
    LAPLACE = "laplace"    # scale theta, variance 2 theta^2


class FilterKind(str, Enum):
    """Analysis algorithms."""
    ENKF = "enkf"
    STOCHASTIC_MAP = "stochastic_map"
    DETERMINISTIC_MAP = "deterministic_map"
    DETERMINISTIC_LOCAL = "deterministic_local"
    SIR = "sir"

    @property
    def requires_likelihood(self) -> bool:
        """Whether the analysis evaluates the observation density."""
        return self in (
            FilterKind.DETERMINISTIC_MAP,
            FilterKind.DETERMINISTIC_LOCAL,
            FilterKind.SIR,
        )


class DiagonalMode(str, Enum):
    """Which components get a nonlinear monotone term in their last variable."""
    AFFINE = "affine"  # every monotone term affine
    FIRST = "first"    # only the first component
    ALL = "all"


# =============================================================================
# Dynamics and observations
# =============================================================================


class DynamicsSpec(BaseModel):
    """
    Lorenz-63 or Lorenz-96 dynamics with RK4 integration.

    ``dt_obs`` must be a whole multiple of ``dt``. Lorenz-63 is always
    three-dimensional; ``dimension`` only applies to Lorenz-96.
    """

    model_config = ConfigDict(frozen=True)

    kind: DynamicsKind = DynamicsKind.LORENZ96
    sigma: float = 10.0
    rho: float = 28.0
    beta: float = 8.0 / 3.0
    forcing: float = 8.0
    dimension: int = Field(40, ge=1)
    dt: float = Field(0.01, gt=0)
    dt_obs: float = Field(0.4, gt=0)
    process_noise_std: float = Field(0.0, ge=0)

    @model_validator(mode="before")
    @classmethod
    def default_dimension(cls, data: Any) -> Any:
        """Lorenz-63 has a fixed dimension of three."""
        if isinstance(data, dict) and data.get("kind") == DynamicsKind.LORENZ63:
            data = {**data}
            data.setdefault("dimension", 3)
        return data

    @model_validator(mode="after")
    def check_steps(self) -> DynamicsSpec:
        if self.kind == DynamicsKind.LORENZ63 and self.dimension != 3:
            raise ValueError("lorenz63 dynamics are three-dimensional")
        if self.kind == DynamicsKind.LORENZ96 and self.dimension < 4:
            raise ValueError("lorenz96 needs at least four components")
        ratio = self.dt_obs / self.dt
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio) or round(ratio) < 1:
            raise ValueError(f"dt_obs={self.dt_obs} is not a whole multiple of dt={self.dt}")
        return self

    @property
    def steps_per_cycle(self) -> int:
        """RK4 steps between consecutive observation times."""
        return int(round(self.dt_obs / self.dt))

    def distance(self, i: int, j: int) -> float:
        """Distance between state components (cyclic for Lorenz-96)."""
        gap = abs(i - j)
        if self.kind == DynamicsKind.LORENZ96:
            return float(min(gap, self.dimension - gap))
        return float(gap)


class ObservationSpec(BaseModel):
    """
    Which components are observed and with what noise.

    ``count`` selects d components at a uniform stride n/d starting at the
    first component; ``indices`` (0-based) overrides it.
    """

    model_config = ConfigDict(frozen=True)

    count: int | None = Field(None, ge=1)
    indices: tuple[int, ...] | None = None
    noise: NoiseKind = NoiseKind.GAUSSIAN
    theta: float = Field(1.0, ge=0)

    @field_validator("indices")
    @classmethod
    def validate_indices(cls, v: tuple[int, ...] | None) -> tuple[int, ...] | None:
        if v is not None:
            if not v:
                raise ValueError("indices must not be empty")
            if any(b <= a for a, b in itertools.pairwise(v)) or v[0] < 0:
                raise ValueError("indices must be nonnegative and strictly increasing")
        return v

    def observed_indices(self, n: int) -> tuple[int, ...]:
        """Observed components for an n-dimensional state."""
        if self.indices is not None:
            if self.indices[-1] >= n:
                raise ConfigError(f"observed index {self.indices[-1]} outside a {n}-dimensional state")
            return self.indices
        d = n if self.count is None else self.count
        if d > n or n % d != 0:
            raise ConfigError(f"cannot observe {d} of {n} components at a uniform stride")
        return tuple(range(0, n, n // d))

    @property
    def noise_std(self) -> float:
        """Standard deviation of one noise draw."""
        if self.noise == NoiseKind.LAPLACE:
            return math.sqrt(2.0) * self.theta
        return self.theta


# =============================================================================
# Filters
# =============================================================================


class FilterConfig(BaseModel):
    """Analysis algorithm and its tuning knobs."""

    model_config = ConfigDict(frozen=True)

    kind: FilterKind = FilterKind.STOCHASTIC_MAP
    p: int = Field(0, ge=0)  # RBFs per non-monotone input
    gamma: float = Field(2.0, gt=0)
    radius: float | None = Field(None, ge=0)  # None keeps the map dense
    identity_cutoff: int | None = Field(None, ge=1)
    inflation: float = Field(1.0, ge=1.0)
    enkf_radius: float | None = Field(None, gt=0)  # Gaspari-Cohn half-width c
    diagonal: DiagonalMode = DiagonalMode.FIRST
    local_likelihood: bool = True
    reference_samples: int | None = Field(None, ge=1)
    grid_points: int = Field(2001, ge=3)
    seed: int = Field(0, ge=0)


class ReferenceConfig(BaseModel):
    """Reference particle filter run alongside an experiment."""

    model_config = ConfigDict(frozen=True)

    ensemble_size: int = Field(100_000, ge=2)


# =============================================================================
# Experiments
# =============================================================================


SWEEP_KEYS: dict[str, tuple[str, ...]] = {
    "radius": ("filter", "radius"),
    "identity_cutoff": ("filter", "identity_cutoff"),
    "inflation": ("filter", "inflation"),
    "enkf_radius": ("filter", "enkf_radius"),
    "p": ("filter", "p"),
    "ensemble_size": ("ensemble_size",),
    "dt_obs": ("dynamics", "dt_obs"),
}


class ExperimentConfig(BaseModel):
    """
    Twin-experiment protocol.

    A run spins up with an unlocalized stochastic EnKF for ``spinup_steps``
    cycles, then runs the configured filter for ``test_steps`` cycles and
    summarizes the trailing ``metric_window`` records.
    """

    model_config = ConfigDict(frozen=True)

    name: str = "experiment"
    dynamics: DynamicsSpec = Field(default_factory=DynamicsSpec)
    observation: ObservationSpec = Field(default_factory=ObservationSpec)
    filter: FilterConfig = Field(default_factory=FilterConfig)
    ensemble_size: int = Field(400, ge=2)
    spinup_steps: int = Field(2000, ge=0)
    test_steps: int = Field(4000, ge=0)
    metric_window: int = Field(2000, ge=0)
    seed: int = Field(0, ge=0)
    reference: ReferenceConfig | None = None

    @model_validator(mode="after")
    def check_protocol(self) -> ExperimentConfig:
        if self.test_steps > 0 and self.metric_window > self.test_steps:
            raise ValueError(
                f"metric_window={self.metric_window} exceeds test_steps={self.test_steps}"
            )
        self.observation.observed_indices(self.dynamics.dimension)
        return self

    @property
    def observed_indices(self) -> tuple[int, ...]:
        return self.observation.observed_indices(self.dynamics.dimension)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> ExperimentConfig:
        """Validate a plain mapping (YAML data)."""
        try:
            return cls.model_validate(data)
        except (ValidationError, ConfigError) as exc:
            raise ConfigError(f"invalid experiment config: {exc}") from exc

    @classmethod
    def from_yaml(cls, path: Path | str) -> ExperimentConfig:
        """Load and validate a YAML config file."""
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"Config file not found: {path}")
        with open(path) as f:
            data = yaml.safe_load(f) or {}
        return cls.from_dict(data)

    def with_overrides(self, overrides: dict[str, Any]) -> ExperimentConfig:
        """Return a revalidated copy with sweep keys applied."""
        data = self.model_dump(mode="json")
        for key, value in overrides.items():
            if key not in SWEEP_KEYS:
                raise ConfigError(f"unknown sweep key: {key}")
            *parents, leaf = SWEEP_KEYS[key]
            target = data
            for parent in parents:
                target = target[parent]
            target[leaf] = value
        return self.from_dict(data)


class SweepGrid(BaseModel):
    """Value lists per tunable key; keys left unset are not swept."""

    model_config = ConfigDict(frozen=True)

    radius: list[float | None] | None = None
    identity_cutoff: list[int | None] | None = None
    inflation: list[float] | None = None
    enkf_radius: list[float | None] | None = None
    p: list[int] | None = None
    ensemble_size: list[int] | None = None
    dt_obs: list[float] | None = None

    @model_validator(mode="after")
    def check_nonempty(self) -> SweepGrid:
        axes = self.axes()
        if not axes:
            raise ValueError("sweep grid has no axes")
        for key, values in axes.items():
            if not values:
                raise ValueError(f"sweep axis {key!r} is empty")
        return self

    def axes(self) -> dict[str, list[Any]]:
        return {
            key: list(values)
            for key, values in self.model_dump().items()
            if values is not None
        }

    def combinations(self) -> list[dict[str, Any]]:
        """Every grid point, in row-major order of the axes."""
        axes = self.axes()
        keys = list(axes)
        return [dict(zip(keys, values, strict=True)) for values in itertools.product(*axes.values())]

    def __len__(self) -> int:
        return math.prod(len(v) for v in self.axes().values())

    @classmethod
    def from_yaml(cls, path: Path | str) -> SweepGrid:
        """Load and validate a YAML grid file."""
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"Grid file not found: {path}")
        with open(path) as f:
            data = yaml.safe_load(f) or {}
        try:
            return cls.model_validate(data)
        except ValidationError as exc:
            raise ConfigError(f"invalid sweep grid: {exc}") from exc

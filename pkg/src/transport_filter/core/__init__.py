"""Typed configuration, exceptions, settings and random streams."""

from transport_filter.core.exceptions import (
    AnalysisError,
    ConfigError,
    DegeneracyError,
    DensityTargetError,
    DivergenceError,
    FitError,
    InsufficientSamplesError,
    InversionError,
    LikelihoodUnavailableError,
    MapArgumentError,
    MonotonicityError,
    NonconvergenceError,
    SweepError,
    TransportFilterError,
)
from transport_filter.core.models import (
    DiagonalMode,
    DynamicsKind,
    DynamicsSpec,
    ExperimentConfig,
    FilterConfig,
    FilterKind,
    NoiseKind,
    ObservationSpec,
    ReferenceConfig,
    SweepGrid,
)
from transport_filter.core.random import rng_stream
from transport_filter.core.settings import RuntimeSettings, get_settings

__all__ = [
    "AnalysisError",
    "ConfigError",
    "DegeneracyError",
    "DensityTargetError",
    "DiagonalMode",
    "DivergenceError",
    "DynamicsKind",
    "DynamicsSpec",
    "ExperimentConfig",
    "FilterConfig",
    "FilterKind",
    "FitError",
    "InsufficientSamplesError",
    "InversionError",
    "LikelihoodUnavailableError",
    "MapArgumentError",
    "MonotonicityError",
    "NoiseKind",
    "NonconvergenceError",
    "ObservationSpec",
    "ReferenceConfig",
    "RuntimeSettings",
    "SweepError",
    "SweepGrid",
    "TransportFilterError",
    "get_settings",
    "rng_stream",
]

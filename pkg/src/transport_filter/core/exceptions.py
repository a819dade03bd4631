"""
Exception hierarchy for transport-filter.

Library code raises these; the CLI turns them into console errors and
nonzero exit codes.
"""

from __future__ import annotations

from typing import TYPE_CHECKING, Any

if TYPE_CHECKING:
    from collections.abc import Sequence


class TransportFilterError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(TransportFilterError, ValueError):
    """Invalid experiment, filter or sweep configuration."""


class MapArgumentError(TransportFilterError, ValueError):
    """Inputs do not match what a map or component expects."""


class MonotonicityError(TransportFilterError):
    """A component has a non-positive derivative in its last variable."""

    def __init__(self, message: str, component: int | None = None) -> None:
        super().__init__(message)
        self.component = component


class InversionError(TransportFilterError):
    """One-dimensional root finding failed while inverting a triangular map."""

    def __init__(
        self,
        message: str,
        component: int,
        particles: Sequence[int] = (),
    ) -> None:
        super().__init__(message)
        self.component = component
        self.particles = tuple(int(i) for i in particles)


class InsufficientSamplesError(TransportFilterError, ValueError):
    """Too few samples for the requested parameterization."""


class FitError(TransportFilterError):
    """Map estimation failed."""

    def __init__(
        self,
        message: str,
        component: int | None = None,
        report: Any | None = None,
    ) -> None:
        super().__init__(message)
        self.component = component
        self.report = report


class NonconvergenceError(FitError):
    """An optimizer hit its iteration cap."""

    def __init__(
        self,
        message: str,
        component: int | None = None,
        report: Any | None = None,
        best_objective: float | None = None,
    ) -> None:
        super().__init__(message, component=component, report=report)
        self.best_objective = best_objective


class DensityTargetError(FitError):
    """The target log-density stayed non-finite at mapped reference points."""


class LikelihoodUnavailableError(TransportFilterError):
    """A likelihood was requested from an observation that does not expose one."""


class DegeneracyError(TransportFilterError):
    """All particle weights vanished."""


class DivergenceError(TransportFilterError):
    """A state or ensemble became non-finite."""

    def __init__(self, message: str, step: int | None = None) -> None:
        super().__init__(message)
        self.step = step


class AnalysisError(TransportFilterError):
    """An analysis step failed for a specific scalar observation."""

    def __init__(self, message: str, observation_index: int) -> None:
        super().__init__(message)
        self.observation_index = observation_index


class SweepError(TransportFilterError):
    """Every combination of a parameter sweep diverged."""

"""
transport-filter

Nonlinear ensemble filtering with monotone triangular transport maps.
"""

__version__ = "0.1.0"

from transport_filter.core.models import (
    DynamicsSpec,
    ExperimentConfig,
    FilterConfig,
    FilterKind,
    ObservationSpec,
    SweepGrid,
)
from transport_filter.estimation.fit import MapParameterization, fit_map
from transport_filter.estimation.sparsity import SparsityPattern
from transport_filter.transport.maps import TriangularMap

__all__ = [
    "DynamicsSpec",
    "ExperimentConfig",
    "FilterConfig",
    "FilterKind",
    "MapParameterization",
    "ObservationSpec",
    "SparsityPattern",
    "SweepGrid",
    "TriangularMap",
    "fit_map",
]

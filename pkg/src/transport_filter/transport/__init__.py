"""Basis functions and monotone triangular maps."""

from transport_filter.transport.basis import (
    BasisFunction,
    BasisKind,
    UnivariateFunction,
    monotone_bases,
    nonmonotone_bases,
    select_centers_scales,
)
from transport_filter.transport.maps import MapComponent, TriangularMap, dumps_map, loads_map

__all__ = [
    "BasisFunction",
    "BasisKind",
    "MapComponent",
    "TriangularMap",
    "UnivariateFunction",
    "dumps_map",
    "loads_map",
    "monotone_bases",
    "nonmonotone_bases",
    "select_centers_scales",
]

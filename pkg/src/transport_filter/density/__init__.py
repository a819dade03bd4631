"""Maps estimated against unnormalized target densities."""

from transport_filter.density.fit import (
    DensityFitReport,
    fit_map_from_density,
    fit_scalar_rearrangement,
)
from transport_filter.density.targets import CdfGrid, UnnormalizedLogDensity, default_grid

__all__ = [
    "CdfGrid",
    "DensityFitReport",
    "UnnormalizedLogDensity",
    "default_grid",
    "fit_map_from_density",
    "fit_scalar_rearrangement",
]

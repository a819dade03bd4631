"""Analysis steps: map filters, EnKF and SIR."""

from transport_filter.filters.deterministic import (
    deterministic_local_analysis,
    deterministic_map_analysis,
)
from transport_filter.filters.enkf import enkf_analysis, kalman_gain
from transport_filter.filters.ensemble import Ensemble, gaspari_cohn, inflate
from transport_filter.filters.particle import SirUpdate, sir_step, systematic_resample
from transport_filter.filters.sequential import scalar_analysis, sequential_assimilate
from transport_filter.filters.stochastic_map import stochastic_map_analysis

__all__ = [
    "Ensemble",
    "SirUpdate",
    "deterministic_local_analysis",
    "deterministic_map_analysis",
    "enkf_analysis",
    "gaspari_cohn",
    "inflate",
    "kalman_gain",
    "scalar_analysis",
    "sequential_assimilate",
    "sir_step",
    "stochastic_map_analysis",
    "systematic_resample",
]

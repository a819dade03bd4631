"""Twin experiments, metrics, sweeps and output files."""

from transport_filter.harness import metrics
from transport_filter.harness.experiment import (
    AssimilationRecord,
    ExperimentResult,
    ExperimentSummary,
    run_twin_experiment,
    simulate_truth,
)
from transport_filter.harness.presets import PresetRegistry, load_preset, load_sweep_grid
from transport_filter.harness.sweep import SweepResult, run_sweep

__all__ = [
    "AssimilationRecord",
    "ExperimentResult",
    "ExperimentSummary",
    "PresetRegistry",
    "SweepResult",
    "load_preset",
    "load_sweep_grid",
    "metrics",
    "run_sweep",
    "run_twin_experiment",
    "simulate_truth",
]

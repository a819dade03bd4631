"""
Twin experiments.

A truth trajectory and its synthetic observations are generated from the
same model the filter uses. The filter ensemble starts from N(0, I),
spins up with an unlocalized stochastic EnKF and then runs the
configured analysis; metrics are recorded for every test cycle and
summarized over the trailing metric window.

Random streams are keyed by (seed, cycle, purpose), so a run is fully
reproducible from its config.
"""

from __future__ import annotations

import logging
import time
from collections.abc import Callable
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np
from numpy.typing import NDArray

from transport_filter.core.exceptions import (
    AnalysisError,
    DegeneracyError,
    DivergenceError,
    FitError,
    InversionError,
    MonotonicityError,
)
from transport_filter.core.models import ExperimentConfig, FilterKind
from transport_filter.core.random import rng_stream
from transport_filter.dynamics.lorenz import propagate, trajectory
from transport_filter.dynamics.observations import make_noise, observe, scalar_observations
from transport_filter.filters.enkf import enkf_analysis
from transport_filter.filters.ensemble import Ensemble
from transport_filter.filters.particle import sir_step
from transport_filter.filters.sequential import scalar_analysis, sequential_assimilate
from transport_filter.harness import metrics

logger = logging.getLogger(__name__)

RUN_FAILURES = (
    DivergenceError,
    FitError,
    InversionError,
    AnalysisError,
    MonotonicityError,
    DegeneracyError,
)

ProgressCallback = Callable[[int, int], None]


@dataclass
class AssimilationRecord:
    """Metrics of one test-phase analysis ensemble."""

    step: int
    rmse: float
    spread: float
    coverage_hits: int
    dimension: int
    crps: float
    wall_time: float
    ess: float | None = None
    mean_error: float | None = None
    covariance_error: float | None = None

    @property
    def coverage_fraction(self) -> float:
        return self.coverage_hits / self.dimension

    def to_dict(self) -> dict[str, Any]:
        return {
            "step": self.step,
            "rmse": self.rmse,
            "spread": self.spread,
            "coverage_frac": self.coverage_fraction,
            "crps": self.crps,
            "coverage_hits": self.coverage_hits,
            "wall_time": self.wall_time,
            "ess": self.ess,
            "mean_error": self.mean_error,
            "covariance_error": self.covariance_error,
        }


@dataclass
class ExperimentSummary:
    """Time averages over the trailing metric window."""

    defined: bool
    window: int = 0
    mean_rmse: float = float("nan")
    median_rmse: float = float("nan")
    mean_spread: float = float("nan")
    coverage: float = float("nan")
    mean_crps: float = float("nan")
    climatological_spread: float = float("nan")
    mean_error: float | None = None
    covariance_error: float | None = None
    diverged: bool = False
    divergence_step: int | None = None
    wall_time: float = 0.0

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


@dataclass
class ExperimentResult:
    """Records, summary and the config that produced them."""

    config: ExperimentConfig
    records: list[AssimilationRecord] = field(default_factory=list)
    summary: ExperimentSummary = field(default_factory=lambda: ExperimentSummary(defined=False))
    error: str | None = None

    @property
    def diverged(self) -> bool:
        return self.summary.diverged

    def to_dict(self) -> dict[str, Any]:
        return {
            "config": self.config.model_dump(mode="json"),
            "summary": self.summary.to_dict(),
            "error": self.error,
        }


def simulate_truth(
    config: ExperimentConfig, cycles: int
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """
    Truth states at cycles 0..cycles and observations at cycles 1..cycles.

    Returns arrays of shape (cycles + 1, n) and (cycles, d).
    """
    spec = config.dynamics
    start = rng_stream(config.seed, 0, "truth-init").standard_normal(spec.dimension)
    states = trajectory(
        spec, start, cycles, lambda k: rng_stream(config.seed, k, "truth-noise")
    )
    noise = make_noise(config.observation)
    observations = np.array(
        [
            observe(config.observation, states[k], rng_stream(config.seed, k, "obs"), noise)
            for k in range(1, cycles + 1)
        ]
    ).reshape(cycles, len(config.observed_indices))
    return states, observations


def _perturbed(
    config: ExperimentConfig, states: NDArray[np.float64], step: int
) -> NDArray[np.float64]:
    indices = list(config.observed_indices)
    noise = make_noise(config.observation)
    draws = noise.sample(rng_stream(config.seed, step, "perturb"), (states.shape[0], len(indices)))
    return states[:, indices] + draws


def _analyze(
    config: ExperimentConfig,
    states: NDArray[np.float64],
    y: NDArray[np.float64],
    step: int,
    spinup: bool,
    workers: int | None,
) -> tuple[NDArray[np.float64], float | None]:
    """Analysis ensemble and, for particle filters, the effective sample size."""
    filter_config = config.filter
    spec = config.dynamics
    indices = config.observed_indices

    if spinup or filter_config.kind == FilterKind.ENKF:
        ensemble = Ensemble(states, simulated_obs=_perturbed(config, states, step))
        radius = None if spinup else filter_config.enkf_radius
        analysis = enkf_analysis(
            ensemble, y, indices,
            inflation=filter_config.inflation, radius=radius, distance=spec.distance,
        )
        return analysis.states, None

    observations = scalar_observations(
        config.observation, y, spec.dimension, filter_config.kind.requires_likelihood
    )
    if filter_config.kind == FilterKind.SIR:
        update = sir_step(Ensemble(states), observations, rng_stream(config.seed, step, "resample"))
        return update.ensemble.states, update.ess

    analysis_fn = scalar_analysis(
        filter_config,
        spec.distance,
        lambda obs: rng_stream(config.seed, step, f"perturb-{obs.index}"),
        workers,
    )
    return sequential_assimilate(Ensemble(states), observations, analysis_fn).states, None


def _check_finite(states: NDArray[np.float64], step: int) -> None:
    if not np.all(np.isfinite(states)):
        raise DivergenceError(f"ensemble became non-finite at cycle {step}", step=step)


def _summarize(
    config: ExperimentConfig,
    records: list[AssimilationRecord],
    truth: NDArray[np.float64],
    diverged_at: int | None,
    wall_time: float,
) -> ExperimentSummary:
    climatology = metrics.climatological_spread(truth) if truth.shape[0] > 1 else float("nan")
    if not records:
        return ExperimentSummary(
            defined=False,
            climatological_spread=climatology,
            diverged=diverged_at is not None,
            divergence_step=diverged_at,
            wall_time=wall_time,
        )
    window = records[-config.metric_window:] if config.metric_window else records
    rmse = np.array([r.rmse for r in window])
    errors = [r.mean_error for r in window if r.mean_error is not None]
    cov_errors = [r.covariance_error for r in window if r.covariance_error is not None]
    return ExperimentSummary(
        defined=True,
        window=len(window),
        mean_rmse=float(rmse.mean()),
        median_rmse=float(np.median(rmse)),
        mean_spread=float(np.mean([r.spread for r in window])),
        coverage=float(np.mean([r.coverage_fraction for r in window])),
        mean_crps=float(np.mean([r.crps for r in window])),
        climatological_spread=climatology,
        mean_error=float(np.mean(errors)) if errors else None,
        covariance_error=float(np.mean(cov_errors)) if cov_errors else None,
        diverged=diverged_at is not None,
        divergence_step=diverged_at,
        wall_time=wall_time,
    )


def run_twin_experiment(
    config: ExperimentConfig,
    *,
    workers: int | None = None,
    progress: ProgressCallback | None = None,
) -> ExperimentResult:
    """
    Run spin-up and test phases and summarize the test records.

    Filter failures (divergence, fit, inversion) stop the run; the result
    keeps the records gathered so far and is flagged as diverged.
    """
    started = time.perf_counter()
    spec = config.dynamics
    total = config.spinup_steps + config.test_steps
    truth, observations = simulate_truth(config, total)

    states = rng_stream(config.seed, 0, "ensemble-init").standard_normal(
        (config.ensemble_size, spec.dimension)
    )
    reference = None
    if config.reference is not None:
        reference = rng_stream(config.seed, 0, "reference-init").standard_normal(
            (config.reference.ensemble_size, spec.dimension)
        )

    records: list[AssimilationRecord] = []
    diverged_at: int | None = None
    error: str | None = None
    logger.info(
        "%s: spin-up for %d cycles, then %s for %d cycles",
        config.name, config.spinup_steps, config.filter.kind.value, config.test_steps,
    )
    for step in range(1, total + 1):
        spinup = step <= config.spinup_steps
        if step == config.spinup_steps + 1:
            logger.info("%s: switching to %s", config.name, config.filter.kind.value)
        step_started = time.perf_counter()
        try:
            states = propagate(spec, states, rng_stream(config.seed, step, "forecast"))
            _check_finite(states, step)
            states, ess = _analyze(config, states, observations[step - 1], step, spinup, workers)
            _check_finite(states, step)
            if reference is not None and not spinup:
                reference = propagate(spec, reference, rng_stream(config.seed, step, "reference-forecast"))
                reference = sir_step(
                    Ensemble(reference),
                    scalar_observations(config.observation, observations[step - 1], spec.dimension),
                    rng_stream(config.seed, step, "reference-resample"),
                ).ensemble.states
        except RUN_FAILURES as exc:
            diverged_at = step
            error = f"{type(exc).__name__}: {exc}"
            logger.info("%s: filter failed at cycle %d (%s)", config.name, step, error)
            break

        if spinup:
            continue
        stats = metrics.ensemble_statistics(states, truth[step])
        record = AssimilationRecord(
            step=step,
            rmse=stats["rmse"],
            spread=stats["spread"],
            coverage_hits=int(stats["coverage_hits"]),
            dimension=spec.dimension,
            crps=stats["crps"],
            wall_time=time.perf_counter() - step_started,
            ess=ess,
        )
        if reference is not None:
            record.mean_error = metrics.mean_error(states.mean(axis=0), reference.mean(axis=0))
            record.covariance_error = metrics.covariance_error(
                np.cov(states, rowvar=False), np.cov(reference, rowvar=False)
            )
        records.append(record)
        if progress is not None:
            progress(step - config.spinup_steps, config.test_steps)

    test_truth = truth[config.spinup_steps + 1 :]
    summary = _summarize(config, records, test_truth, diverged_at, time.perf_counter() - started)
    return ExperimentResult(config, records, summary, error)

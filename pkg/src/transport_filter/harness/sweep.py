"""Grid sweeps over filter tuning parameters."""

from __future__ import annotations

import logging
import math
from collections.abc import Callable
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Any

import pandas as pd

from transport_filter.core.exceptions import SweepError
from transport_filter.core.models import ExperimentConfig, SweepGrid
from transport_filter.core.settings import get_settings
from transport_filter.harness.experiment import run_twin_experiment

logger = logging.getLogger(__name__)

SUMMARY_COLUMNS = [
    "mean_rmse",
    "median_rmse",
    "mean_spread",
    "coverage",
    "mean_crps",
    "climatological_spread",
    "diverged",
    "divergence_step",
    "wall_time",
]


@dataclass
class SweepResult:
    """Full table, one row per grid point, and the selected row."""

    table: pd.DataFrame
    best_overrides: dict[str, Any]
    best_config: ExperimentConfig

    @property
    def best_rmse(self) -> float:
        return float(self.table.loc[self.table["best"], "mean_rmse"].iloc[0])


def _run_combination(base: ExperimentConfig, overrides: dict[str, Any]) -> dict[str, Any]:
    config = base.with_overrides(overrides)
    # each worker process fits maps serially
    result = run_twin_experiment(config, workers=1)
    summary = result.summary.to_dict()
    return {**overrides, **{key: summary[key] for key in SUMMARY_COLUMNS}}


def _tie_key(row: dict[str, Any]) -> tuple[float, float, float]:
    # EnKF grids sweep the taper half-width instead of the map radius
    radius = row["radius"] if "radius" in row else row.get("enkf_radius")
    inflation = row.get("inflation")
    return (
        row["mean_rmse"],
        math.inf if radius is None else float(radius),
        math.inf if inflation is None else float(inflation),
    )


def run_sweep(
    base: ExperimentConfig,
    grid: SweepGrid,
    *,
    workers: int | None = None,
    on_result: Callable[[dict[str, Any]], None] | None = None,
) -> SweepResult:
    """
    Run every grid combination and pick the lowest time-averaged RMSE.

    Ties go to the smaller radius (a dense map counts as infinite, and EnKF
    grids use ``enkf_radius``), then the smaller inflation. Diverged runs
    are kept in the table but never selected.
    """
    combinations = grid.combinations()
    # invalid grid points fail before anything runs
    for overrides in combinations:
        base.with_overrides(overrides)
    workers = get_settings().workers if workers is None else workers
    logger.info("sweep %s: %d combinations on %d workers", base.name, len(combinations), workers)

    rows: list[dict[str, Any]] = []
    if workers > 1 and len(combinations) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_combination, base, o) for o in combinations]
            for future in futures:
                rows.append(future.result())
                if on_result is not None:
                    on_result(rows[-1])
    else:
        for overrides in combinations:
            rows.append(_run_combination(base, overrides))
            if on_result is not None:
                on_result(rows[-1])

    candidates = [
        (i, row) for i, row in enumerate(rows)
        if not row["diverged"] and math.isfinite(row["mean_rmse"])
    ]
    if not candidates:
        raise SweepError(f"all {len(rows)} sweep combinations diverged")
    best_index, best_row = min(candidates, key=lambda item: _tie_key(item[1]))

    table = pd.DataFrame(rows)
    table["best"] = [i == best_index for i in range(len(rows))]
    best_overrides = {key: best_row[key] for key in grid.axes()}
    logger.info("sweep %s: best %s with mean RMSE %.4f", base.name, best_overrides, best_row["mean_rmse"])
    return SweepResult(table, best_overrides, base.with_overrides(best_overrides))

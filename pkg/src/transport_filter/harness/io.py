"""CSV and JSON output of runs, sweeps, maps and trajectories."""

from __future__ import annotations

from pathlib import Path
from typing import Any

import numpy as np
import orjson
import pandas as pd
from numpy.typing import NDArray

from transport_filter.core.exceptions import MapArgumentError
from transport_filter.estimation.fit import FitReport
from transport_filter.harness.experiment import ExperimentResult
from transport_filter.harness.sweep import SweepResult
from transport_filter.transport.maps import TriangularMap, dumps_map

RECORD_COLUMNS = ["step", "rmse", "spread", "coverage_frac", "crps"]
FLOAT_FORMAT = "%.17g"
JSON_OPTIONS = orjson.OPT_INDENT_2 | orjson.OPT_SERIALIZE_NUMPY | orjson.OPT_NON_STR_KEYS


def write_json(payload: Any, path: Path | str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(orjson.dumps(payload, option=JSON_OPTIONS))
    return path


def records_frame(result: ExperimentResult) -> pd.DataFrame:
    """One row per test cycle; diagnostics columns only when populated."""
    frame = pd.DataFrame([r.to_dict() for r in result.records])
    if frame.empty:
        return pd.DataFrame(columns=RECORD_COLUMNS)
    extra = [c for c in ("ess", "mean_error", "covariance_error") if frame[c].notna().any()]
    return frame[RECORD_COLUMNS + extra]


def write_run(result: ExperimentResult, out_dir: Path | str) -> tuple[Path, Path]:
    """Write ``<name>_records.csv`` and ``<name>_summary.json``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    name = result.config.name
    records_path = out / f"{name}_records.csv"
    records_frame(result).to_csv(records_path, index=False, float_format=FLOAT_FORMAT)
    summary_path = write_json(result.to_dict(), out / f"{name}_summary.json")
    return records_path, summary_path


def write_sweep(result: SweepResult, out_dir: Path | str, name: str) -> tuple[Path, Path]:
    """Write the sweep table and the selected configuration."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    table_path = out / f"{name}_sweep.csv"
    result.table.to_csv(table_path, index=False, float_format=FLOAT_FORMAT)
    best_path = write_json(
        {
            "best_overrides": result.best_overrides,
            "best_rmse": result.best_rmse,
            "config": result.best_config.model_dump(mode="json"),
        },
        out / f"{name}_best.json",
    )
    return table_path, best_path


def write_map(transport_map: TriangularMap, path: Path | str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(dumps_map(transport_map))
    return path


def write_fit_report(report: FitReport, map_path: Path | str) -> Path:
    """Write ``report`` next to the map at ``map_path`` as ``<stem>.report.json``."""
    map_path = Path(map_path)
    return write_json(report.to_dict(), map_path.with_name(f"{map_path.stem}.report.json"))


def write_trajectory(states: NDArray[np.float64], path: Path | str) -> Path:
    """Long-format ``step,component,value`` CSV of a (steps, n) trajectory."""
    matrix = np.atleast_2d(np.asarray(states, dtype=float))
    steps, n = matrix.shape
    frame = pd.DataFrame(
        {
            "step": np.repeat(np.arange(steps), n),
            "component": np.tile(np.arange(n), steps),
            "value": matrix.ravel(),
        }
    )
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    return path


def read_samples(path: Path | str) -> NDArray[np.float64]:
    """
    Sample matrix (M, n) from a CSV with or without a header row.

    Lines starting with ``#`` are ignored.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Samples file not found: {path}")
    first = pd.read_csv(path, header=None, comment="#", nrows=1)
    has_header = bool(pd.to_numeric(first.iloc[0], errors="coerce").isna().any())
    frame = pd.read_csv(
        path, header=0 if has_header else None, comment="#", float_precision="round_trip"
    )
    try:
        samples = frame.apply(pd.to_numeric).to_numpy(dtype=float)
    except ValueError as exc:
        raise MapArgumentError(f"{path}: non-numeric sample values") from exc
    if samples.shape[0] < 2:
        raise MapArgumentError(f"{path}: need at least two samples")
    return samples

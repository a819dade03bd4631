"""
Command-line interface for transport-filter.

Runs twin experiments and parameter sweeps, estimates transport maps
from sample files and dumps truth trajectories.
"""

from __future__ import annotations

import logging
import sys
from pathlib import Path

import click
from rich.console import Console
from rich.logging import RichHandler
from rich.panel import Panel
from rich.progress import BarColumn, Progress, SpinnerColumn, TextColumn
from rich.table import Table

from transport_filter import __version__
from transport_filter.core.exceptions import SweepError, TransportFilterError
from transport_filter.core.models import DiagonalMode, ExperimentConfig, SweepGrid
from transport_filter.core.settings import get_settings
from transport_filter.estimation.fit import MapParameterization, fit_map
from transport_filter.estimation.sparsity import (
    UndirectedGraph,
    distance_sparsity,
    graph_sparsity,
    line_distance,
)
from transport_filter.harness.experiment import run_twin_experiment, simulate_truth
from transport_filter.harness.io import (
    read_samples,
    write_fit_report,
    write_map,
    write_run,
    write_sweep,
    write_trajectory,
)
from transport_filter.harness.presets import PresetRegistry
from transport_filter.harness.sweep import run_sweep

console = Console()


def _configure_logging(verbose: bool) -> None:
    level = logging.DEBUG if verbose else get_settings().log_level.upper()
    logging.basicConfig(
        level=level,
        format="%(message)s",
        handlers=[RichHandler(console=Console(stderr=True), show_path=False)],
        force=True,
    )


def _load_config(config: str | None, preset: str | None) -> ExperimentConfig:
    if bool(config) == bool(preset):
        console.print("[red]Error: give exactly one of --config or --preset[/red]")
        sys.exit(1)
    try:
        if config:
            return ExperimentConfig.from_yaml(config)
        return PresetRegistry().get(preset).config()  # type: ignore[arg-type]
    except (TransportFilterError, FileNotFoundError) as e:
        console.print(f"[red]Error: {e}[/red]")
        sys.exit(1)


def _summary_table(title: str, summary: dict[str, object]) -> Table:
    table = Table(title=title)
    table.add_column("Metric", style="bold")
    table.add_column("Value", justify="right")
    for key, value in summary.items():
        shown = f"{value:.6g}" if isinstance(value, float) else str(value)
        table.add_row(key, shown)
    return table


@click.group()
@click.version_option(version=__version__, prog_name="transport-filter")
@click.option("--verbose", "-v", is_flag=True, help="Enable debug logging")
@click.pass_context
def cli(ctx, verbose):
    """
    Nonlinear ensemble filtering with triangular transport maps.

    Stochastic and deterministic map filters, EnKF and particle filter
    baselines, on Lorenz-63 and Lorenz-96 twin experiments.
    """
    ctx.ensure_object(dict)
    ctx.obj["verbose"] = verbose
    _configure_logging(verbose)


# =============================================================================
# Experiment Commands
# =============================================================================

@cli.command("run")
@click.option("--config", "-c", "config_path", type=click.Path(exists=True), help="Experiment YAML")
@click.option("--preset", "-p", help="Bundled preset name")
@click.option("--out", "-o", "out_dir", type=click.Path(), required=True, help="Output directory")
@click.option("--workers", "-w", type=int, help="Worker threads for map fitting")
def run_command(config_path: str | None, preset: str | None, out_dir: str, workers: int | None):
    """
    Run one twin experiment.

    Writes per-cycle records as CSV and the summary as JSON. Exits with
    status 1 when the filter diverges.
    """
    config = _load_config(config_path, preset)

    with Progress(
        SpinnerColumn(),
        TextColumn("[progress.description]{task.description}"),
        BarColumn(),
        console=console,
    ) as progress:
        task = progress.add_task(f"Running {config.name}...", total=config.test_steps or None)
        result = run_twin_experiment(
            config,
            workers=workers,
            progress=lambda done, _total: progress.update(task, completed=done),
        )

    records_path, summary_path = write_run(result, out_dir)
    console.print(_summary_table(f"Experiment: {config.name}", result.summary.to_dict()))
    console.print(f"\nRecords: {records_path}\nSummary: {summary_path}")

    if result.diverged:
        console.print(Panel(result.error or "diverged", title="Filter failed", style="red"))
        sys.exit(1)


@cli.command("sweep")
@click.option("--config", "-c", "config_path", type=click.Path(exists=True), help="Experiment YAML")
@click.option("--preset", "-p", help="Bundled preset name")
@click.option("--grid", "-g", "grid_path", type=click.Path(exists=True), help="Sweep grid YAML")
@click.option("--grid-name", help="Bundled sweep grid (defaults to the preset's grid)")
@click.option("--out", "-o", "out_dir", type=click.Path(), required=True, help="Output directory")
@click.option("--workers", "-w", type=int, help="Worker processes")
def sweep_command(
    config_path: str | None,
    preset: str | None,
    grid_path: str | None,
    grid_name: str | None,
    out_dir: str,
    workers: int | None,
):
    """Tune filter parameters over a grid by time-averaged RMSE."""
    config = _load_config(config_path, preset)
    registry = PresetRegistry()
    try:
        if grid_path:
            grid = SweepGrid.from_yaml(grid_path)
        else:
            default = registry.get(preset).sweep if preset else None
            grid = registry.sweep_grid(grid_name or default or "default")
    except TransportFilterError as e:
        console.print(f"[red]Error: {e}[/red]")
        sys.exit(1)

    with Progress(
        SpinnerColumn(),
        TextColumn("[progress.description]{task.description}"),
        BarColumn(),
        console=console,
    ) as progress:
        task = progress.add_task(f"Sweeping {len(grid)} combinations...", total=len(grid))
        try:
            result = run_sweep(
                config, grid, workers=workers, on_result=lambda _row: progress.advance(task)
            )
        except SweepError as e:
            console.print(f"[red]Error: {e}[/red]")
            sys.exit(1)

    table_path, best_path = write_sweep(result, out_dir, config.name)

    table = Table(title=f"Sweep: {config.name}")
    for column in grid.axes():
        table.add_column(column)
    table.add_column("mean RMSE", justify="right")
    table.add_column("diverged")
    for _, row in result.table.iterrows():
        style = "bold green" if row["best"] else None
        table.add_row(
            *[str(row[c]) for c in grid.axes()],
            f"{row['mean_rmse']:.5f}",
            str(row["diverged"]),
            style=style,
        )
    console.print(table)
    console.print(f"\nTable: {table_path}\nBest: {best_path}")


@cli.command("simulate")
@click.option("--config", "-c", "config_path", type=click.Path(exists=True), help="Experiment YAML")
@click.option("--preset", "-p", help="Bundled preset name")
@click.option("--cycles", "-n", type=int, default=1000, show_default=True, help="Observation cycles")
@click.option("--out", "-o", "out_path", type=click.Path(), required=True, help="Output CSV")
def simulate_command(config_path: str | None, preset: str | None, cycles: int, out_path: str):
    """Dump the truth trajectory of an experiment as step,component,value CSV."""
    config = _load_config(config_path, preset)
    try:
        states, _ = simulate_truth(config, cycles)
    except TransportFilterError as e:
        console.print(f"[red]Error: {e}[/red]")
        sys.exit(1)
    path = write_trajectory(states, out_path)
    console.print(f"[green]Wrote {states.shape[0]} states to {path}[/green]")


@cli.command("presets")
def presets_command():
    """List bundled experiment presets."""
    registry = PresetRegistry()

    table = Table(title="Bundled presets")
    table.add_column("Name", style="bold")
    table.add_column("Dynamics")
    table.add_column("Filter")
    table.add_column("Description")
    for definition in registry.all_presets():
        config = definition.config()
        table.add_row(
            definition.name,
            f"{config.dynamics.kind.value} (n={config.dynamics.dimension})",
            config.filter.kind.value,
            definition.description or "",
        )
    console.print(table)


# =============================================================================
# Map Estimation
# =============================================================================

@cli.command("estimate-map")
@click.option("--samples", "-s", "samples_path", type=click.Path(exists=True), required=True,
              help="CSV of samples, one row per sample")
@click.option("--p", "p", type=int, default=0, show_default=True, help="RBFs per non-monotone input")
@click.option("--gamma", type=float, default=2.0, show_default=True, help="RBF width factor")
@click.option("--diagonal", type=click.Choice([m.value for m in DiagonalMode]),
              default=DiagonalMode.FIRST.value, show_default=True,
              help="Components with a nonlinear monotone term")
@click.option("--radius", "-r", type=float,
              help="Keep inputs within this index distance of each component (dense if omitted)")
@click.option("--graph", "graph_path", type=click.Path(exists=True),
              help="Edge list (1-based 'i j' pairs) of the conditional independence graph")
@click.option("--out", "-o", "out_path", type=click.Path(), required=True, help="Output JSON")
def estimate_map_command(
    samples_path: str,
    p: int,
    gamma: float,
    diagonal: str,
    radius: float | None,
    graph_path: str | None,
    out_path: str,
):
    """
    Fit a triangular map pushing the samples to a standard normal.

    Writes the map to OUT and the fit report beside it as <stem>.report.json.
    """
    if radius is not None and graph_path:
        console.print("[red]Error: --radius and --graph are mutually exclusive[/red]")
        sys.exit(1)
    try:
        samples = read_samples(samples_path)
        n = samples.shape[1]
        if graph_path:
            sparsity = graph_sparsity(UndirectedGraph.from_edge_file(graph_path, n))
        else:
            sparsity = distance_sparsity(line_distance, n, radius)
        parameterization = MapParameterization(p=p, gamma=gamma, diagonal=DiagonalMode(diagonal))
        transport_map, report = fit_map(samples, parameterization, sparsity)
    except TransportFilterError as e:
        console.print(f"[red]Error: {e}[/red]")
        sys.exit(1)

    path = write_map(transport_map, out_path)
    report_path = write_fit_report(report, path)

    table = Table(title=f"Map fit: {Path(samples_path).name}")
    table.add_column("Component", justify="right")
    table.add_column("Inputs")
    table.add_column("Objective", justify="right")
    table.add_column("Solver")
    for component, fit in zip(transport_map.components, report.components, strict=True):
        table.add_row(
            str(component.index),
            ", ".join(str(i) for i in component.active_inputs),
            f"{fit.objective:.6f}",
            "closed form" if fit.used_closed_form else f"Newton ({fit.iterations})",
        )
    console.print(table)
    console.print(f"\nTotal objective {report.objective:.6f}; map written to {path}")
    console.print(f"Fit report written to {report_path}")


# =============================================================================
# Main Entry Point
# =============================================================================

def main():
    """Main entry point."""
    cli(obj={})


if __name__ == "__main__":
    main()

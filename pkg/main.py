#!/usr/bin/env python3
"""
Main CLI interface for the segmented atom-light simulator.
"""
import sys
from pathlib import Path
from typing import Optional

import click
from rich.table import Table

from src.config import ScenarioConfig, load_config
from src.errors import SimulatorError
from src.experiments import SCENARIOS, acceptance_checks, run_scenario, write_series
from src.physics import whole_system_t0
from src.scheduler import run as run_config
from src.utils import console, format_seconds, setup_logging

DEFAULT_OUTPUT_DIR = Path("results")


def _load(config_path: Optional[Path]) -> ScenarioConfig:
    return load_config(config_path) if config_path is not None else ScenarioConfig()


def _summary(config: ScenarioConfig) -> None:
    t0 = whole_system_t0(config.species(), config.beam_params(), config.atoms.number)
    console.print(f"  Atoms: {config.atoms.number:.3g} at {config.atoms.temperature * 1e6:.3g} uK")
    console.print(f"  Photon flux: {config.beam.photon_flux:.3g} /s, detuning {config.beam.detuning_hz / 1e9:.3g} GHz")
    console.print(f"  t0: {format_seconds(t0)}")


@click.group()
@click.option("-v", "--verbose", count=True, help="Repeat for more log output")
def cli(verbose: int):
    """Segmented atom-light simulator: spin squeezing from Gaussian covariance dynamics."""
    setup_logging(verbose)


@cli.command("run")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help="Scenario configuration (JSON); defaults apply without one")
@click.option("--scenario", type=click.Choice(SCENARIOS), help="Preset study; omit to run the config as is")
@click.option("--output", type=click.Path(dir_okay=False, path_type=Path), help="CSV output path")
@click.option("--tau", type=float, help="Time step in seconds (overrides the config)")
@click.option("--steps", type=int, help="Number of steps (overrides the config)")
def run_command(config_path, scenario, output, tau, steps):
    """Run a configuration or a preset scenario and write the squeezing series."""
    try:
        config = _load(config_path)
        overrides = {}
        if tau is not None:
            overrides["tau"] = tau
        if steps is not None:
            overrides["total_steps"] = steps
        if overrides:
            config = config.updated(**overrides)

        console.rule(f"[bold]{scenario or 'single run'}")
        _summary(config)
        if scenario:
            series = run_scenario(scenario, config)
        else:
            series = [run_config(config)]

        output = output or config.output or DEFAULT_OUTPUT_DIR / f"{scenario or 'run'}.csv"
        path = write_series(series, output)
    except SimulatorError as exc:
        console.print(f"[red]Error:[/red] {exc}")
        sys.exit(1)

    for s in series:
        best = min(s.samples, key=lambda sample: sample.xi2_total)
        console.print(
            f"  {s.label}: {len(s.samples)} samples, min xi2 = {best.xi2_total:.4f} at t/t0 = {best.t_over_t0:.3g}"
        )
    console.print(f"\n[green]✓[/green] Series saved to: {path}")


@cli.command("check")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help="Base configuration (JSON)")
@click.option("--total-time", type=float, default=4.0, show_default=True,
              help="Run length of the dynamic checks, in units of t0")
def check_command(config_path, total_time):
    """Run the quick acceptance checks."""
    try:
        config = _load(config_path).updated(total_time=total_time, total_steps=None)
        console.rule("[bold]acceptance checks")
        results = acceptance_checks(config)
    except SimulatorError as exc:
        console.print(f"[red]Error:[/red] {exc}")
        sys.exit(1)

    table = Table()
    table.add_column("check")
    table.add_column("result")
    table.add_column("detail")
    for result in results:
        table.add_row(result.name, "[green]ok" if result.passed else "[red]FAILED", result.detail)
    console.print(table)
    if not all(r.passed for r in results):
        sys.exit(1)


def main():
    """Main CLI entry point."""
    cli()


if __name__ == "__main__":
    main()

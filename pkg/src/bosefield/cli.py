"""Command-line interface."""

import json
import sys
from functools import wraps
from pathlib import Path
from typing import Any, Callable

import click
from loguru import logger
from pydantic import ValidationError

from bosefield.exceptions import (
    BFBaseException,
    BFConvergenceError,
    BFFileExists,
    BFInvalidParameter,
    BFIOError,
    BFNumericalError,
)
from bosefield.loggers import setup_logging

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2
EXIT_IO = 3


def exit_code_for(error: BaseException) -> int:
    """Map an exception to the process exit status."""
    if isinstance(error, (BFInvalidParameter, ValidationError)):
        return EXIT_CONFIG
    if isinstance(error, (BFIOError, BFFileExists, OSError)):
        return EXIT_IO
    return EXIT_NUMERICAL


def _diagnostic(error: BaseException) -> dict[str, Any]:
    diagnostic: dict[str, Any] = {
        "error": type(error).__name__,
        "message": str(error),
        "exit_code": exit_code_for(error),
    }
    if isinstance(error, BFConvergenceError) and error.residuals:
        diagnostic["last_residuals"] = error.residuals[-10:]
    return diagnostic


def handle_errors(func: Callable) -> Callable:
    """Turn package errors into a JSON diagnostic on stderr and an exit status."""

    @wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except (BFBaseException, ValidationError, OSError) as e:
            logger.debug("Command failed: {!r}", e)
            click.echo(json.dumps(_diagnostic(e)), err=True)
            sys.exit(exit_code_for(e))

    return wrapper


def _parse_temperatures(value: str | None) -> list[float] | None:
    if value is None:
        return None
    try:
        return [float(item) for item in value.split(",") if item.strip()]
    except ValueError as e:
        msg = f"--temps must be a comma-separated list of numbers, got {value!r}"
        raise BFInvalidParameter(msg) from e


def _load(config_file: Path, out: Path | None, seed: int | None, chains: int | None):
    from bosefield.config import RunConfig

    return RunConfig.from_file(config_file).with_overrides(
        **{"output.directory": out, "sampler.base_seed": seed, "sampler.n_chains": chains}
    )


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Enable debug logging.")
@click.option(
    "--log-file",
    type=click.Path(path_type=Path),
    default=None,
    help="Also write the log to this file.",
)
def cli(verbose: bool, log_file: Path | None) -> None:
    """Classical-field Monte Carlo of the trapped 1D Bose gas."""
    setup_logging(filename=log_file, level="DEBUG" if verbose else "INFO")


_config_option = click.option(
    "-c",
    "--config",
    "config_file",
    required=True,
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    help="TOML run configuration.",
)
_out_option = click.option(
    "-o", "--out", type=click.Path(path_type=Path), default=None, help="Output directory."
)
_seed_option = click.option("--seed", type=int, default=None, help="Base seed of the chains.")
_chains_option = click.option("--chains", type=int, default=None, help="Number of chains.")


@cli.command()
@_config_option
@_out_option
@_seed_option
@_chains_option
@handle_errors
def run(config_file: Path, out: Path | None, seed: int | None, chains: int | None) -> None:
    """Run the full pipeline at the configured temperature."""
    from bosefield.runner import run as run_pipeline

    config = _load(config_file, out, seed, chains)
    result = run_pipeline(config)
    if "summary" in result.tables:
        result.tables["summary"].render()
    for path in result.paths:
        click.echo(str(path))


@cli.command()
@_config_option
@click.option("--temps", default=None, help="Comma-separated temperatures.")
@_out_option
@_seed_option
@_chains_option
@handle_errors
def sweep(
    config_file: Path,
    temps: str | None,
    out: Path | None,
    seed: int | None,
    chains: int | None,
) -> None:
    """Run the pipeline for every temperature of a sweep."""
    from bosefield.runner import sweep as run_sweep

    config = _load(config_file, out, seed, chains)
    result = run_sweep(config, _parse_temperatures(temps))
    result.tables["summary"].render()
    notes = result.tables["summary"].provenance.notes
    if "crossover_temperature" in notes:
        edge = " (at the edge of the sweep)" if notes["crossover_at_edge"] else ""
        click.echo(f"Variance maximum at T = {notes['crossover_temperature']:.4g}{edge}")
    for path in result.paths:
        click.echo(str(path))


@cli.command(name="ideal-ref")
@click.option("--atoms", type=int, required=True, help="Atom number N.")
@click.option("--temp", type=float, required=True, help="Temperature in hbar omega / k_B.")
@click.option("--cutoff", type=int, required=True, help="Highest classical mode K.")
@click.option("--points", type=int, default=2001, show_default=True)
@_out_option
@click.option("--format", "fmt", type=click.Choice(["tsv", "arrow"]), default="tsv")
@click.option("--overwrite", is_flag=True, default=False)
@handle_errors
def ideal_ref(
    atoms: int,
    temp: float,
    cutoff: int,
    points: int,
    out: Path | None,
    fmt: str,
    overwrite: bool,
) -> None:
    """Write exact and classical ideal-gas distributions of N_ex."""
    from bosefield.results import write_table
    from bosefield.runner import ideal_reference

    table = ideal_reference(atoms, temp, cutoff, points)
    path = write_table(table, out or Path("."), fmt, overwrite=overwrite)
    click.echo(str(path))


@cli.command()
@click.option("--atoms", type=float, required=True, help="Atom number N.")
@click.option("--coupling", type=float, required=True, help="Coupling g.")
@click.option("--temp", type=float, default=0.0, show_default=True, help="Temperature for K.")
@handle_errors
def gpe(atoms: float, coupling: float, temp: float) -> None:
    """Print the mean-field chemical potential and the resulting cutoff."""
    from bosefield.field import ModelParams
    from bosefield.gpe import (
        cutoff_for,
        ground_state_grid,
        imaginary_time_ground_state,
        thomas_fermi_mu,
    )

    params = ModelParams(atoms=atoms, coupling=coupling, temperature=0.0, cutoff=0)
    state = imaginary_time_ground_state(params, ground_state_grid(atoms, coupling))
    report: dict[str, Any] = {
        "atoms": atoms,
        "coupling": coupling,
        "mu": state.mu,
        "energy": state.energy,
        "iterations": state.iterations,
        "cutoff": cutoff_for(temp, state.mu if coupling > 0 else 0.0),
    }
    if coupling > 0:
        report["mu_thomas_fermi"] = thomas_fermi_mu(atoms, coupling)
    click.echo(json.dumps(report))


@cli.command()
@click.option("--fast", is_flag=True, default=False, help="Run reduced check sizes.")
@handle_errors
def check(fast: bool) -> None:
    """Run the oracle and invariant checks."""
    from bosefield.checks import render_checks, run_checks

    results = run_checks(fast=fast)
    render_checks(results)
    if not all(result.passed for result in results):
        failed = [r.name for r in results if not r.passed]
        msg = f"Failed checks: {', '.join(failed)}"
        raise BFNumericalError(msg)

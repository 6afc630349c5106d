"""Orchestration of runs and temperature sweeps."""

import math
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any

import numpy as np
from loguru import logger
from pydantic import Field
from typing_extensions import Annotated

from bosefield.analysis import (
    DISPLAYED_FLUCTUATION_DEFINITION,
    FLUCTUATION_DEFINITION,
    CorrelationProfile,
    accumulate_density_matrix,
    bare_occupation_series,
    crossover_temperature,
    density_fluctuation_profile,
    diagonalize,
    fwhm,
    g1_profile,
    local_fluctuation_estimate,
    occupation_series,
    occupation_statistics,
)
from bosefield.basis import BasisTable, build_basis, build_grid, synthesize_profile
from bosefield.config import RunConfig
from bosefield.exceptions import BFInvalidParameter, BFProfileError
from bosefield.field import ModelParams
from bosefield.gpe import (
    GroundState,
    cutoff_for,
    ground_state_grid,
    imaginary_time_ground_state,
    profile_distance,
    resample,
    thomas_fermi_mu,
)
from bosefield.ideal_gas import (
    IdealGasDistribution,
    cdf_distance,
    classical_excited_moments,
    classical_pnex,
    exact_condensate_moments,
    exact_pnex,
)
from bosefield.models import BoseFieldBaseModel
from bosefield.results import (
    Column,
    Provenance,
    ResultFormat,
    ResultTable,
    config_hash,
    write_table,
)
from bosefield.sampler import MoveParams, SampleStream, merge_streams, minimize_energy, run_chain
from bosefield.utils.path_utils import prepare_directory

CLASSICAL_MIN_CUTOFF = 2


class Schedule(BoseFieldBaseModel):
    """Chain schedule in proposal steps."""

    n_steps: int
    burn_in: int
    thinning: int

    @classmethod
    def from_sweeps(cls, config: RunConfig, cutoff: int) -> "Schedule":
        sweep = cutoff + 1
        sampler = config.sampler
        return cls(
            n_steps=(sampler.burn_in_sweeps + sampler.sweeps) * sweep,
            burn_in=sampler.burn_in_sweeps * sweep,
            thinning=sampler.thinning_sweeps * sweep,
        )


class TemperaturePoint(BoseFieldBaseModel):
    """Scalar results at one temperature."""

    temperature: float
    cutoff: int
    snapshots: int
    acceptance: float
    condensate_fraction: float
    condensate_fraction_error: float
    bare_condensate_fraction: float
    variance: float
    variance_error: float
    relative_fluctuation: float
    exact_condensate_fraction: float
    exact_variance: float
    classical_mean_excited: float
    classical_cdf_distance: float
    coherence_length: float
    condensate_length: float
    center_fluctuation: float
    center_fluctuation_error: float
    center_fluctuation_displayed: float


class RunResult(BoseFieldBaseModel):
    """Tables produced by a run and where they were written."""

    tables: dict[str, ResultTable]
    paths: list[Path] = []
    points: list[TemperaturePoint] = []
    ground_state: Annotated[GroundState | None, Field(description="T = 0 mean-field state")] = None


def solve_ground_state(config: RunConfig) -> GroundState:
    """Return the imaginary-time ground state at the configured (N, g)."""
    model = config.model
    params = model.params(cutoff=0, temperature=0.0)
    grid = ground_state_grid(
        model.atoms, model.coupling, config.grid.extent_factor, config.grid.oversample
    )
    return imaginary_time_ground_state(
        params, grid, config.gpe.dtau, config.gpe.tol, config.gpe.max_iterations
    )


def cutoff_from(config: RunConfig, mu: float, temperature: float) -> int:
    """Return the configured cutoff, or K = ceil(mu + T) from the mean-field mu.

    The ideal gas has no mean-field energy, so mu is taken as 0 when g = 0.
    """
    if config.model.cutoff is not None:
        return config.model.cutoff
    return cutoff_for(temperature, mu if config.model.coupling > 0 else 0.0)


def basis_for(config: RunConfig, cutoff: int) -> BasisTable:
    grid = build_grid(cutoff, config.grid.extent_factor, config.grid.oversample)
    return build_basis(cutoff, grid)


def _chain_worker(
    args: tuple[ModelParams, MoveParams, Schedule, int, BasisTable, str],
) -> SampleStream:
    params, mp, schedule, seed, basis, init = args
    return run_chain(
        params,
        mp,
        schedule.n_steps,
        schedule.burn_in,
        schedule.thinning,
        seed,
        basis=basis,
        init=init,
    )


def run_chains(config: RunConfig, params: ModelParams, basis: BasisTable) -> SampleStream:
    """Run all configured chains and merge them in seed order."""
    seeds = config.sampler.seeds()
    if not seeds:
        msg = "sampler.n_chains must be > 0 for a finite-temperature run"
        raise BFInvalidParameter(msg)
    schedule = Schedule.from_sweeps(config, params.cutoff)
    mp = config.sampler.move_params()
    tasks = [(params, mp, schedule, seed, basis, config.sampler.init.value) for seed in seeds]
    workers = min(config.worker_count(), len(tasks))
    logger.info(
        "Running {} chains of {} steps on {} workers", len(tasks), schedule.n_steps, workers
    )
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            streams = list(executor.map(_chain_worker, tasks))
    else:
        streams = [_chain_worker(task) for task in tasks]
    return merge_streams(streams)


def _safe_length(compute) -> float:
    try:
        return compute()
    except BFProfileError as e:
        logger.warning("Length not measurable: {}", e)
        return math.nan


def _provenance(config: RunConfig, started: float, **notes: Any) -> Provenance:
    from bosefield import __version__

    return Provenance(
        config_hash=config_hash(config.fingerprint()),
        version=__version__,
        wall_clock_seconds=time.perf_counter() - started,
        notes=notes,
    )


def analyze_temperature(
    config: RunConfig,
    params: ModelParams,
    basis: BasisTable,
    stream: SampleStream,
    provenance: Provenance,
    suffix: str = "",
) -> tuple[TemperaturePoint, dict[str, ResultTable]]:
    """Reduce a merged stream to the scalar results and the per-temperature tables."""
    atoms = params.atoms
    temperature = params.temperature
    rho = accumulate_density_matrix(stream)
    decomposition = diagonalize(rho)
    series = occupation_series(stream, decomposition.condensate_vector)
    stats = occupation_statistics(series, config.analysis.histogram_bins)
    bare = bare_occupation_series(stream)

    whole_atoms = max(int(round(atoms)), 1)
    exact = exact_pnex(whole_atoms, temperature)
    exact_mean, exact_variance = exact_condensate_moments(whole_atoms, temperature)
    classical = None
    classical_mean = math.nan
    if params.cutoff >= CLASSICAL_MIN_CUTOFF:
        classical = classical_pnex(
            whole_atoms, temperature, params.cutoff, config.analysis.reference_points
        )
        classical_mean, _ = classical_excited_moments(whole_atoms, temperature, params.cutoff)
    else:
        logger.warning(
            "No classical ideal-gas reference for K={} < {}", params.cutoff, CLASSICAL_MIN_CUTOFF
        )

    profile = g1_profile(stream, basis, decomposition, config.analysis.symmetric_g1)
    center = local_fluctuation_estimate(stream, basis, 0.0)
    fluctuations = density_fluctuation_profile(stream, basis)
    acceptance = float(np.mean([m.acceptance_rate for m in stream.metadata]))

    point = TemperaturePoint(
        temperature=temperature,
        cutoff=params.cutoff,
        snapshots=len(stream),
        acceptance=acceptance,
        condensate_fraction=stats.condensate_fraction,
        condensate_fraction_error=stats.condensate_fraction_error,
        bare_condensate_fraction=float(np.mean(bare.condensate)) / atoms,
        variance=stats.variance,
        variance_error=stats.variance_error,
        relative_fluctuation=stats.relative_fluctuation,
        exact_condensate_fraction=exact_mean / whole_atoms,
        exact_variance=exact_variance,
        classical_mean_excited=classical_mean,
        classical_cdf_distance=(
            cdf_distance(series.excited, classical) if classical is not None else math.nan
        ),
        coherence_length=_safe_length(profile.coherence_length),
        condensate_length=_safe_length(profile.condensate_length),
        center_fluctuation=center.value,
        center_fluctuation_error=center.error,
        center_fluctuation_displayed=center.displayed_form,
    )

    edges = stats.histogram_edges
    widths = np.diff(edges)
    centers = 0.5 * (edges[:-1] + edges[1:])
    exact_binned = np.histogram(exact.support, bins=edges, weights=exact.probabilities)[0]
    classical_density, classical_printed = _classical_columns(classical, edges)
    tables = {
        f"occupation_histogram{suffix}": ResultTable.from_columns(
            f"occupation_histogram{suffix}",
            [
                (Column(name="n_ex_low", units="atoms"), edges[:-1]),
                (Column(name="n_ex_high", units="atoms"), edges[1:]),
                (Column(name="n_ex", units="atoms", description="bin center"), centers),
                (Column(name="n_0", units="atoms", description="N - bin center"), atoms - centers),
                (Column(name="sampled_density", units="1/atoms"), stats.histogram_density),
                (
                    Column(name="exact_density", units="1/atoms", description="ideal gas"),
                    exact_binned / widths,
                ),
                (
                    Column(name="classical_density", units="1/atoms", description="ideal gas"),
                    classical_density,
                ),
                (
                    Column(
                        name="classical_printed_form",
                        units="1/atoms",
                        description="closed form without the excitation factor, at bin center",
                    ),
                    classical_printed,
                ),
            ],
            provenance,
        ),
        f"correlation{suffix}": _correlation_table(f"correlation{suffix}", profile, provenance),
        f"fluctuation_vs_density{suffix}": ResultTable.from_columns(
            f"fluctuation_vs_density{suffix}",
            [
                (Column(name="x", units="oscillator length"), fluctuations.positions),
                (Column(name="density", units="atoms/length"), fluctuations.mean_density),
                (
                    Column(name="normalized_variance", description="Var(n) / <n>^2"),
                    fluctuations.normalized_variance,
                ),
            ],
            provenance,
        ),
    }
    logger.info(
        "T={}: N0/N = {:.4f} +/- {:.4f} (ideal exact {:.4f}), Var(N0) = {:.4g}",
        temperature,
        point.condensate_fraction,
        point.condensate_fraction_error,
        point.exact_condensate_fraction,
        point.variance,
    )
    return point, tables


def _classical_columns(
    classical: IdealGasDistribution | None, edges: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Return the binned classical density and the printed closed form at bin centers."""
    centers = 0.5 * (edges[:-1] + edges[1:])
    if classical is None:
        return np.full(centers.size, np.nan), np.full(centers.size, np.nan)
    density = np.diff(np.interp(edges, classical.support, classical.cdf())) / np.diff(edges)
    printed = classical.printed_form if classical.printed_form is not None else classical.support
    return density, np.interp(centers, classical.support, printed)


def _correlation_table(name: str, profile: CorrelationProfile, provenance: Provenance):
    return ResultTable.from_columns(
        name,
        [
            (Column(name="x", units="oscillator length"), profile.positions),
            (Column(name="separation", units="oscillator length"), 2.0 * profile.positions),
            (Column(name="g1"), profile.g1),
            (Column(name="g1_error", error_of="g1"), profile.g1_error),
            (
                Column(name="condensate_density", description="rescaled to 1 at x = 0"),
                profile.condensate_density,
            ),
            (Column(name="density", units="atoms/length"), profile.total_density),
        ],
        provenance,
    )


def ground_state_table(
    config: RunConfig, state: GroundState, temperature: float, provenance: Provenance
) -> ResultTable:
    """Compare the mean-field ground state with the T = 0 minimum of the field energy."""
    cutoff = cutoff_from(config, state.mu, temperature)
    basis = basis_for(config, cutoff)
    params = config.model.params(cutoff=cutoff, temperature=0.0)
    seed = config.sampler.base_seed or 0
    steps = max(config.sampler.minimizer_sweeps * (cutoff + 1), 1)
    minimum = minimize_energy(params, config.sampler.move_params(), steps, seed, basis=basis)
    minimized = np.abs(synthesize_profile(minimum.config.amplitudes, basis)) ** 2
    gpe_state = resample(state, basis.grid)
    x = np.asarray(basis.grid.points)

    notes = dict(provenance.notes)
    notes.update(
        mu=state.mu,
        mu_thomas_fermi=(
            thomas_fermi_mu(state.atoms, state.coupling) if state.coupling > 0 else None
        ),
        gpe_energy=state.energy,
        minimized_energy=minimum.energy.total + 0.5 * state.atoms,
        l2_distance=profile_distance(gpe_state.density, minimized, basis.grid),
        fwhm_gpe=_safe_length(lambda: fwhm(x, gpe_state.density)),
        fwhm_minimized=_safe_length(lambda: fwhm(x, minimized)),
        cutoff=cutoff,
    )
    return ResultTable.from_columns(
        "ground_state",
        [
            (Column(name="x", units="oscillator length"), x),
            (Column(name="gpe_density", units="atoms/length"), gpe_state.density),
            (Column(name="minimized_density", units="atoms/length"), minimized),
        ],
        provenance.model_copy(update={"notes": notes}),
    )


def summary_table(
    name: str, points: list[TemperaturePoint], provenance: Provenance
) -> ResultTable:
    """Return one row per temperature."""
    fields = list(TemperaturePoint.model_fields)
    errors = {
        "condensate_fraction_error": "condensate_fraction",
        "variance_error": "variance",
        "center_fluctuation_error": "center_fluctuation",
    }
    units = {
        "temperature": "hbar omega / k_B",
        "variance": "atoms^2",
        "exact_variance": "atoms^2",
        "classical_mean_excited": "atoms",
        "coherence_length": "oscillator length",
        "condensate_length": "oscillator length",
    }
    descriptions = {
        "center_fluctuation": FLUCTUATION_DEFINITION,
        "center_fluctuation_displayed": DISPLAYED_FLUCTUATION_DEFINITION,
    }
    notes = {
        "fluctuation_definition": FLUCTUATION_DEFINITION,
        "displayed_fluctuation_definition": DISPLAYED_FLUCTUATION_DEFINITION,
        **provenance.notes,
    }
    return ResultTable.from_columns(
        name,
        [
            (
                Column(
                    name=field,
                    units=units.get(field, ""),
                    description=descriptions.get(field, ""),
                    error_of=errors.get(field),
                ),
                [getattr(p, field) for p in points],
            )
            for field in fields
        ],
        provenance.model_copy(update={"notes": notes}),
    )


def _write_all(config: RunConfig, tables: dict[str, ResultTable]) -> list[Path]:
    extension = ResultFormat(config.output.format).extension
    directory = prepare_directory(
        config.output.directory,
        [f"{name}{extension}" for name in tables],
        overwrite=config.output.overwrite,
    )
    return [
        write_table(table, directory, config.output.format, overwrite=config.output.overwrite)
        for table in tables.values()
    ]


def _temperature_tables(
    config: RunConfig, mu: float, temperature: float, started: float, suffix: str = ""
) -> tuple[TemperaturePoint, dict[str, ResultTable]]:
    cutoff = cutoff_from(config, mu, temperature)
    params = config.model.params(cutoff=cutoff, temperature=temperature)
    basis = basis_for(config, cutoff)
    stream = run_chains(config, params, basis)
    provenance = _provenance(config, started, temperature=temperature, cutoff=cutoff, mu=mu)
    return analyze_temperature(config, params, basis, stream, provenance, suffix)


def run(config: RunConfig, write: bool = True) -> RunResult:
    """Execute GPE, cutoff, chains and analysis at the configured temperature."""
    started = time.perf_counter()
    state = solve_ground_state(config)
    temperature = config.model.temperature
    tables: dict[str, ResultTable] = {}
    points: list[TemperaturePoint] = []
    if temperature > 0:
        point, tables = _temperature_tables(config, state.mu, temperature, started)
        points.append(point)
        tables["summary"] = summary_table("summary", points, _provenance(config, started))
    ground = ground_state_table(config, state, temperature, _provenance(config, started))
    tables = {"ground_state": ground, **tables}
    paths = _write_all(config, tables) if write else []
    return RunResult(tables=tables, paths=paths, points=points, ground_state=state)


def sweep(
    config: RunConfig, temperatures: list[float] | None = None, write: bool = True
) -> RunResult:
    """Run every temperature of the sweep with mu fixed at its T = 0 value."""
    temperatures = sorted(temperatures if temperatures is not None else config.sweep.temperatures)
    if len(temperatures) < 2:
        msg = f"A sweep needs at least 2 temperatures, got {temperatures}"
        raise BFInvalidParameter(msg)
    if any(t <= 0 for t in temperatures):
        msg = "Sweep temperatures must be > 0"
        raise BFInvalidParameter(msg)
    started = time.perf_counter()
    state = solve_ground_state(config)
    tables: dict[str, ResultTable] = {}
    points: list[TemperaturePoint] = []
    for temperature in temperatures:
        point, per_temperature = _temperature_tables(
            config, state.mu, temperature, started, suffix=f"_T{temperature:g}"
        )
        points.append(point)
        tables.update(per_temperature)

    notes: dict[str, Any] = {"mu": state.mu}
    if len(points) >= 3:
        crossover = crossover_temperature(
            np.array([p.temperature for p in points]), np.array([p.variance for p in points])
        )
        notes.update(
            crossover_temperature=crossover.temperature,
            crossover_variance=crossover.variance,
            crossover_at_edge=crossover.at_edge,
        )
    tables["summary"] = summary_table("summary", points, _provenance(config, started, **notes))
    paths = _write_all(config, tables) if write else []
    return RunResult(tables=tables, paths=paths, points=points, ground_state=state)


def ideal_reference(
    atoms: int, temperature: float, cutoff: int, points: int = 2001
) -> ResultTable:
    """Return the exact and classical ideal-gas distributions side by side.

    Both are given on the integer N_ex values; the classical density is evaluated there
    and renormalized so that it sums to 1.
    """
    from bosefield import __version__

    started = time.perf_counter()
    exact = exact_pnex(atoms, temperature)
    classical = classical_pnex(atoms, temperature, cutoff, points)
    at_integers = np.interp(exact.support, classical.support, classical.probabilities)
    printed = classical.printed_form if classical.printed_form is not None else at_integers
    fingerprint = {"atoms": atoms, "temperature": temperature, "cutoff": cutoff, "points": points}
    provenance = Provenance(
        config_hash=config_hash(fingerprint),
        version=__version__,
        wall_clock_seconds=time.perf_counter() - started,
        notes={"classical_density_integral": classical.total()},
    )
    return ResultTable.from_columns(
        "ideal_reference",
        [
            (Column(name="n_ex", units="atoms"), exact.support.astype(np.int64)),
            (Column(name="n_0", units="atoms"), (atoms - exact.support).astype(np.int64)),
            (Column(name="exact_probability"), exact.probabilities),
            (Column(name="classical_probability"), at_integers / at_integers.sum()),
            (
                Column(name="classical_density", units="1/atoms"),
                at_integers,
            ),
            (
                Column(name="classical_printed_form", units="1/atoms"),
                np.interp(exact.support, classical.support, printed),
            ),
        ],
        provenance,
    )

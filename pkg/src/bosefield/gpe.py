"""Zero-temperature mean-field ground state by imaginary-time propagation.

The Gross-Pitaevskii functional in oscillator units is

    E[psi] = int ( |psi'|^2 / 2 + x^2 |psi|^2 / 2 + g |psi|^4 / 2 ) dx

with int |psi|^2 dx = N. Energies here include the zero-point energy N / 2, which the
classical-field energy of `bosefield.field` does not.
"""

import math
from enum import StrEnum

import numpy as np
from loguru import logger
from numpy.typing import NDArray
from pydantic import Field, model_validator
from typing_extensions import Annotated

from bosefield.basis import BasisTable, Grid, build_grid
from bosefield.exceptions import BFConvergenceError, BFInvalidParameter
from bosefield.field import FieldConfiguration, ModelParams
from bosefield.models import BoseFieldBaseModel

DEFAULT_DTAU = 1e-3
DEFAULT_TOLERANCE = 1e-9
MAX_ITERATIONS = 200_000
MIN_GRID_CUTOFF = 16
CUTOFF_ROUNDING = 1e-9
ENERGY_INCREASE_TOLERANCE = 1e-12


class Laplacian(StrEnum):
    """Discretization of the kinetic term."""

    SPECTRAL = "spectral"
    FINITE_DIFFERENCE = "finite-difference"


class GroundState(BoseFieldBaseModel):
    """Converged imaginary-time solution."""

    psi: Annotated[NDArray, Field(description="real nonnegative profile, sqrt(atoms / length)")]
    grid: Grid
    atoms: Annotated[float, Field(gt=0)]
    coupling: Annotated[float, Field(ge=0)]
    mu: Annotated[float, Field(description="chemical potential, hbar omega")]
    energy: Annotated[float, Field(description="mean-field energy including N / 2")]
    residual: float
    iterations: int
    energy_history: list[float] = []

    @model_validator(mode="after")
    def check_profile(self) -> "GroundState":
        if self.psi.shape != (self.grid.size,):
            msg = "psi must be sampled on the grid"
            raise ValueError(msg)
        return self

    @property
    def density(self) -> NDArray[np.float64]:
        return self.psi**2

    def norm(self) -> float:
        return float(np.sum(self.density) * self.grid.spacing)


def thomas_fermi_mu(atoms: float, coupling: float) -> float:
    """Return mu_TF = (3 g N / (4 sqrt(2)))^(2/3).

    Integrating n(x) = (mu - x^2 / 2) / g over its support gives N.
    """
    if coupling <= 0:
        msg = f"Thomas-Fermi limit needs g > 0, got {coupling}"
        raise BFInvalidParameter(msg)
    return (3.0 * coupling * atoms / (4.0 * math.sqrt(2.0))) ** (2.0 / 3.0)


def cutoff_for(temperature: float, mu: float) -> int:
    """Return K = ceil(mu + T), the highest mode inside the energy window mu + T."""
    if temperature < 0 or mu < 0:
        msg = f"T and mu must be >= 0, got {temperature=} {mu=}"
        raise BFInvalidParameter(msg)
    cutoff = max(math.ceil(mu + temperature - CUTOFF_ROUNDING), 0)
    if cutoff == 0:
        logger.warning(
            "Cutoff K=0 for T={} and mu={}: no Monte Carlo moves possible", temperature, mu
        )
    return cutoff


def ground_state_grid(
    atoms: float, coupling: float, extent_factor: float = 1.5, oversample: float = 4.0
) -> Grid:
    """Return a grid wide enough for the ground-state cloud of N atoms at coupling g."""
    estimate = thomas_fermi_mu(atoms, coupling) if coupling > 0 else 0.0
    return build_grid(max(math.ceil(estimate), MIN_GRID_CUTOFF), extent_factor, oversample)


def _wavenumbers(grid: Grid) -> NDArray[np.float64]:
    return 2.0 * np.pi * np.fft.fftfreq(grid.size, d=grid.spacing)


def kinetic_term(
    psi: NDArray, grid: Grid, method: Laplacian | str = Laplacian.SPECTRAL
) -> NDArray:
    """Return -psi'' / 2."""
    match Laplacian(method):
        case Laplacian.SPECTRAL:
            k = _wavenumbers(grid)
            result = np.fft.ifft(0.5 * k**2 * np.fft.fft(psi))
            return result.real if np.isrealobj(psi) else result
        case Laplacian.FINITE_DIFFERENCE:
            padded = np.pad(psi, 1)
            second = (padded[2:] - 2.0 * padded[1:-1] + padded[:-2]) / grid.spacing**2
            return -0.5 * second


def energy_functional(
    psi: NDArray, grid: Grid, coupling: float, method: Laplacian | str = Laplacian.SPECTRAL
) -> float:
    """Return E[psi], including the zero-point energy."""
    x = np.asarray(grid.points)
    density = np.abs(psi) ** 2
    kinetic = float(np.real(np.sum(np.conj(psi) * kinetic_term(psi, grid, method))))
    potential = float(np.sum(0.5 * x**2 * density))
    interaction = float(np.sum(0.5 * coupling * density**2))
    return (kinetic + potential + interaction) * grid.spacing


def chemical_potential(
    psi: NDArray, grid: Grid, coupling: float, method: Laplacian | str = Laplacian.SPECTRAL
) -> float:
    """Return mu = <psi| -1/2 d^2 + x^2 / 2 + g |psi|^2 |psi> / N."""
    x = np.asarray(grid.points)
    density = np.abs(psi) ** 2
    atoms = float(np.sum(density) * grid.spacing)
    if atoms <= 0:
        msg = "Cannot compute mu of an empty profile"
        raise BFInvalidParameter(msg)
    kinetic = float(np.real(np.sum(np.conj(psi) * kinetic_term(psi, grid, method))))
    rest = float(np.sum(0.5 * x**2 * density + coupling * density**2))
    return (kinetic + rest) * grid.spacing / atoms


def _normalize(psi: NDArray, atoms: float, spacing: float) -> NDArray:
    return psi * math.sqrt(atoms / (np.sum(psi**2) * spacing))


def _initial_profile(params: ModelParams, x: NDArray) -> NDArray:
    gaussian = np.exp(-0.5 * x**2)
    if params.coupling == 0:
        return gaussian
    mu = thomas_fermi_mu(params.atoms, params.coupling)
    return np.sqrt(np.maximum(mu - 0.5 * x**2, 0.0) / params.coupling) + 1e-3 * gaussian


def imaginary_time_ground_state(
    params: ModelParams,
    grid: Grid,
    dtau: float = DEFAULT_DTAU,
    tol: float = DEFAULT_TOLERANCE,
    max_iterations: int = MAX_ITERATIONS,
) -> GroundState:
    """Relax a real profile to the mean-field ground state.

    Each step applies exp(-V dtau / 2) exp(-T dtau) exp(-V dtau / 2) with the kinetic factor
    in Fourier space and V = x^2 / 2 + g |psi|^2, then renormalizes to N atoms. The iteration
    stops once the largest pointwise change in one step drops below `tol`.

    Raises
    ------
    BFConvergenceError
        If `max_iterations` steps do not reach `tol`; the exception carries the history of
        per-step changes.
    """
    if dtau <= 0 or tol <= 0:
        msg = f"dtau and tol must be positive, got {dtau=} {tol=}"
        raise BFInvalidParameter(msg)
    x = np.asarray(grid.points)
    atoms = params.atoms
    coupling = params.coupling
    spacing = grid.spacing
    kinetic_factor = np.exp(-0.5 * _wavenumbers(grid) ** 2 * dtau)
    trap = 0.5 * x**2

    psi = _normalize(_initial_profile(params, x), atoms, spacing)
    energy = energy_functional(psi, grid, coupling)
    energies = [energy]
    residuals: list[float] = []
    for iteration in range(1, max_iterations + 1):
        half = np.exp(-0.5 * dtau * (trap + coupling * psi**2))
        updated = half * psi
        updated = np.fft.ifft(kinetic_factor * np.fft.fft(updated)).real
        updated = np.exp(-0.5 * dtau * (trap + coupling * updated**2)) * updated
        updated = _normalize(np.abs(updated), atoms, spacing)

        change = float(np.max(np.abs(updated - psi)))
        residuals.append(change)
        psi = updated
        new_energy = energy_functional(psi, grid, coupling)
        if new_energy > energy + ENERGY_INCREASE_TOLERANCE * abs(energy):
            logger.warning(
                "Imaginary-time energy increased at step {}: {:.12g} -> {:.12g}",
                iteration,
                energy,
                new_energy,
            )
        energy = new_energy
        energies.append(energy)
        if change < tol:
            break
    else:
        msg = f"Imaginary-time propagation did not reach {tol=} in {max_iterations} steps"
        raise BFConvergenceError(msg, residuals=residuals)

    # Symmetrize away round-off in the FFT.
    psi = 0.5 * (psi + psi[::-1])
    mu = chemical_potential(psi, grid, coupling)
    logger.info(
        "GPE ground state N={} g={}: mu={:.6g}, E={:.6g} after {} steps",
        atoms,
        coupling,
        mu,
        energy,
        iteration,
    )
    return GroundState(
        psi=psi,
        grid=grid,
        atoms=atoms,
        coupling=coupling,
        mu=mu,
        energy=energy_functional(psi, grid, coupling),
        residual=residuals[-1],
        iterations=iteration,
        energy_history=energies,
    )


def project_onto_basis(
    state: GroundState, basis: BasisTable, renormalize: bool = True
) -> FieldConfiguration:
    """Return alpha_n = sum_i phi_n(x_i) psi(x_i) dx for the modes of `basis`.

    The ground state must live on the same grid as `basis`. With `renormalize` the
    amplitudes are rescaled onto the N shell.
    """
    if state.grid.size != basis.grid.size or state.grid.spacing != basis.grid.spacing:
        msg = "Ground state and basis must share the grid"
        raise BFInvalidParameter(msg)
    amplitudes = (basis.values @ state.psi) * basis.grid.spacing
    if renormalize:
        amplitudes = amplitudes * math.sqrt(state.atoms / float(np.sum(amplitudes**2)))
    return FieldConfiguration(amplitudes=amplitudes)


def profile_distance(first: NDArray, second: NDArray, grid: Grid) -> float:
    """Return the L2 distance between two densities after normalizing each to unit mass."""
    a = np.asarray(first, dtype=np.float64)
    b = np.asarray(second, dtype=np.float64)
    a = a / (np.sum(a) * grid.spacing)
    b = b / (np.sum(b) * grid.spacing)
    return float(math.sqrt(np.sum((a - b) ** 2) * grid.spacing))


def resample(state: GroundState, grid: Grid) -> GroundState:
    """Return `state` linearly interpolated onto `grid` and renormalized to N atoms."""
    psi = np.interp(np.asarray(grid.points), np.asarray(state.grid.points), state.psi)
    psi = _normalize(psi, state.atoms, grid.spacing)
    return state.model_copy(
        update={
            "psi": psi,
            "grid": grid,
            "mu": chemical_potential(psi, grid, state.coupling),
            "energy": energy_functional(psi, grid, state.coupling),
        }
    )

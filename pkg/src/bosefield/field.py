"""Classical-field configurations on the fixed-N shell and their energy.

Working units are hbar = m = omega = k_B = 1: energies in hbar omega, temperatures in
hbar omega / k_B, lengths in oscillator lengths, and the coupling g in hbar omega times the
oscillator length.
"""

import numpy as np
from numpy.typing import NDArray
from pydantic import Field, field_validator, model_validator
from typing_extensions import Annotated

from bosefield.basis import BasisTable, Grid, synthesize_profile
from bosefield.exceptions import BFInvalidParameter, BFNumericalError
from bosefield.models import BoseFieldBaseModel

NORM_TOLERANCE = 1e-9


class ModelParams(BoseFieldBaseModel):
    """Physical parameters of the trapped gas."""

    atoms: Annotated[float, Field(gt=0, description="total atom number N")]
    coupling: Annotated[float, Field(ge=0, description="contact coupling g")]
    temperature: Annotated[float, Field(ge=0, description="temperature T")]
    cutoff: Annotated[int, Field(ge=0, description="highest retained mode K")]

    @property
    def n_modes(self) -> int:
        """Return K + 1."""
        return self.cutoff + 1


class FieldConfiguration(BoseFieldBaseModel):
    """Complex amplitudes alpha_0..alpha_K of the oscillator modes."""

    amplitudes: NDArray

    @field_validator("amplitudes", mode="before")
    @classmethod
    def check_amplitudes(cls, amplitudes) -> NDArray:
        array = np.array(amplitudes, dtype=np.complex128)
        if array.ndim != 1 or array.size == 0:
            msg = f"amplitudes must be a nonempty vector, got shape {array.shape}"
            raise ValueError(msg)
        return array

    @classmethod
    def ground(cls, params: ModelParams) -> "FieldConfiguration":
        """Return the configuration with all atoms in mode 0."""
        amplitudes = np.zeros(params.n_modes, dtype=np.complex128)
        amplitudes[0] = np.sqrt(params.atoms)
        return cls(amplitudes=amplitudes)

    @property
    def n_modes(self) -> int:
        return int(self.amplitudes.size)

    def occupations(self) -> NDArray[np.float64]:
        """Return |alpha_n|^2."""
        return self.amplitudes.real**2 + self.amplitudes.imag**2

    def norm(self) -> float:
        """Return sum_n |alpha_n|^2."""
        return float(np.sum(self.occupations()))

    def check_norm(self, atoms: float, rtol: float = NORM_TOLERANCE) -> None:
        """Raise if the configuration left the N shell."""
        norm = self.norm()
        if abs(norm - atoms) > rtol * atoms:
            msg = f"Configuration norm {norm!r} deviates from N={atoms} beyond {rtol=}"
            raise BFNumericalError(msg)

    def clone(self) -> "FieldConfiguration":
        return FieldConfiguration(amplitudes=self.amplitudes.copy())


class EnergyBreakdown(BoseFieldBaseModel):
    """Energy of a configuration, in hbar omega."""

    kinetic_potential: float
    interaction: Annotated[float, Field(ge=0)]
    total: float

    @model_validator(mode="after")
    def check_total(self) -> "EnergyBreakdown":
        if self.total != self.kinetic_potential + self.interaction:
            msg = "total must equal kinetic_potential + interaction"
            raise ValueError(msg)
        return self

    @classmethod
    def from_terms(cls, kinetic_potential: float, interaction: float) -> "EnergyBreakdown":
        return cls(
            kinetic_potential=kinetic_potential,
            interaction=interaction,
            total=kinetic_potential + interaction,
        )


def mode_energies(n_modes: int) -> NDArray[np.float64]:
    """Return the single-particle energies n counted from the zero point."""
    return np.arange(n_modes, dtype=np.float64)


def oscillator_energy(config: FieldConfiguration) -> float:
    """Return sum_n n |alpha_n|^2."""
    return float(mode_energies(config.n_modes) @ config.occupations())


def interaction_energy_from_profile(profile: NDArray, grid: Grid, coupling: float) -> float:
    """Return (g/2) * sum_i |Psi(x_i)|^4 dx."""
    if coupling == 0.0:
        return 0.0
    density = profile.real**2 + profile.imag**2
    return 0.5 * coupling * float(np.sum(density * density)) * grid.spacing


def interaction_energy(config: FieldConfiguration, basis: BasisTable, coupling: float) -> float:
    """Return the contact interaction energy of `config`."""
    if config.n_modes != basis.n_modes:
        msg = f"Configuration has {config.n_modes} modes, basis has {basis.n_modes}"
        raise BFInvalidParameter(msg)
    if coupling == 0.0:
        return 0.0
    profile = synthesize_profile(config.amplitudes, basis)
    return interaction_energy_from_profile(profile, basis.grid, coupling)


def total_energy(
    config: FieldConfiguration, basis: BasisTable, params: ModelParams
) -> EnergyBreakdown:
    """Return the classical energy functional of `config`."""
    return EnergyBreakdown.from_terms(
        oscillator_energy(config), interaction_energy(config, basis, params.coupling)
    )


def boltzmann_log_weight(energy: float, temperature: float) -> float:
    """Return -E / T, the log of the unnormalized canonical weight."""
    if temperature <= 0:
        msg = "Canonical weights need T > 0; use minimize_energy for T = 0"
        raise BFInvalidParameter(msg)
    return -energy / temperature

import math

import numpy as np
import pytest
from pydantic import ValidationError

from bosefield.exceptions import BFInvalidParameter, BFNumericalError
from bosefield.field import (
    EnergyBreakdown,
    FieldConfiguration,
    ModelParams,
    boltzmann_log_weight,
    interaction_energy,
    oscillator_energy,
    total_energy,
)


def test_model_params_validation():
    params = ModelParams(atoms=500, coupling=1.0, temperature=20.0, cutoff=62)
    assert params.n_modes == 63
    with pytest.raises(ValidationError):
        ModelParams(atoms=0, coupling=1.0, temperature=20.0, cutoff=6)
    with pytest.raises(ValidationError):
        ModelParams(atoms=10, coupling=-1.0, temperature=20.0, cutoff=6)
    with pytest.raises(ValidationError):
        ModelParams(atoms=10, coupling=0.0, temperature=1.0, cutoff=-1)


def test_ground_configuration_energy(small_basis):
    params = ModelParams(atoms=100, coupling=0.0, temperature=1.0, cutoff=6)
    config = FieldConfiguration.ground(params)
    assert config.norm() == pytest.approx(100.0)
    energy = total_energy(config, small_basis, params)
    assert energy.kinetic_potential == 0.0
    assert energy.interaction == 0.0
    assert energy.total == 0.0


@pytest.mark.parametrize("mode", [1, 3, 6])
def test_single_mode_oscillator_energy(mode):
    amplitudes = np.zeros(7, dtype=np.complex128)
    amplitudes[mode] = math.sqrt(50.0)
    config = FieldConfiguration(amplitudes=amplitudes)
    assert oscillator_energy(config) == pytest.approx(50.0 * mode)


def test_interaction_energy_of_ground_mode(small_basis):
    atoms, coupling = 40.0, 0.5
    params = ModelParams(atoms=atoms, coupling=coupling, temperature=1.0, cutoff=6)
    config = FieldConfiguration.ground(params)
    expected = 0.5 * coupling * atoms**2 / math.sqrt(2.0 * math.pi)
    assert interaction_energy(config, small_basis, coupling) == pytest.approx(expected, rel=1e-10)


def test_energy_of_random_configuration(small_basis, rng):
    amplitudes = rng.standard_normal(7) + 1j * rng.standard_normal(7)
    config = FieldConfiguration(amplitudes=amplitudes)
    params = ModelParams(atoms=config.norm(), coupling=0.2, temperature=1.0, cutoff=6)
    energy = total_energy(config, small_basis, params)
    expected = np.sum(np.arange(7) * np.abs(amplitudes) ** 2)
    assert energy.kinetic_potential == pytest.approx(expected)
    assert energy.interaction > 0
    assert energy.total == energy.kinetic_potential + energy.interaction


def test_interaction_energy_mode_mismatch(small_basis):
    config = FieldConfiguration(amplitudes=np.ones(3))
    with pytest.raises(BFInvalidParameter):
        interaction_energy(config, small_basis, 1.0)


def test_check_norm():
    config = FieldConfiguration(amplitudes=[3.0, 4.0j])
    config.check_norm(25.0)
    with pytest.raises(BFNumericalError):
        config.check_norm(25.001)


def test_clone_is_independent():
    config = FieldConfiguration(amplitudes=[1.0, 0.0])
    copy = config.clone()
    copy.amplitudes[1] = 1.0
    assert config.amplitudes[1] == 0.0


def test_configuration_rejects_bad_shapes():
    with pytest.raises(ValidationError):
        FieldConfiguration(amplitudes=[])
    with pytest.raises(ValidationError):
        FieldConfiguration(amplitudes=np.ones((2, 2)))


def test_energy_breakdown_consistency():
    energy = EnergyBreakdown.from_terms(3.0, 1.5)
    assert energy.total == 4.5
    with pytest.raises(ValidationError):
        EnergyBreakdown(kinetic_potential=3.0, interaction=1.5, total=5.0)


def test_boltzmann_log_weight():
    assert boltzmann_log_weight(10.0, 5.0) == -2.0
    with pytest.raises(BFInvalidParameter):
        boltzmann_log_weight(10.0, 0.0)

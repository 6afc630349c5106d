import math

import numpy as np
import pytest
from pydantic import ValidationError
from scipy import integrate

from bosefield.exceptions import BFInvalidParameter
from bosefield.ideal_gas import (
    DistributionKind,
    IdealGasDistribution,
    brute_force_partition,
    cdf_distance,
    classical_excited_moments,
    classical_partition,
    classical_pnex,
    enumerate_pnex,
    exact_condensate_moments,
    exact_log_partition,
    exact_pnex,
    excited_partition,
    printed_classical_density,
)


def test_exact_pnex_two_atoms():
    distribution = exact_pnex(2, 1.0 / math.log(2.0))
    assert distribution.xi == pytest.approx(0.5)
    assert np.allclose(distribution.probabilities, [0.375, 0.375, 0.25], atol=1e-13)
    assert distribution.kind == DistributionKind.QUANTUM


@pytest.mark.parametrize("atoms", [1, 2, 10, 100, 500])
@pytest.mark.parametrize("temperature", [0.5, 1.0, 20.0, 50.0])
def test_exact_pnex_is_normalized(atoms, temperature):
    distribution = exact_pnex(atoms, temperature)
    assert abs(distribution.total() - 1.0) <= 1e-12
    assert np.all(distribution.probabilities >= 0)
    assert np.all(np.isfinite(distribution.probabilities))


@pytest.mark.parametrize(
    "atoms, temperature",
    [(1, 0.5), (2, 1.0), (3, 1.0), (3, 2.0), (4, 1.0)],
)
def test_exact_pnex_matches_enumeration(atoms, temperature):
    exact = exact_pnex(atoms, temperature)
    enumerated = enumerate_pnex(atoms, temperature)
    assert np.max(np.abs(exact.probabilities - enumerated.probabilities)) <= 1e-10


def test_enumeration_limit():
    with pytest.raises(BFInvalidParameter):
        enumerate_pnex(7, 1.0)


def test_exact_log_partition_single_atom():
    temperature = 3.0
    expected = -math.log(1.0 - math.exp(-1.0 / temperature))
    assert exact_log_partition(1, temperature) == pytest.approx(expected)


def test_exact_pnex_rejects_bad_input():
    with pytest.raises(BFInvalidParameter):
        exact_pnex(0, 1.0)
    with pytest.raises(BFInvalidParameter):
        exact_pnex(5, 0.0)


def test_condensate_moments_limits():
    cold_mean, cold_variance = exact_condensate_moments(100, 0.05)
    assert cold_mean == pytest.approx(100.0, abs=1e-6)
    assert cold_variance == pytest.approx(0.0, abs=1e-6)
    mean, variance = exact_condensate_moments(500, 20.0)
    assert 400.0 < mean < 450.0
    assert variance > 0


def test_classical_partition_example():
    assert classical_partition(3.0, 1.0, 2) == pytest.approx(0.451452, abs=1e-6)


@pytest.mark.parametrize("cutoff", [1, 2, 3])
@pytest.mark.parametrize("atoms", [1.0, 3.0, 10.0])
@pytest.mark.parametrize("temperature", [0.5, 1.0, 5.0])
def test_classical_partition_matches_integration(cutoff, atoms, temperature):
    closed = classical_partition(atoms, temperature, cutoff)
    numeric = brute_force_partition(atoms, temperature, cutoff)
    assert numeric == pytest.approx(closed, rel=1e-6)


def test_classical_partition_four_excited_modes():
    closed = classical_partition(3.0, 1.0, 4)
    assert brute_force_partition(3.0, 1.0, 4) == pytest.approx(closed, rel=1e-6)


def test_brute_force_limits():
    with pytest.raises(BFInvalidParameter):
        brute_force_partition(3.0, 1.0, 5)
    with pytest.raises(BFInvalidParameter):
        brute_force_partition(3.0, 1.0, 0)


def test_excited_partition_integrates_to_partition():
    atoms, temperature, cutoff = 50.0, 4.0, 3
    value, _ = integrate.quad(
        lambda x: float(excited_partition(x, temperature, cutoff)),
        0.0,
        atoms,
        limit=200,
        epsabs=0.0,
        epsrel=1e-11,
    )
    assert value == pytest.approx(classical_partition(atoms, temperature, cutoff), rel=1e-8)


def test_excited_partition_at_zero():
    assert float(excited_partition(0.0, 2.0, 1)) == pytest.approx(1.0)
    assert float(excited_partition(0.0, 2.0, 3)) == 0.0
    without = float(excited_partition(1.0, 2.0, 1, include_excitation_energy=False))
    assert without == pytest.approx(1.0)


def test_classical_pnex_is_normalized():
    distribution = classical_pnex(500, 20.0, 20)
    assert distribution.kind == DistributionKind.CLASSICAL
    assert distribution.support[0] == 0.0
    assert distribution.support[-1] == 500.0
    assert distribution.total() == pytest.approx(1.0, abs=1e-12)
    assert distribution.cdf()[-1] == pytest.approx(1.0, abs=1e-12)
    assert distribution.printed_form is not None


@pytest.mark.parametrize("cutoff", [0, 1])
def test_classical_pnex_needs_two_excited_modes(cutoff):
    with pytest.raises(BFInvalidParameter):
        classical_pnex(20, 3.0, cutoff)


def test_classical_mean_is_harmonic_sum():
    temperature, cutoff = 20.0, 20
    harmonic = sum(1.0 / n for n in range(1, cutoff + 1))
    mean, variance = classical_excited_moments(500, temperature, cutoff)
    assert mean == pytest.approx(temperature * harmonic, rel=1e-6)
    squares = sum(1.0 / n**2 for n in range(1, cutoff + 1))
    assert variance == pytest.approx(temperature**2 * squares, rel=1e-6)


def test_classical_and_quantum_means_agree_at_high_temperature():
    classical_mean, _ = classical_excited_moments(500, 20.0, 20)
    quantum_mean = exact_pnex(500, 20.0).mean_excited()
    assert quantum_mean == pytest.approx(classical_mean, rel=0.01)


def test_classical_and_quantum_distributions_are_close():
    exact = exact_pnex(500, 20.0)
    classical = classical_pnex(500, 20.0, 20)
    classical_cdf = np.interp(exact.support, classical.support, classical.cdf())
    assert np.max(np.abs(exact.cdf() - classical_cdf)) < 0.05


def test_printed_form_lacks_excitation_factor():
    atoms, temperature, cutoff = 100.0, 5.0, 4
    x = np.linspace(1.0, 50.0, 11)
    printed = printed_classical_density(atoms, temperature, cutoff, x)
    full = excited_partition(x, temperature, cutoff) / classical_partition(
        atoms, temperature, cutoff
    )
    assert np.allclose(full, printed * np.exp(-x / temperature), rtol=1e-10)


def test_cdf_distance_of_sampled_classical_gas(rng):
    temperature, cutoff = 20.0, 20
    rates = np.arange(1, cutoff + 1) / temperature
    samples = rng.exponential(1.0 / rates, size=(5000, cutoff)).sum(axis=1)
    reference = classical_pnex(500, temperature, cutoff)
    assert cdf_distance(samples, reference) < 0.04
    assert cdf_distance(samples + 100.0, reference) > 0.5
    with pytest.raises(BFInvalidParameter):
        cdf_distance(np.array([]), reference)


def test_classical_distribution_needs_cutoff():
    with pytest.raises(ValidationError):
        IdealGasDistribution(
            atoms=2,
            temperature=1.0,
            kind=DistributionKind.CLASSICAL,
            support=np.linspace(0, 2, 3),
            probabilities=np.ones(3),
        )

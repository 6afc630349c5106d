import math

import numpy as np
import pytest

from bosefield.basis import build_basis, build_grid
from bosefield.exceptions import BFConvergenceError, BFInvalidParameter
from bosefield.field import ModelParams
from bosefield.gpe import (
    Laplacian,
    chemical_potential,
    cutoff_for,
    energy_functional,
    ground_state_grid,
    imaginary_time_ground_state,
    profile_distance,
    project_onto_basis,
    resample,
    thomas_fermi_mu,
)


def _params(atoms, coupling):
    return ModelParams(atoms=atoms, coupling=coupling, temperature=0.0, cutoff=0)


@pytest.fixture(scope="module")
def ideal_state():
    return imaginary_time_ground_state(_params(500.0, 0.0), ground_state_grid(500.0, 0.0))


@pytest.fixture(scope="module")
def interacting_state():
    return imaginary_time_ground_state(_params(500.0, 1.0), ground_state_grid(500.0, 1.0))


def test_thomas_fermi_mu():
    assert thomas_fermi_mu(500.0, 1.0) == pytest.approx(41.27, abs=0.01)
    assert thomas_fermi_mu(500.0, 0.02) == pytest.approx(3.04, abs=0.01)
    with pytest.raises(BFInvalidParameter):
        thomas_fermi_mu(500.0, 0.0)


@pytest.mark.parametrize(
    "temperature, mu, expected",
    [(20.0, 0.0, 20), (20.0, 41.3, 62), (0.5, 0.0, 1), (3.0, 2.0, 5), (0.0, 3.04, 4)],
)
def test_cutoff_for(temperature, mu, expected):
    assert cutoff_for(temperature, mu) == expected


def test_cutoff_zero_warns(caplog):
    assert cutoff_for(0.0, 0.0) == 0
    assert "no Monte Carlo moves" in caplog.text
    with pytest.raises(BFInvalidParameter):
        cutoff_for(-1.0, 0.0)


def test_ideal_ground_state(ideal_state):
    assert ideal_state.mu == pytest.approx(0.5, abs=1e-6)
    assert ideal_state.energy == pytest.approx(250.0, rel=1e-5)
    assert ideal_state.norm() == pytest.approx(500.0, rel=1e-12)
    x = np.asarray(ideal_state.grid.points)
    expected = 500.0 * np.exp(-(x**2)) / math.sqrt(math.pi)
    assert np.max(np.abs(ideal_state.density - expected)) < 1e-4 * expected.max()


def test_interacting_ground_state(interacting_state):
    reference = thomas_fermi_mu(500.0, 1.0)
    assert interacting_state.mu == pytest.approx(reference, rel=0.05)
    assert interacting_state.norm() == pytest.approx(500.0, rel=1e-12)
    assert np.all(interacting_state.psi >= 0)
    assert np.array_equal(interacting_state.psi, interacting_state.psi[::-1])
    assert interacting_state.residual < 1e-9


def test_energy_history_relaxes(interacting_state):
    history = np.array(interacting_state.energy_history)
    assert history[-1] < history[0]
    assert history[-1] == pytest.approx(history.min(), rel=1e-10)


def test_laplacians_agree(interacting_state):
    grid = interacting_state.grid
    psi = interacting_state.psi
    spectral = chemical_potential(psi, grid, 1.0, Laplacian.SPECTRAL)
    finite = chemical_potential(psi, grid, 1.0, Laplacian.FINITE_DIFFERENCE)
    assert finite == pytest.approx(spectral, rel=1e-3)
    energy = energy_functional(psi, grid, 1.0, "finite-difference")
    assert energy == pytest.approx(interacting_state.energy, rel=1e-3)


def test_convergence_error_carries_residuals():
    grid = ground_state_grid(500.0, 1.0)
    with pytest.raises(BFConvergenceError) as excinfo:
        imaginary_time_ground_state(_params(500.0, 1.0), grid, max_iterations=5)
    assert len(excinfo.value.residuals) == 5


def test_invalid_step():
    with pytest.raises(BFInvalidParameter):
        imaginary_time_ground_state(_params(10.0, 0.0), build_grid(16), dtau=0.0)


def test_ground_state_grid_covers_cloud():
    grid = ground_state_grid(500.0, 1.0)
    radius = math.sqrt(2.0 * thomas_fermi_mu(500.0, 1.0))
    assert grid.extent > radius
    assert ground_state_grid(10.0, 0.0).cutoff == 16


def test_project_ideal_state_onto_basis(ideal_state):
    basis = build_basis(16, ideal_state.grid)
    config = project_onto_basis(ideal_state, basis)
    assert config.norm() == pytest.approx(500.0)
    assert config.occupations()[0] == pytest.approx(500.0, rel=1e-8)
    with pytest.raises(BFInvalidParameter):
        project_onto_basis(ideal_state, build_basis(4, build_grid(4)))


def test_resample_and_profile_distance(interacting_state):
    grid = build_grid(48)
    moved = resample(interacting_state, grid)
    assert moved.norm() == pytest.approx(500.0, rel=1e-12)
    assert moved.mu == pytest.approx(interacting_state.mu, rel=1e-2)
    same = profile_distance(moved.density, moved.density, grid)
    assert same == 0.0
    other = np.exp(-np.asarray(grid.points) ** 2)
    assert profile_distance(moved.density, other, grid) > 0.1


def test_mu_grows_with_coupling():
    couplings = [0.0, 0.02, 0.1, 1.0]
    states = [
        imaginary_time_ground_state(_params(100.0, g), ground_state_grid(100.0, g))
        for g in couplings
    ]
    mus = [state.mu for state in states]
    assert mus[0] == pytest.approx(0.5, abs=1e-6)
    assert all(np.diff(mus) > 0)
    peaks = [state.density.max() for state in states]
    assert all(np.diff(peaks) < 0)

import math

import numpy as np
import pytest
from scipy.special import eval_hermite, factorial

from bosefield.basis import (
    build_basis,
    build_grid,
    hermite_functions,
    max_spacing,
    quadrature,
    synthesize_profile,
    turning_point,
)
from bosefield.exceptions import BFInvalidParameter


@pytest.mark.parametrize("cutoff", [0, 1, 6, 20])
def test_grid_is_symmetric_and_resolving(cutoff):
    grid = build_grid(cutoff)
    points = np.asarray(grid.points)
    assert grid.size % 2 == 1
    assert np.array_equal(points, -points[::-1])
    assert points[grid.center_index] == 0.0
    assert grid.spacing <= max_spacing(cutoff) / 4.0 * (1 + 1e-12)
    assert grid.extent >= 1.5 * turning_point(cutoff)


def test_grid_rejects_underresolved_settings():
    with pytest.raises(BFInvalidParameter):
        build_grid(4, extent_factor=0.5)
    with pytest.raises(BFInvalidParameter):
        build_grid(4, oversample=0.9)
    with pytest.raises(BFInvalidParameter):
        build_grid(-1)


def test_grid_index_of():
    grid = build_grid(6)
    assert grid.index_of(0.0) == grid.center_index
    assert grid.index_of(float(grid.points[-1])) == grid.size - 1
    with pytest.raises(BFInvalidParameter):
        grid.index_of(0.5 * grid.spacing)
    with pytest.raises(BFInvalidParameter):
        grid.index_of(2.0 * grid.extent)


@pytest.mark.parametrize("cutoff", [0, 20, 62])
def test_basis_orthonormality(cutoff):
    basis = build_basis(cutoff, build_grid(cutoff))
    assert basis.values.shape == (cutoff + 1, basis.grid.size)
    error = np.max(np.abs(basis.overlap_matrix() - np.eye(cutoff + 1)))
    assert error <= 1e-10


def test_hermite_functions_match_closed_form():
    x = np.linspace(-4.0, 4.0, 81)
    values = hermite_functions(10, x)
    for n in range(11):
        norm = 1.0 / math.sqrt(2.0**n * factorial(n) * math.sqrt(math.pi))
        expected = norm * eval_hermite(n, x) * np.exp(-0.5 * x**2)
        assert np.allclose(values[n], expected, rtol=1e-10, atol=1e-12)


def test_hermite_function_parity(small_basis):
    values = small_basis.values
    for n in range(small_basis.n_modes):
        assert np.array_equal(values[n][::-1], (-1) ** n * values[n])


def test_basis_needs_large_enough_grid():
    with pytest.raises(BFInvalidParameter):
        build_basis(10, build_grid(4))


def test_synthesize_profile(small_basis):
    amplitudes = np.zeros(small_basis.n_modes, dtype=np.complex128)
    amplitudes[3] = 1.0
    assert np.array_equal(synthesize_profile(amplitudes, small_basis), small_basis.values[3])

    stack = np.stack([amplitudes, 2j * amplitudes])
    profiles = synthesize_profile(stack, small_basis)
    assert profiles.shape == (2, small_basis.grid.size)
    assert np.allclose(profiles[1], 2j * small_basis.values[3])

    with pytest.raises(BFInvalidParameter):
        synthesize_profile(amplitudes[:-1], small_basis)


def test_quadrature_of_ground_density(small_basis):
    density = small_basis.values[0] ** 2
    assert quadrature(density, small_basis.grid) == pytest.approx(1.0, abs=1e-10)
    with pytest.raises(BFInvalidParameter):
        quadrature(density[:-1], small_basis.grid)

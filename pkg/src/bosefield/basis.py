"""Harmonic-oscillator eigenfunctions on a uniform quadrature grid.

All lengths are in oscillator units sqrt(hbar / m omega). The grid is symmetric about the
trap center and always contains x = 0, so that center-of-trap and (-x, x) observables can be
read off directly.
"""

import math

import numpy as np
from loguru import logger
from numpy.typing import NDArray
from pydantic import Field, model_validator
from typing_extensions import Annotated

from bosefield.exceptions import BFInvalidParameter, BFNumericalError
from bosefield.models import FrozenModel, read_only

ORTHONORMALITY_TOLERANCE = 1e-10

# Absolute margin beyond the classical turning point. Keeps the Gaussian tail of the
# low modes inside the grid when extent_factor * sqrt(2K + 1) is small.
TAIL_MARGIN = 6.0


def turning_point(cutoff: int) -> float:
    """Return the classical turning point of mode `cutoff`."""
    return math.sqrt(2 * cutoff + 1)


def max_spacing(cutoff: int) -> float:
    """Return the largest spacing that resolves the shortest oscillation of mode `cutoff`."""
    return math.pi / (2.0 * turning_point(cutoff))


class Grid(FrozenModel):
    """Uniform, symmetric spatial grid."""

    points: Annotated[NDArray, Field(description="positions, oscillator lengths")]
    spacing: Annotated[float, Field(gt=0, description="uniform step")]
    extent: Annotated[float, Field(gt=0, description="half-width L")]
    cutoff: Annotated[int, Field(ge=0, description="highest mode the grid was built for")]

    @model_validator(mode="after")
    def check_grid(self) -> "Grid":
        points = self.points
        if points.ndim != 1 or points.size % 2 != 1:
            msg = f"Grid must be one-dimensional with an odd point count, got {points.shape}"
            raise BFInvalidParameter(msg)
        if not np.all(np.diff(points) > 0):
            msg = "Grid points must be strictly increasing"
            raise BFInvalidParameter(msg)
        if not np.array_equal(points, -points[::-1]):
            msg = "Grid points must be symmetric about 0"
            raise BFInvalidParameter(msg)
        if self.spacing > max_spacing(self.cutoff) * (1 + 1e-12):
            msg = (
                f"Grid spacing {self.spacing} does not resolve mode {self.cutoff} "
                f"(max {max_spacing(self.cutoff)})"
            )
            raise BFInvalidParameter(msg)
        return self

    @property
    def size(self) -> int:
        """Return the number of grid points."""
        return int(self.points.size)

    @property
    def center_index(self) -> int:
        """Return the index of x = 0."""
        return self.size // 2

    def index_of(self, position: float) -> int:
        """Return the index of the grid point at `position`.

        Raises
        ------
        BFInvalidParameter
            Raised if `position` is not a grid point.
        """
        index = int(round(position / self.spacing)) + self.center_index
        if not 0 <= index < self.size or not math.isclose(
            self.points[index], position, rel_tol=0.0, abs_tol=1e-9 * self.spacing
        ):
            msg = f"Position {position} is not on the grid"
            raise BFInvalidParameter(msg)
        return index


class BasisTable(FrozenModel):
    """Oscillator eigenfunctions phi_n(x_i) for n = 0..K, one row per mode."""

    cutoff: Annotated[int, Field(ge=0, description="highest retained mode index K")]
    values: NDArray
    grid: Grid

    @property
    def n_modes(self) -> int:
        """Return K + 1."""
        return self.cutoff + 1

    def overlap_matrix(self) -> NDArray[np.float64]:
        """Return the quadrature overlap matrix sum_i phi_m(x_i) phi_n(x_i) dx."""
        return (self.values @ self.values.T) * self.grid.spacing


def build_grid(cutoff: int, extent_factor: float = 1.5, oversample: float = 4.0) -> Grid:
    """Build a symmetric uniform grid that resolves modes 0..cutoff.

    Parameters
    ----------
    cutoff : int
        Highest retained mode K.
    extent_factor : float
        Half-width in units of the turning point sqrt(2K + 1).
    oversample : float
        Refinement of the spacing beyond pi / (2 sqrt(2K + 1)).
    """
    if cutoff < 0:
        msg = f"cutoff must be >= 0, got {cutoff}"
        raise BFInvalidParameter(msg)
    if extent_factor < 1.0 or oversample < 1.0:
        msg = f"Under-resolved quadrature: {extent_factor=} and {oversample=} must be >= 1"
        raise BFInvalidParameter(msg)

    x_turn = turning_point(cutoff)
    extent = max(extent_factor * x_turn, x_turn + TAIL_MARGIN)
    target = max_spacing(cutoff) / oversample
    n_half = math.ceil(extent / target)
    spacing = extent / n_half
    points = spacing * np.arange(-n_half, n_half + 1, dtype=np.float64)
    logger.debug(
        "Built grid for K={}: {} points, L={:.3f}, dx={:.4g}", cutoff, points.size, extent, spacing
    )
    return Grid(points=read_only(points), spacing=spacing, extent=extent, cutoff=cutoff)


def hermite_functions(cutoff: int, x: NDArray[np.float64]) -> NDArray[np.float64]:
    """Evaluate the normalized Hermite functions phi_0..phi_cutoff at `x`.

    Uses the three-term recurrence on the normalized functions, which stays finite for
    hundreds of modes where raw Hermite polynomials overflow.
    """
    values = np.empty((cutoff + 1, x.size), dtype=np.float64)
    values[0] = np.pi**-0.25 * np.exp(-0.5 * x**2)
    if cutoff >= 1:
        values[1] = math.sqrt(2.0) * x * values[0]
    for n in range(1, cutoff):
        values[n + 1] = (
            math.sqrt(2.0 / (n + 1)) * x * values[n] - math.sqrt(n / (n + 1)) * values[n - 1]
        )
    return values


def build_basis(cutoff: int, grid: Grid) -> BasisTable:
    """Tabulate phi_n(x_i) for n = 0..cutoff on `grid` and verify orthonormality."""
    if cutoff < 0:
        msg = f"cutoff must be >= 0, got {cutoff}"
        raise BFInvalidParameter(msg)
    if grid.cutoff < cutoff:
        msg = f"Grid built for K={grid.cutoff} cannot hold modes up to K={cutoff}"
        raise BFInvalidParameter(msg)

    values = hermite_functions(cutoff, np.asarray(grid.points))
    basis = BasisTable(cutoff=cutoff, values=read_only(values), grid=grid)
    error = np.max(np.abs(basis.overlap_matrix() - np.eye(cutoff + 1)))
    if error > ORTHONORMALITY_TOLERANCE:
        msg = (
            f"Grid too coarse or too short for K={cutoff}: orthonormality error {error:.3e} "
            f"exceeds {ORTHONORMALITY_TOLERANCE}; increase extent_factor or oversample"
        )
        raise BFNumericalError(msg)
    logger.debug("Built basis K={} with orthonormality error {:.2e}", cutoff, error)
    return basis


def synthesize_profile(amplitudes: NDArray[np.complex128], basis: BasisTable) -> NDArray:
    """Return Psi(x_i) = sum_n alpha_n phi_n(x_i).

    `amplitudes` may also be a stack of configurations with shape (S, K + 1), in which case
    the result has shape (S, M).
    """
    amplitudes = np.asarray(amplitudes)
    if amplitudes.shape[-1] != basis.n_modes:
        msg = f"Expected {basis.n_modes} amplitudes, got {amplitudes.shape[-1]}"
        raise BFInvalidParameter(msg)
    return amplitudes @ basis.values


def quadrature(samples: NDArray, grid: Grid) -> float:
    """Return sum_i f(x_i) dx."""
    samples = np.asarray(samples)
    if samples.shape[-1] != grid.size:
        msg = f"Profile length {samples.shape[-1]} does not match grid size {grid.size}"
        raise BFInvalidParameter(msg)
    return float(np.sum(samples) * grid.spacing)

"""Reduction of sample streams to condensate statistics and correlation observables."""

import math
from typing import Iterator

import numpy as np
from loguru import logger
from numpy.typing import NDArray
from pydantic import Field, model_validator
from typing_extensions import Annotated

from bosefield.basis import BasisTable, synthesize_profile
from bosefield.eigensolver import check_hermitian, fix_phase, jacobi_eigh
from bosefield.exceptions import (
    BFInsufficientData,
    BFInvalidParameter,
    BFNumericalError,
    BFProfileError,
)
from bosefield.models import BoseFieldBaseModel
from bosefield.sampler import SampleStream
from bosefield.statistics import BlockingResult, blocking_analysis

MIN_SERIES_LENGTH = 100
RESIDUAL_TOLERANCE = 1e-8
TRACE_TOLERANCE = 1e-8
POSITIVITY_TOLERANCE = 1e-9
PROFILE_CHUNK = 512
BATCHES = 32
MAX_HISTOGRAM_BINS = 1000

FLUCTUATION_DEFINITION = "(<n^2> - <n>^2) / <n>^2 with n = |Psi(x)|^2"
DISPLAYED_FLUCTUATION_DEFINITION = "(<|Psi(x)|^4> - <|Psi(x)|^2>) / <|Psi(x)|^2>^2"


class DensityMatrix(BoseFieldBaseModel):
    """Accumulated sum over snapshots of conj(alpha_i) alpha_j."""

    entries: NDArray
    count: Annotated[int, Field(ge=0)]

    @model_validator(mode="after")
    def check_entries(self) -> "DensityMatrix":
        entries = self.entries
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            msg = f"Density matrix must be square, got {entries.shape}"
            raise ValueError(msg)
        if not np.array_equal(entries, entries.conj().T):
            msg = "Density matrix accumulator must be exactly Hermitian"
            raise ValueError(msg)
        return self

    @property
    def mean(self) -> NDArray[np.complex128]:
        """Return rho_ij = <conj(alpha_i) alpha_j>."""
        if self.count == 0:
            msg = "Density matrix has no samples"
            raise BFInsufficientData(msg)
        return self.entries / self.count

    def trace_per_sample(self) -> float:
        return float(np.trace(self.entries).real) / self.count

    def check_physical(self, atoms: float) -> None:
        """Raise unless the mean has trace N and no negative eigenvalues beyond rounding."""
        trace = self.trace_per_sample()
        if abs(trace - atoms) > TRACE_TOLERANCE * atoms:
            msg = f"Density matrix trace {trace:.12g} differs from N = {atoms:.12g}"
            raise BFNumericalError(msg)
        lowest = float(np.linalg.eigvalsh(self.mean)[0])
        if lowest < -POSITIVITY_TOLERANCE * atoms:
            msg = f"Density matrix has negative eigenvalue {lowest:.3e}"
            raise BFNumericalError(msg)

    def merge(self, other: "DensityMatrix") -> "DensityMatrix":
        """Return the count-weighted combination of two accumulators."""
        if other.entries.shape != self.entries.shape:
            msg = "Cannot merge density matrices of different sizes"
            raise BFInvalidParameter(msg)
        return DensityMatrix(entries=self.entries + other.entries, count=self.count + other.count)


def accumulate_density_matrix(stream: SampleStream) -> DensityMatrix:
    """Accumulate conj(alpha_i) alpha_j over all snapshots of `stream`."""
    if len(stream) == 0:
        msg = "Cannot accumulate a density matrix from an empty stream"
        raise BFInsufficientData(msg)
    snapshots = stream.snapshots
    entries = snapshots.conj().T @ snapshots
    entries = 0.5 * (entries + entries.conj().T)
    rho = DensityMatrix(entries=entries, count=len(stream))
    rho.check_physical(stream.params.atoms)
    return rho


class CondensateDecomposition(BoseFieldBaseModel):
    """Eigen-decomposition of the single-particle density matrix."""

    eigenvalues: NDArray
    eigenvectors: Annotated[NDArray, Field(description="columns beta(n) in the oscillator basis")]

    @property
    def condensate_occupation(self) -> float:
        """Return the dominant eigenvalue lambda_0."""
        return float(self.eigenvalues[0])

    @property
    def condensate_vector(self) -> NDArray[np.complex128]:
        """Return beta(0)."""
        return self.eigenvectors[:, 0]


def diagonalize(rho: DensityMatrix) -> CondensateDecomposition:
    """Diagonalize rho; the dominant eigenvector is the condensate.

    The decomposed matrix is <alpha alpha^H> = conj(rho), whose eigenvectors are the mode
    vectors beta(n) with N_n = |beta(n)^H alpha|^2. Every eigenvector has its largest
    component made real and positive.
    """
    matrix = rho.mean.conj()
    check_hermitian(matrix)
    values, vectors = jacobi_eigh(matrix)
    for n in range(vectors.shape[1]):
        vectors[:, n] = fix_phase(vectors[:, n])

    trace = float(np.trace(matrix).real)
    scale = max(trace, 1.0)
    residual = float(np.max(np.linalg.norm(matrix @ vectors - vectors * values, axis=0)))
    if residual > RESIDUAL_TOLERANCE * scale:
        msg = f"Eigendecomposition residual {residual:.3e} exceeds {RESIDUAL_TOLERANCE} * {scale}"
        raise BFNumericalError(msg)
    logger.debug("Condensate occupation {:.6g} of trace {:.6g}", values[0], trace)
    return CondensateDecomposition(eigenvalues=values, eigenvectors=vectors)


class OccupationSeries(BoseFieldBaseModel):
    """Per-snapshot occupation of the condensate mode."""

    condensate: NDArray
    atoms: Annotated[float, Field(gt=0)]

    @model_validator(mode="after")
    def check_bounds(self) -> "OccupationSeries":
        if np.any(self.condensate < 0) or np.any(self.condensate > self.atoms):
            msg = "Condensate occupations must lie in [0, N]"
            raise ValueError(msg)
        return self

    @property
    def excited(self) -> NDArray[np.float64]:
        """Return N_ex = N - N_0 per snapshot."""
        return self.atoms - self.condensate

    def __len__(self) -> int:
        return int(self.condensate.size)


def occupation_series(stream: SampleStream, condensate_vector: NDArray) -> OccupationSeries:
    """Project every snapshot onto the ensemble condensate mode beta(0)."""
    vector = np.asarray(condensate_vector, dtype=np.complex128)
    if not math.isclose(float(np.linalg.norm(vector)), 1.0, rel_tol=1e-10):
        msg = "The condensate vector must be normalized"
        raise BFInvalidParameter(msg)
    atoms = stream.params.atoms
    overlaps = stream.snapshots @ vector.conj()
    occupation = np.clip(overlaps.real**2 + overlaps.imag**2, 0.0, atoms)
    return OccupationSeries(condensate=occupation, atoms=atoms)


def bare_occupation_series(stream: SampleStream) -> OccupationSeries:
    """Return |alpha_0|^2 per snapshot, the occupation of the bare trap ground state."""
    atoms = stream.params.atoms
    alpha0 = stream.snapshots[:, 0]
    occupation = np.clip(alpha0.real**2 + alpha0.imag**2, 0.0, atoms)
    return OccupationSeries(condensate=occupation, atoms=atoms)


class OccupationStatistics(BoseFieldBaseModel):
    """Moments and histogram of the condensate occupation."""

    atoms: float
    mean: float
    mean_error: float
    variance: float
    variance_error: float
    histogram_edges: Annotated[NDArray, Field(description="bin edges over N_ex in [0, N]")]
    histogram_density: NDArray
    mean_blocking: BlockingResult

    @property
    def condensate_fraction(self) -> float:
        return self.mean / self.atoms

    @property
    def condensate_fraction_error(self) -> float:
        return self.mean_error / self.atoms

    @property
    def relative_fluctuation(self) -> float:
        """Return sqrt(Var N_0) / N."""
        return math.sqrt(self.variance) / self.atoms


def freedman_diaconis_bins(data: NDArray, span: float) -> int:
    """Return the Freedman-Diaconis bin count for `data` over an interval of length `span`."""
    q75, q25 = np.percentile(data, [75, 25])
    width = 2.0 * (q75 - q25) / data.size ** (1.0 / 3.0)
    if width <= 0:
        return 1
    return int(min(max(math.ceil(span / width), 1), MAX_HISTOGRAM_BINS))


def occupation_statistics(
    series: OccupationSeries, bins: int | None = None
) -> OccupationStatistics:
    """Return mean, variance with blocked errors, and the N_ex probability density."""
    if len(series) < MIN_SERIES_LENGTH:
        msg = f"Series of length {len(series)} is too short; need >= {MIN_SERIES_LENGTH}"
        raise BFInsufficientData(msg)
    condensate = series.condensate
    mean_blocking = blocking_analysis(condensate)
    deviations = (condensate - mean_blocking.mean) ** 2
    n = condensate.size
    variance = float(np.sum(deviations) / (n - 1))
    variance_error = blocking_analysis(deviations).error * n / (n - 1)

    excited = series.excited
    n_bins = bins if bins is not None else freedman_diaconis_bins(excited, series.atoms)
    density, edges = np.histogram(excited, bins=n_bins, range=(0.0, series.atoms), density=True)
    return OccupationStatistics(
        atoms=series.atoms,
        mean=mean_blocking.mean,
        mean_error=mean_blocking.error,
        variance=variance,
        variance_error=variance_error,
        histogram_edges=edges,
        histogram_density=density,
        mean_blocking=mean_blocking,
    )


class CrossoverEstimate(BoseFieldBaseModel):
    """Temperature of maximum condensate-occupation variance."""

    temperature: float
    variance: float
    at_edge: bool


def crossover_temperature(temperatures: NDArray, variances: NDArray) -> CrossoverEstimate:
    """Locate the variance maximum by a parabola through the three highest points.

    A maximum at either end of the table cannot be bracketed; the edge temperature is then
    returned with `at_edge` set.
    """
    temperatures = np.asarray(temperatures, dtype=np.float64)
    variances = np.asarray(variances, dtype=np.float64)
    if temperatures.size < 3 or temperatures.shape != variances.shape:
        msg = "crossover_temperature needs >= 3 matching (T, variance) points"
        raise BFInvalidParameter(msg)
    order = np.argsort(temperatures)
    temperatures = temperatures[order]
    variances = variances[order]
    k = int(np.argmax(variances))
    if k == 0 or k == temperatures.size - 1:
        logger.warning(
            "Variance maximum at the edge of the temperature table (T={}); not bracketed",
            temperatures[k],
        )
        return CrossoverEstimate(
            temperature=float(temperatures[k]), variance=float(variances[k]), at_edge=True
        )

    x = temperatures[k - 1 : k + 2]
    y = variances[k - 1 : k + 2]
    a, b, c = np.polyfit(x, y, 2)
    if a >= 0:
        return CrossoverEstimate(
            temperature=float(temperatures[k]), variance=float(variances[k]), at_edge=False
        )
    vertex = -b / (2.0 * a)
    return CrossoverEstimate(
        temperature=float(vertex), variance=float(c - b * b / (4.0 * a)), at_edge=False
    )


def _profile_chunks(stream: SampleStream, basis: BasisTable) -> Iterator[NDArray]:
    if stream.n_modes != basis.n_modes:
        msg = f"Stream has {stream.n_modes} modes, basis has {basis.n_modes}"
        raise BFInvalidParameter(msg)
    for start in range(0, len(stream), PROFILE_CHUNK):
        yield synthesize_profile(stream.snapshots[start : start + PROFILE_CHUNK], basis)


def _batch_slices(count: int, batches: int) -> list[slice]:
    batches = max(1, min(batches, count))
    bounds = np.linspace(0, count, batches + 1).astype(int)
    return [slice(int(lo), int(hi)) for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]


class CorrelationProfile(BoseFieldBaseModel):
    """First-order correlation across the trap center and the condensate density."""

    positions: Annotated[NDArray, Field(description="x >= 0; the separation is 2x")]
    g1: NDArray
    g1_error: NDArray
    condensate_density: Annotated[NDArray, Field(description="rescaled to 1 at x = 0")]
    total_density: Annotated[NDArray, Field(description="<|Psi(x)|^2>, atoms per length")]
    symmetric_denominator: bool

    @model_validator(mode="after")
    def check_origin(self) -> "CorrelationProfile":
        if self.positions[0] != 0.0 or self.g1[0] != 1.0:
            msg = "g1 must start at x = 0 with g1(0) = 1"
            raise ValueError(msg)
        return self

    def coherence_length(self) -> float:
        """Return the FWHM of g1 as a function of x."""
        return symmetric_fwhm(self.positions, self.g1)

    def condensate_length(self) -> float:
        """Return the FWHM of the condensate density."""
        return symmetric_fwhm(self.positions, self.condensate_density)


def g1_profile(
    stream: SampleStream,
    basis: BasisTable,
    decomposition: CondensateDecomposition | None = None,
    symmetric: bool = False,
) -> CorrelationProfile:
    """Return g1(-x, x) = <Psi*(-x) Psi(x)> / <|Psi(x)|^2> for x >= 0.

    With `symmetric` the denominator is sqrt(<|Psi(-x)|^2> <|Psi(x)|^2>). Errors come from
    batch means over contiguous blocks of snapshots.
    """
    if len(stream) == 0:
        msg = "Cannot compute g1 from an empty stream"
        raise BFInsufficientData(msg)
    grid = basis.grid
    center = grid.center_index
    right = np.arange(center, grid.size)
    left = center - (right - center)

    count = len(stream)
    numerator = np.zeros(right.size, dtype=np.complex128)
    density = np.zeros(grid.size)
    batch_num = []
    batch_den = []
    slices = _batch_slices(count, BATCHES)
    offset = 0
    for chunk in _profile_chunks(stream, basis):
        num = chunk[:, left].conj() * chunk[:, right]
        dens = chunk.real**2 + chunk.imag**2
        numerator += num.sum(axis=0)
        density += dens.sum(axis=0)
        for sl in slices:
            lo = max(sl.start - offset, 0)
            hi = min(sl.stop - offset, chunk.shape[0])
            if hi > lo:
                batch_num.append((sl.start, num[lo:hi].real.sum(axis=0), hi - lo))
                batch_den.append((sl.start, dens[lo:hi].sum(axis=0), hi - lo))
        offset += chunk.shape[0]

    numerator /= count
    density /= count
    denominator = _g1_denominator(density, left, right, symmetric)
    g1 = numerator.real / denominator
    g1[0] = 1.0
    g1_error = _g1_batch_error(batch_num, batch_den, left, right, symmetric)

    if decomposition is None:
        decomposition = diagonalize(accumulate_density_matrix(stream))
    condensate = synthesize_profile(decomposition.condensate_vector, basis)
    condensate_density = decomposition.condensate_occupation * np.abs(condensate[right]) ** 2
    # An odd condensate vanishes at the center; fall back to its maximum.
    reference = condensate_density[0] if condensate_density[0] > 0 else condensate_density.max()
    condensate_density = condensate_density / reference
    return CorrelationProfile(
        positions=np.asarray(grid.points[right]),
        g1=g1,
        g1_error=g1_error,
        condensate_density=condensate_density,
        total_density=density[right],
        symmetric_denominator=symmetric,
    )


def _g1_denominator(density: NDArray, left: NDArray, right: NDArray, symmetric: bool) -> NDArray:
    if symmetric:
        return np.sqrt(density[left] * density[right])
    return density[right]


def _g1_batch_error(
    batch_num: list, batch_den: list, left: NDArray, right: NDArray, symmetric: bool
) -> NDArray:
    """Return the batch-means standard error of g1 at every x >= 0."""
    merged_num: dict[int, list] = {}
    merged_den: dict[int, list] = {}
    for key, values, n in batch_num:
        entry = merged_num.setdefault(key, [0.0, 0])
        entry[0] = entry[0] + values
        entry[1] += n
    for key, values, n in batch_den:
        entry = merged_den.setdefault(key, [0.0, 0])
        entry[0] = entry[0] + values
        entry[1] += n
    ratios = []
    for key in sorted(merged_num):
        num, n = merged_num[key]
        den, _ = merged_den[key]
        ratios.append((num / n) / _g1_denominator(den / n, left, right, symmetric))
    if len(ratios) < 2:
        return np.zeros(right.size)
    stacked = np.array(ratios)
    error = stacked.std(axis=0, ddof=1) / math.sqrt(stacked.shape[0])
    error[0] = 0.0
    return error


def _crossing(x0: float, y0: float, x1: float, y1: float, level: float) -> float:
    return x0 + (level - y0) * (x1 - x0) / (y1 - y0)


def fwhm(positions: NDArray, values: NDArray) -> float:
    """Return the full width at half maximum of a single-peaked sampled profile.

    The half-maximum crossings on each side of the peak are located by linear
    interpolation between the bracketing grid points.
    """
    positions = np.asarray(positions, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    k = int(np.argmax(values))
    if k == 0 or k == values.size - 1:
        msg = "Profile maximum lies on the grid edge"
        raise BFProfileError(msg)
    half = 0.5 * values[k]

    lo = k
    while lo > 0 and values[lo] >= half:
        lo -= 1
    hi = k
    while hi < values.size - 1 and values[hi] >= half:
        hi += 1
    if values[lo] >= half or values[hi] >= half:
        msg = "No half-maximum crossing inside the grid; increase extent_factor"
        raise BFProfileError(msg)
    x_left = _crossing(positions[lo], values[lo], positions[lo + 1], values[lo + 1], half)
    x_right = _crossing(positions[hi - 1], values[hi - 1], positions[hi], values[hi], half)
    return float(x_right - x_left)


def symmetric_fwhm(positions: NDArray, values: NDArray) -> float:
    """Return the FWHM of an even profile given on x >= 0, with its maximum at x = 0."""
    positions = np.asarray(positions, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    half = 0.5 * values[0]
    below = np.nonzero(values < half)[0]
    if below.size == 0:
        msg = "No half-maximum crossing inside the grid; increase extent_factor"
        raise BFProfileError(msg)
    k = int(below[0])
    return 2.0 * _crossing(positions[k - 1], values[k - 1], positions[k], values[k], half)


def _density_series(stream: SampleStream, basis: BasisTable, index: int) -> NDArray:
    if stream.n_modes != basis.n_modes:
        msg = f"Stream has {stream.n_modes} modes, basis has {basis.n_modes}"
        raise BFInvalidParameter(msg)
    profile = stream.snapshots @ basis.values[:, index]
    return profile.real**2 + profile.imag**2


class LocalFluctuation(BoseFieldBaseModel):
    """Normalized density fluctuation at one position."""

    position: float
    value: float
    error: float
    mean_density: float
    displayed_form: Annotated[
        float, Field(description="the literal (<n^2> - <n>) / <n>^2 variant, for reference")
    ]
    definition: str = FLUCTUATION_DEFINITION


def local_fluctuation_estimate(
    stream: SampleStream, basis: BasisTable, position: float = 0.0
) -> LocalFluctuation:
    """Return the normalized variance of n = |Psi(x)|^2 with a blocked error."""
    index = basis.grid.index_of(position)
    n = _density_series(stream, basis, index)
    if n.size == 0:
        msg = "Cannot compute fluctuations from an empty stream"
        raise BFInsufficientData(msg)
    mean = float(np.mean(n))
    if mean == 0.0:
        msg = f"Mean density vanishes at x={position}"
        raise BFNumericalError(msg)
    second = float(np.mean(n * n))
    value = (second - mean * mean) / (mean * mean)
    error = 0.0
    if n.size >= 2:
        # Linearized influence of each sample on <n^2> / <n>^2.
        influence = n * n / mean**2 - 2.0 * second * n / mean**3
        error = blocking_analysis(influence).error
    return LocalFluctuation(
        position=position,
        value=value,
        error=error,
        mean_density=mean,
        displayed_form=(second - mean) / (mean * mean),
    )


def local_density_fluctuations(
    stream: SampleStream, basis: BasisTable, position: float = 0.0
) -> float:
    """Return (<n^2> - <n>^2) / <n>^2 at `position`."""
    return local_fluctuation_estimate(stream, basis, position).value


class DensityFluctuationProfile(BoseFieldBaseModel):
    """Normalized density fluctuations against local density for x >= 0."""

    positions: NDArray
    mean_density: NDArray
    normalized_variance: NDArray


def density_fluctuation_profile(
    stream: SampleStream, basis: BasisTable
) -> DensityFluctuationProfile:
    """Return <n(x)> and the normalized variance of n(x) at every x >= 0."""
    if len(stream) == 0:
        msg = "Cannot compute fluctuations from an empty stream"
        raise BFInsufficientData(msg)
    grid = basis.grid
    right = np.arange(grid.center_index, grid.size)
    first = np.zeros(right.size)
    second = np.zeros(right.size)
    for chunk in _profile_chunks(stream, basis):
        dens = chunk[:, right].real ** 2 + chunk[:, right].imag ** 2
        first += dens.sum(axis=0)
        second += (dens * dens).sum(axis=0)
    first /= len(stream)
    second /= len(stream)
    with np.errstate(divide="ignore", invalid="ignore"):
        normalized = np.where(first > 0, (second - first**2) / first**2, np.nan)
    return DensityFluctuationProfile(
        positions=np.asarray(grid.points[right]),
        mean_density=first,
        normalized_variance=normalized,
    )

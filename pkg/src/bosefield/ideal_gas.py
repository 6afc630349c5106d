"""Exact quantum and classical-field statistics of the ideal gas in a 1D harmonic trap.

Energies are counted from the zero point, so level l of the trap costs l quanta and
xi = exp(-1 / T) is the Boltzmann factor of one quantum.
"""

import math
from enum import StrEnum
from itertools import combinations_with_replacement

import numpy as np
from numpy.typing import NDArray
from pydantic import Field, model_validator
from scipy import integrate
from scipy.special import gammaln
from typing_extensions import Annotated

from bosefield.exceptions import BFInvalidParameter
from bosefield.models import BoseFieldBaseModel

ENUMERATION_TAIL = 1e-15
MAX_BRUTE_FORCE_CUTOFF = 4
MAX_ENUMERATED_ATOMS = 6
DEFAULT_SUPPORT_POINTS = 2001


class DistributionKind(StrEnum):
    """Whether a distribution is a discrete probability or a continuous density."""

    QUANTUM = "quantum"
    CLASSICAL = "classical"


class IdealGasDistribution(BoseFieldBaseModel):
    """Reference distribution of the number of excited atoms N_ex."""

    atoms: Annotated[int, Field(ge=1)]
    temperature: Annotated[float, Field(gt=0)]
    kind: DistributionKind
    cutoff: Annotated[int | None, Field(description="highest classical mode K")] = None
    support: Annotated[NDArray, Field(description="N_ex values, integers for quantum")]
    probabilities: Annotated[NDArray, Field(description="P(N_ex) or the density p(N_ex)")]
    printed_form: Annotated[
        NDArray | None, Field(description="closed form without the Jacobian factor")
    ] = None

    @model_validator(mode="after")
    def check_shapes(self) -> "IdealGasDistribution":
        if self.support.shape != self.probabilities.shape:
            msg = "support and probabilities must have the same shape"
            raise ValueError(msg)
        if self.kind == DistributionKind.CLASSICAL and self.cutoff is None:
            msg = "classical distributions need the cutoff K"
            raise ValueError(msg)
        return self

    @property
    def xi(self) -> float:
        """Return exp(-1 / T)."""
        return math.exp(-1.0 / self.temperature)

    def total(self) -> float:
        """Return the sum (quantum) or the trapezoid integral (classical) of the distribution."""
        if self.kind == DistributionKind.QUANTUM:
            return float(np.sum(self.probabilities))
        return float(integrate.trapezoid(self.probabilities, self.support))

    def _expectation(self, values: NDArray) -> float:
        if self.kind == DistributionKind.QUANTUM:
            return float(np.sum(values * self.probabilities))
        return float(integrate.trapezoid(values * self.probabilities, self.support))

    def mean_excited(self) -> float:
        return self._expectation(self.support)

    def variance(self) -> float:
        """Return Var(N_ex), equal to Var(N_0)."""
        mean = self.mean_excited()
        return self._expectation((self.support - mean) ** 2)

    def mean_condensate(self) -> float:
        return self.atoms - self.mean_excited()

    def cdf(self) -> NDArray[np.float64]:
        """Return the cumulative distribution at each support point."""
        if self.kind == DistributionKind.QUANTUM:
            return np.cumsum(self.probabilities)
        return integrate.cumulative_trapezoid(self.probabilities, self.support, initial=0.0)


def _check_positive(atoms: int, temperature: float) -> None:
    if atoms < 1:
        msg = f"N must be >= 1, got {atoms}"
        raise BFInvalidParameter(msg)
    if temperature <= 0:
        msg = f"T must be > 0, got {temperature}"
        raise BFInvalidParameter(msg)


def _log1m_xi_power(power: NDArray | float, temperature: float) -> NDArray:
    """Return log(1 - xi^power) for power > 0."""
    return np.log(-np.expm1(-np.asarray(power, dtype=np.float64) / temperature))


def exact_log_partition(atoms: int, temperature: float) -> float:
    """Return log Z_N = -sum_{l=1}^{N} log(1 - xi^l) of N bosons in the 1D trap."""
    _check_positive(atoms, temperature)
    levels = np.arange(1, atoms + 1)
    return float(-np.sum(_log1m_xi_power(levels, temperature)))


def exact_pnex(atoms: int, temperature: float) -> IdealGasDistribution:
    """Return the exact canonical distribution of N_ex.

    P(N_ex) = xi^{N_ex} prod_{l = N_ex + 1}^{N} (1 - xi^l), evaluated in log space.
    """
    _check_positive(atoms, temperature)
    logs = _log1m_xi_power(np.arange(1, atoms + 1), temperature)
    # suffix[n] = sum_{l > n} log(1 - xi^l); suffix[N] = 0
    suffix = np.zeros(atoms + 1)
    suffix[:-1] = np.cumsum(logs[::-1])[::-1]
    support = np.arange(atoms + 1, dtype=np.float64)
    probabilities = np.exp(-support / temperature + suffix)
    return IdealGasDistribution(
        atoms=atoms,
        temperature=temperature,
        kind=DistributionKind.QUANTUM,
        support=support,
        probabilities=probabilities,
    )


def enumerate_pnex(atoms: int, temperature: float) -> IdealGasDistribution:
    """Return P(N_ex) by direct summation over N-boson microstates.

    Levels are truncated at the first L with xi^L < 1e-15. Only meant as an oracle for
    small N.
    """
    _check_positive(atoms, temperature)
    if atoms > MAX_ENUMERATED_ATOMS:
        msg = f"Enumeration is limited to N <= {MAX_ENUMERATED_ATOMS}, got {atoms}"
        raise BFInvalidParameter(msg)
    max_level = math.ceil(-math.log(ENUMERATION_TAIL) * temperature)
    weights = np.zeros(atoms + 1)
    for state in combinations_with_replacement(range(max_level + 1), atoms):
        excited = sum(1 for level in state if level > 0)
        weights[excited] += math.exp(-sum(state) / temperature)
    return IdealGasDistribution(
        atoms=atoms,
        temperature=temperature,
        kind=DistributionKind.QUANTUM,
        support=np.arange(atoms + 1, dtype=np.float64),
        probabilities=weights / weights.sum(),
    )


def exact_condensate_moments(atoms: int, temperature: float) -> tuple[float, float]:
    """Return <N_0> and Var(N_0) of the exact canonical ideal gas."""
    distribution = exact_pnex(atoms, temperature)
    return distribution.mean_condensate(), distribution.variance()


def _check_cutoff(cutoff: int, minimum: int) -> None:
    if cutoff < minimum:
        msg = f"K must be >= {minimum}, got {cutoff}"
        raise BFInvalidParameter(msg)


def log_classical_partition(atoms: float, temperature: float, cutoff: int) -> float:
    """Return log Z = K log((1 - xi^N) T) - log K!."""
    _check_cutoff(cutoff, 1)
    if atoms <= 0 or temperature <= 0:
        msg = f"N and T must be positive, got {atoms=} {temperature=}"
        raise BFInvalidParameter(msg)
    log_one_minus = float(_log1m_xi_power(atoms, temperature))
    return cutoff * (log_one_minus + math.log(temperature)) - float(gammaln(cutoff + 1))


def classical_partition(atoms: float, temperature: float, cutoff: int) -> float:
    """Return the classical-field partition function of the ideal gas on K + 1 modes.

    Z = (1 / K!) ((1 - xi^N) T)^K, in units where each mode contributes d|alpha|^2.
    """
    return math.exp(log_classical_partition(atoms, temperature, cutoff))


def brute_force_partition(
    atoms: float, temperature: float, cutoff: int, epsrel: float = 1e-8
) -> float:
    """Integrate exp(-sum_j j n_j / T) over the simplex sum_j n_j = N numerically.

    The occupation n_0 is fixed by the constraint and n_1 is integrated in closed form;
    the remaining K - 1 occupations are integrated with adaptive quadrature.
    """
    _check_cutoff(cutoff, 1)
    if cutoff > MAX_BRUTE_FORCE_CUTOFF:
        msg = f"Brute-force integration is limited to K <= {MAX_BRUTE_FORCE_CUTOFF}"
        raise BFInvalidParameter(msg)
    if atoms <= 0 or temperature <= 0:
        msg = f"N and T must be positive, got {atoms=} {temperature=}"
        raise BFInvalidParameter(msg)

    def first_level(remaining: float) -> float:
        return -temperature * math.expm1(-remaining / temperature)

    if cutoff == 1:
        return first_level(atoms)

    # Variables are n_K, ..., n_2 with n_2 outermost.
    levels = np.arange(cutoff, 1, -1, dtype=np.float64)

    def integrand(*occupations: float) -> float:
        used = sum(occupations)
        weight = math.exp(-float(levels @ np.asarray(occupations)) / temperature)
        return weight * first_level(max(atoms - used, 0.0))

    def bounds(*outer: float) -> list[float]:
        return [0.0, max(atoms - sum(outer), 0.0)]

    value, _ = integrate.nquad(
        integrand, [bounds] * (cutoff - 1), opts={"epsrel": epsrel, "epsabs": 0.0, "limit": 200}
    )
    return float(value)


def log_excited_partition(
    excited: NDArray | float,
    temperature: float,
    cutoff: int,
    include_excitation_energy: bool = True,
) -> NDArray:
    """Return log Z_ex(N_ex) for the K excited classical modes holding N_ex atoms.

    With `include_excitation_energy` the factor xi^{N_ex} of lifting N_ex atoms out of the
    ground mode is part of Z_ex, which makes Z_ex / Z a normalized density over [0, N].
    """
    _check_cutoff(cutoff, 1)
    excited = np.asarray(excited, dtype=np.float64)
    log_value = np.full(excited.shape, -float(gammaln(cutoff)))
    if cutoff > 1:
        with np.errstate(divide="ignore"):
            inner = np.where(
                excited > 0,
                _log1m_xi_power(np.where(excited > 0, excited, 1.0), temperature),
                -np.inf,
            )
        log_value = log_value + (cutoff - 1) * (inner + math.log(temperature))
    if include_excitation_energy:
        log_value = log_value - excited / temperature
    return log_value


def excited_partition(
    excited: NDArray | float,
    temperature: float,
    cutoff: int,
    include_excitation_energy: bool = True,
) -> NDArray:
    """Return Z_ex(N_ex) = xi^{N_ex} ((1 - xi^{N_ex}) T)^{K-1} / (K-1)!."""
    return np.exp(log_excited_partition(excited, temperature, cutoff, include_excitation_energy))


def printed_classical_density(
    atoms: float, temperature: float, cutoff: int, excited: NDArray
) -> NDArray:
    """Return (1 / (1 - xi^N)) ((1 - xi^{N_ex}) / (1 - xi^N))^{K-1} (K / T).

    This closed form lacks the xi^{N_ex} factor and is not a normalized density over [0, N].
    """
    excited = np.asarray(excited, dtype=np.float64)
    one_minus_total = -math.expm1(-atoms / temperature)
    ratio = -np.expm1(-excited / temperature) / one_minus_total
    return ratio ** (cutoff - 1) * cutoff / (temperature * one_minus_total)


def classical_pnex(
    atoms: int, temperature: float, cutoff: int, points: int = DEFAULT_SUPPORT_POINTS
) -> IdealGasDistribution:
    """Return the classical-field density of N_ex on a uniform grid over [0, N].

    The density is Z_ex(N_ex) / Z, renormalized by the trapezoid rule on the grid. It needs
    at least two excited modes.
    """
    _check_positive(atoms, temperature)
    _check_cutoff(cutoff, 2)
    if points < 3:
        msg = f"Need at least 3 support points, got {points}"
        raise BFInvalidParameter(msg)
    support = np.linspace(0.0, float(atoms), points)
    log_density = log_excited_partition(support, temperature, cutoff) - log_classical_partition(
        atoms, temperature, cutoff
    )
    density = np.exp(log_density)
    density /= integrate.trapezoid(density, support)
    return IdealGasDistribution(
        atoms=atoms,
        temperature=temperature,
        kind=DistributionKind.CLASSICAL,
        cutoff=cutoff,
        support=support,
        probabilities=density,
        printed_form=printed_classical_density(atoms, temperature, cutoff, support),
    )


def classical_excited_moments(
    atoms: int, temperature: float, cutoff: int
) -> tuple[float, float]:
    """Return <N_ex> and Var(N_ex) of the classical-field ideal gas by adaptive quadrature."""
    _check_positive(atoms, temperature)
    log_z = log_classical_partition(atoms, temperature, cutoff)

    def density(x: float) -> float:
        return float(np.exp(log_excited_partition(x, temperature, cutoff) - log_z))

    scale = min(float(atoms), temperature)
    breakpoints = [p for p in (scale, 10 * scale) if p < atoms]
    options = {"points": breakpoints, "limit": 200, "epsabs": 0.0, "epsrel": 1e-10}
    norm, _ = integrate.quad(density, 0.0, atoms, **options)
    first, _ = integrate.quad(lambda x: x * density(x), 0.0, atoms, **options)
    second, _ = integrate.quad(lambda x: x * x * density(x), 0.0, atoms, **options)
    mean = first / norm
    return mean, second / norm - mean * mean


def cdf_distance(samples: NDArray, reference: IdealGasDistribution) -> float:
    """Return the sup-norm distance between the empirical CDF of `samples` and `reference`."""
    samples = np.sort(np.asarray(samples, dtype=np.float64))
    if samples.size == 0:
        msg = "Need at least one sample"
        raise BFInvalidParameter(msg)
    empirical = np.searchsorted(samples, reference.support, side="right") / samples.size
    return float(np.max(np.abs(empirical - reference.cdf())))

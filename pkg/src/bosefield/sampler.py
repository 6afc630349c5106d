"""Metropolis sampling of the canonical classical-field ensemble on the fixed-N shell.

The move set is a two-mode SU(2) rotation

    alpha_i' =  cos(theta) alpha_i + e^{i phi} sin(theta) alpha_j
    alpha_j' = -e^{-i phi} sin(theta) alpha_i + cos(theta) alpha_j

which preserves |alpha_i|^2 + |alpha_j|^2 exactly and is its own inverse under theta -> -theta.
The proposal is therefore symmetric and volume preserving on the shell, and plain Metropolis
acceptance targets exp(-E / T).
"""

import cmath
import math
from enum import StrEnum
from typing import Iterable, NamedTuple

import numpy as np
from loguru import logger
from numpy.typing import NDArray
from pydantic import Field, model_validator
from typing_extensions import Annotated

from bosefield.basis import BasisTable, build_basis, build_grid, synthesize_profile
from bosefield.exceptions import BFFrozenSystem, BFInvalidParameter, BFNumericalError
from bosefield.field import (
    EnergyBreakdown,
    FieldConfiguration,
    ModelParams,
    interaction_energy_from_profile,
    total_energy,
)
from bosefield.models import BoseFieldBaseModel

CACHE_TOLERANCE = 1e-7
REFRESH_INTERVAL = 10_000
BLOCK_SIZE = 4096
MIN_THETA_SCALE = 1e-8


class InitMode(StrEnum):
    """Starting configuration of a chain."""

    GROUND = "ground"
    THERMAL_RANDOM = "thermal-random"


class MoveParams(BoseFieldBaseModel):
    """Tuning of the two-mode rotation proposal."""

    theta_scale: Annotated[float, Field(gt=0, le=math.pi / 2)] = 0.3
    phase_scale: Annotated[float, Field(gt=0, le=math.pi)] = math.pi
    target_acceptance: Annotated[float, Field(gt=0, lt=1)] = 0.5
    adaptation_interval: Annotated[int, Field(ge=1)] = 1000


class TwoModeCandidate(NamedTuple):
    """Proposed new amplitudes for the pair (i, j)."""

    i: int
    j: int
    alpha_i: complex
    alpha_j: complex


class StreamMetadata(BoseFieldBaseModel):
    """Everything needed to reproduce one chain bit-exactly."""

    seed: int
    n_steps: int
    burn_in: int
    thinning: int
    init: InitMode
    params: ModelParams
    move_params: MoveParams
    final_theta_scale: float
    acceptance_rate: Annotated[float, Field(description="post burn-in acceptance")]


class SampleStream(BoseFieldBaseModel):
    """Thinned snapshots of one or more chains."""

    snapshots: NDArray
    kinetic_potential: NDArray
    interaction: NDArray
    metadata: list[StreamMetadata]

    @model_validator(mode="after")
    def check_shapes(self) -> "SampleStream":
        count = self.snapshots.shape[0]
        if self.kinetic_potential.shape != (count,) or self.interaction.shape != (count,):
            msg = "Energy arrays must have one entry per snapshot"
            raise ValueError(msg)
        return self

    def __len__(self) -> int:
        return int(self.snapshots.shape[0])

    @property
    def params(self) -> ModelParams:
        """Return the model parameters shared by all merged chains."""
        return self.metadata[0].params

    @property
    def n_modes(self) -> int:
        return int(self.snapshots.shape[1])

    def configuration(self, index: int) -> FieldConfiguration:
        """Return snapshot `index` as a FieldConfiguration."""
        return FieldConfiguration(amplitudes=self.snapshots[index])

    def energy(self, index: int) -> EnergyBreakdown:
        """Return the energy recorded with snapshot `index`."""
        return EnergyBreakdown.from_terms(
            float(self.kinetic_potential[index]), float(self.interaction[index])
        )

    def check_norms(self, rtol: float = 1e-9) -> None:
        """Raise if any snapshot left the N shell."""
        atoms = self.params.atoms
        norms = np.sum(self.snapshots.real**2 + self.snapshots.imag**2, axis=1)
        worst = float(np.max(np.abs(norms - atoms))) if norms.size else 0.0
        if worst > rtol * atoms:
            msg = f"Snapshot norm deviates from N={atoms} by {worst}"
            raise BFNumericalError(msg)


def merge_streams(streams: Iterable[SampleStream]) -> SampleStream:
    """Concatenate streams of independent chains.

    Streams are ordered by seed before concatenation, so the result does not depend on the
    order in which chains finished.
    """
    ordered = sorted(streams, key=lambda s: [m.seed for m in s.metadata])
    if not ordered:
        msg = "Cannot merge an empty collection of streams"
        raise BFInvalidParameter(msg)
    params = ordered[0].params
    for stream in ordered[1:]:
        if stream.params != params:
            msg = "Cannot merge streams with different model parameters"
            raise BFInvalidParameter(msg)
    return SampleStream(
        snapshots=np.concatenate([s.snapshots for s in ordered]),
        kinetic_potential=np.concatenate([s.kinetic_potential for s in ordered]),
        interaction=np.concatenate([s.interaction for s in ordered]),
        metadata=[m for s in ordered for m in s.metadata],
    )


def init_configuration(
    params: ModelParams, mode: InitMode | str, rng: np.random.Generator
) -> FieldConfiguration:
    """Return a starting configuration on the N shell."""
    match InitMode(mode):
        case InitMode.GROUND:
            return FieldConfiguration.ground(params)
        case InitMode.THERMAL_RANDOM:
            amplitudes = rng.standard_normal(params.n_modes) + 1j * rng.standard_normal(
                params.n_modes
            )
            amplitudes *= math.sqrt(params.atoms / np.sum(np.abs(amplitudes) ** 2))
            return FieldConfiguration(amplitudes=amplitudes)


def rotate_pair(
    alpha_i: complex, alpha_j: complex, theta: float, phi: float
) -> tuple[complex, complex]:
    """Apply the two-mode unitary to (alpha_i, alpha_j)."""
    c = math.cos(theta)
    s = math.sin(theta)
    phase = cmath.exp(1j * phi)
    return (
        c * alpha_i + phase * s * alpha_j,
        -phase.conjugate() * s * alpha_i + c * alpha_j,
    )


def draw_pair(n_modes: int, rng: np.random.Generator) -> tuple[int, int]:
    """Draw an ordered pair i != j uniformly."""
    i = int(rng.integers(n_modes))
    j = int(rng.integers(n_modes - 1))
    return i, j + (j >= i)


def metropolis_accept(delta_energy: float, temperature: float, uniform: float) -> bool:
    """Return True if a move with energy change `delta_energy` is accepted.

    A temperature of 0 accepts strictly downhill moves only.
    """
    if temperature <= 0:
        return delta_energy < 0
    if delta_energy <= 0:
        return True
    return uniform < math.exp(-delta_energy / temperature)


class ChainState:
    """Mutable state of one Markov chain with cached profile and energy."""

    def __init__(
        self,
        config: FieldConfiguration,
        basis: BasisTable,
        params: ModelParams,
        rng: np.random.Generator,
    ) -> None:
        if config.n_modes != params.n_modes or basis.n_modes != params.n_modes:
            msg = (
                f"Mode count mismatch: config {config.n_modes}, basis {basis.n_modes}, "
                f"params {params.n_modes}"
            )
            raise BFInvalidParameter(msg)
        self.config = config.clone()
        self.basis = basis
        self.params = params
        self.rng = rng
        self.step_count = 0
        self.accept_count = 0
        self._accepted_since_refresh = 0
        self._tracks_profile = params.coupling > 0
        self.profile_cache: NDArray = np.zeros(basis.grid.size, dtype=np.complex128)
        self._kinetic_potential = 0.0
        self._interaction = 0.0
        self.refresh()

    @property
    def energy_cache(self) -> EnergyBreakdown:
        """Return the cached energy."""
        return EnergyBreakdown.from_terms(self._kinetic_potential, self._interaction)

    @property
    def energy_terms(self) -> tuple[float, float]:
        """Return the cached (kinetic_potential, interaction) pair."""
        return self._kinetic_potential, self._interaction

    @property
    def acceptance_rate(self) -> float:
        return self.accept_count / self.step_count if self.step_count else 0.0

    def refresh(self) -> None:
        """Resynthesize the profile and recompute the energy from scratch."""
        self.profile_cache = synthesize_profile(self.config.amplitudes, self.basis)
        fresh = total_energy(self.config, self.basis, self.params)
        if self.step_count:
            drift = abs(fresh.total - (self._kinetic_potential + self._interaction))
            logger.trace("Energy cache drift {:.3e} after {} steps", drift, self.step_count)
        self._kinetic_potential = fresh.kinetic_potential
        self._interaction = fresh.interaction
        self._accepted_since_refresh = 0

    def energy_change(self, candidate: TwoModeCandidate) -> tuple[float, NDArray | None, float]:
        """Return (oscillator energy change, trial profile, trial interaction) for `candidate`."""
        i, j, new_i, new_j = candidate
        amplitudes = self.config.amplitudes
        old_i = complex(amplitudes[i])
        old_j = complex(amplitudes[j])
        delta = i * (abs(new_i) ** 2 - abs(old_i) ** 2) + j * (abs(new_j) ** 2 - abs(old_j) ** 2)
        if not self._tracks_profile:
            return delta, None, 0.0
        values = self.basis.values
        trial = self.profile_cache + (new_i - old_i) * values[i] + (new_j - old_j) * values[j]
        trial_interaction = interaction_energy_from_profile(
            trial, self.basis.grid, self.params.coupling
        )
        return delta, trial, trial_interaction

    def apply(self, candidate: TwoModeCandidate, uniform: float, temperature: float) -> bool:
        """Accept or reject `candidate` and update counters and caches."""
        delta_osc, trial, trial_interaction = self.energy_change(candidate)
        delta = delta_osc + (trial_interaction - self._interaction if trial is not None else 0.0)
        if not math.isfinite(delta):
            msg = (
                f"Non-finite energy change {delta} at step {self.step_count} for modes "
                f"({candidate.i}, {candidate.j}); quadrature or cache is corrupted"
            )
            raise BFNumericalError(msg)
        self.step_count += 1
        if not metropolis_accept(delta, temperature, uniform):
            return False

        amplitudes = self.config.amplitudes
        amplitudes[candidate.i] = candidate.alpha_i
        amplitudes[candidate.j] = candidate.alpha_j
        self._kinetic_potential += delta_osc
        if trial is not None:
            self.profile_cache = trial
            self._interaction = trial_interaction
        self.accept_count += 1
        self._accepted_since_refresh += 1
        if self._accepted_since_refresh >= REFRESH_INTERVAL:
            self.refresh()
        return True

    def candidate(self, i: int, j: int, theta: float, phi: float) -> TwoModeCandidate:
        amplitudes = self.config.amplitudes
        new_i, new_j = rotate_pair(complex(amplitudes[i]), complex(amplitudes[j]), theta, phi)
        return TwoModeCandidate(i, j, new_i, new_j)


def propose_two_mode_rotation(
    state: ChainState, mp: MoveParams, rng: np.random.Generator
) -> TwoModeCandidate:
    """Draw a random pair and rotation and return the candidate amplitudes."""
    n_modes = state.config.n_modes
    if n_modes < 2:
        msg = "A single-mode system has no moves"
        raise BFFrozenSystem(msg)
    i, j = draw_pair(n_modes, rng)
    theta = rng.uniform(-mp.theta_scale, mp.theta_scale)
    phi = rng.uniform(-mp.phase_scale, mp.phase_scale)
    return state.candidate(i, j, theta, phi)


def metropolis_step(state: ChainState, params: ModelParams, mp: MoveParams) -> ChainState:
    """Advance `state` by one Metropolis step at temperature params.temperature."""
    if params.temperature <= 0:
        msg = "metropolis_step needs T > 0; use minimize_energy for T = 0"
        raise BFInvalidParameter(msg)
    candidate = propose_two_mode_rotation(state, mp, state.rng)
    state.apply(candidate, float(state.rng.random()), params.temperature)
    return state


class _ProposalBlock:
    """Pre-drawn random numbers for a block of steps.

    Angles are stored in units of the current scale so that adaptation can change the scale
    between steps of a block.
    """

    def __init__(self, rng: np.random.Generator, n_modes: int, size: int) -> None:
        self.i = rng.integers(n_modes, size=size)
        j = rng.integers(n_modes - 1, size=size)
        self.j = j + (j >= self.i)
        self.theta = rng.uniform(-1.0, 1.0, size=size)
        self.phi = rng.uniform(-1.0, 1.0, size=size)
        self.uniform = rng.random(size=size)


def _adapt(theta_scale: float, rate: float, target: float, count: int) -> float:
    """Robbins-Monro update of the rotation scale toward the target acceptance."""
    gain = 1.0 / math.sqrt(count + 1)
    updated = theta_scale * math.exp(gain * (rate - target))
    return min(max(updated, MIN_THETA_SCALE), math.pi / 2)


def _basis_for(params: ModelParams, basis: BasisTable | None) -> BasisTable:
    if basis is None:
        return build_basis(params.cutoff, build_grid(params.cutoff))
    if basis.n_modes != params.n_modes:
        msg = f"Basis has {basis.n_modes} modes, params require {params.n_modes}"
        raise BFInvalidParameter(msg)
    return basis


def run_chain(
    params: ModelParams,
    mp: MoveParams,
    n_steps: int,
    burn_in: int,
    thinning: int,
    seed: int,
    basis: BasisTable | None = None,
    init: InitMode | str = InitMode.THERMAL_RANDOM,
) -> SampleStream:
    """Run one chain and return its thinned post burn-in snapshots.

    The rotation scale adapts toward mp.target_acceptance during burn-in only and is frozen
    afterwards. The stream is a deterministic function of the arguments.
    """
    if params.temperature <= 0:
        msg = "run_chain needs T > 0; use minimize_energy for T = 0"
        raise BFInvalidParameter(msg)
    if thinning < 1 or burn_in < 0 or n_steps <= burn_in:
        msg = f"Inconsistent schedule: {n_steps=}, {burn_in=}, {thinning=}"
        raise BFInvalidParameter(msg)
    if params.n_modes < 2:
        msg = "A single-mode system has no moves"
        raise BFFrozenSystem(msg)

    basis = _basis_for(params, basis)
    rng = np.random.default_rng(seed)
    state = ChainState(init_configuration(params, init, rng), basis, params, rng)
    n_snapshots = (n_steps - burn_in) // thinning
    snapshots = np.empty((n_snapshots, params.n_modes), dtype=np.complex128)
    kinetic_potential = np.empty(n_snapshots)
    interaction = np.empty(n_snapshots)

    theta_scale = mp.theta_scale
    phase_scale = mp.phase_scale
    temperature = params.temperature
    window_accepts = 0
    adaptations = 0
    accepts_at_burn_in = 0
    recorded = 0
    step = 0
    while step < n_steps:
        block = _ProposalBlock(rng, params.n_modes, min(BLOCK_SIZE, n_steps - step))
        for k in range(block.i.size):
            candidate = state.candidate(
                int(block.i[k]),
                int(block.j[k]),
                theta_scale * block.theta[k],
                phase_scale * block.phi[k],
            )
            accepted = state.apply(candidate, float(block.uniform[k]), temperature)
            step += 1
            if step <= burn_in:
                window_accepts += accepted
                if step % mp.adaptation_interval == 0:
                    rate = window_accepts / mp.adaptation_interval
                    theta_scale = _adapt(theta_scale, rate, mp.target_acceptance, adaptations)
                    adaptations += 1
                    window_accepts = 0
                if step == burn_in:
                    accepts_at_burn_in = state.accept_count
                    logger.debug(
                        "Seed {}: burn-in done, theta_scale={:.4g}, acceptance={:.3f}",
                        seed,
                        theta_scale,
                        state.acceptance_rate,
                    )
            elif (step - burn_in) % thinning == 0 and recorded < n_snapshots:
                snapshots[recorded] = state.config.amplitudes
                kinetic_potential[recorded], interaction[recorded] = state.energy_terms
                recorded += 1

    _check_cache(state)
    acceptance = (state.accept_count - accepts_at_burn_in) / (n_steps - burn_in)
    logger.info(
        "Chain seed={} K={} T={} g={}: {} snapshots, acceptance {:.3f}",
        seed,
        params.cutoff,
        params.temperature,
        params.coupling,
        n_snapshots,
        acceptance,
    )
    metadata = StreamMetadata(
        seed=seed,
        n_steps=n_steps,
        burn_in=burn_in,
        thinning=thinning,
        init=InitMode(init),
        params=params,
        move_params=mp,
        final_theta_scale=theta_scale,
        acceptance_rate=acceptance,
    )
    stream = SampleStream(
        snapshots=snapshots,
        kinetic_potential=kinetic_potential,
        interaction=interaction,
        metadata=[metadata],
    )
    stream.check_norms()
    return stream


def _check_cache(state: ChainState) -> None:
    """Compare the cached energy with a full recomputation."""
    cached = state.energy_cache.total
    fresh = total_energy(state.config, state.basis, state.params).total
    scale = max(abs(fresh), 1.0)
    if abs(cached - fresh) > CACHE_TOLERANCE * scale:
        msg = f"Energy cache drifted: cached {cached}, recomputed {fresh}"
        raise BFNumericalError(msg)


class MinimizationResult(BoseFieldBaseModel):
    """Lowest-energy configuration found by the T = 0 search."""

    config: FieldConfiguration
    energy: EnergyBreakdown
    energy_history: Annotated[NDArray, Field(description="energy sampled every 100 steps")]
    accepted: int


def minimize_energy(
    params: ModelParams,
    mp: MoveParams,
    n_steps: int,
    seed: int,
    basis: BasisTable | None = None,
    final_scale_ratio: float = 1e-4,
) -> MinimizationResult:
    """Search for the minimum of the energy functional on the N shell.

    Only strictly downhill moves are accepted, and the rotation and phase scales shrink
    geometrically from their initial values to `final_scale_ratio` times those values.
    """
    if n_steps < 1:
        msg = f"n_steps must be >= 1, got {n_steps}"
        raise BFInvalidParameter(msg)
    basis = _basis_for(params, basis)
    rng = np.random.default_rng(seed)
    state = ChainState(FieldConfiguration.ground(params), basis, params, rng)
    history = [state.energy_cache.total]
    if params.n_modes < 2:
        logger.warning("Single-mode system: the ground configuration is the only state")
        return MinimizationResult(
            config=state.config,
            energy=state.energy_cache,
            energy_history=np.array(history),
            accepted=0,
        )

    decay = final_scale_ratio ** (1.0 / n_steps)
    theta_scale = mp.theta_scale
    phase_scale = mp.phase_scale
    step = 0
    while step < n_steps:
        block = _ProposalBlock(rng, params.n_modes, min(BLOCK_SIZE, n_steps - step))
        for k in range(block.i.size):
            candidate = state.candidate(
                int(block.i[k]),
                int(block.j[k]),
                theta_scale * block.theta[k],
                phase_scale * block.phi[k],
            )
            state.apply(candidate, 0.0, 0.0)
            theta_scale *= decay
            phase_scale *= decay
            step += 1
            if step % 100 == 0:
                history.append(state.energy_cache.total)

    state.refresh()
    logger.info(
        "Minimized K={} g={}: E={:.6g} after {} accepted moves",
        params.cutoff,
        params.coupling,
        state.energy_cache.total,
        state.accept_count,
    )
    return MinimizationResult(
        config=state.config,
        energy=state.energy_cache,
        energy_history=np.array(history),
        accepted=state.accept_count,
    )

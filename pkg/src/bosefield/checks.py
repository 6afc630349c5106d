"""Self-checks of the numerics against exact oracles."""

import math
import time
from typing import Callable

import numpy as np
from loguru import logger
from rich import print as _pprint
from rich.table import Table
from scipy import stats

from bosefield.basis import build_basis, build_grid
from bosefield.eigensolver import jacobi_eigh
from bosefield.exceptions import BFBaseException
from bosefield.field import ModelParams
from bosefield.gpe import ground_state_grid, imaginary_time_ground_state, thomas_fermi_mu
from bosefield.ideal_gas import (
    brute_force_partition,
    classical_partition,
    enumerate_pnex,
    exact_pnex,
)
from bosefield.models import BoseFieldBaseModel
from bosefield.sampler import MoveParams, metropolis_accept, run_chain

CHECK_SEED = 20240611


class CheckResult(BoseFieldBaseModel):
    """Outcome of one check."""

    name: str
    passed: bool
    detail: str
    elapsed_seconds: float = 0.0


def check_basis_orthonormality(fast: bool) -> tuple[bool, str]:
    worst = 0.0
    for cutoff in (0, 20) if fast else (0, 20, 62, 100):
        basis = build_basis(cutoff, build_grid(cutoff))
        worst = max(worst, float(np.max(np.abs(basis.overlap_matrix() - np.eye(cutoff + 1)))))
    return worst <= 1e-10, f"max orthonormality error {worst:.2e}"


def check_exact_normalization(fast: bool) -> tuple[bool, str]:
    atoms = (1, 2, 10, 100, 500) if fast else range(1, 501)
    temperatures = (1.0, 20.0, 50.0) if fast else range(1, 51)
    worst = 0.0
    for n in atoms:
        for t in temperatures:
            worst = max(worst, abs(exact_pnex(n, float(t)).total() - 1.0))
    return worst <= 1e-12, f"max |sum P - 1| = {worst:.2e}"


def check_exact_enumeration(fast: bool) -> tuple[bool, str]:
    worst = 0.0
    for n in (1, 2, 3) if fast else (1, 2, 3, 4):
        for t in (0.5, 1.0) if fast else (0.5, 1.0, 2.0):
            exact = exact_pnex(n, t).probabilities
            enumerated = enumerate_pnex(n, t).probabilities
            worst = max(worst, float(np.max(np.abs(exact - enumerated))))
    return worst <= 1e-10, f"max deviation from microstate enumeration {worst:.2e}"


def check_partition_chain(fast: bool) -> tuple[bool, str]:
    cutoffs = (1, 2, 3) if fast else (1, 2, 3, 4)
    atoms = (1.0, 3.0, 10.0) if fast else (1.0, 3.0, 10.0, 500.0)
    temperatures = (0.5, 1.0, 5.0, 20.0)
    worst = 0.0
    for k in cutoffs:
        for n in atoms:
            for t in temperatures:
                closed = classical_partition(n, t, k)
                numeric = brute_force_partition(n, t, k)
                worst = max(worst, abs(numeric - closed) / closed)
    return worst <= 1e-5, f"max relative deviation of the closed form {worst:.2e}"


def check_eigensolver(fast: bool) -> tuple[bool, str]:
    rng = np.random.default_rng(CHECK_SEED)
    worst = 0.0
    for size in (2, 8) if fast else (2, 8, 21, 40):
        raw = rng.standard_normal((size, size)) + 1j * rng.standard_normal((size, size))
        matrix = 0.5 * (raw + raw.conj().T)
        values, vectors = jacobi_eigh(matrix)
        rebuilt = (vectors * values) @ vectors.conj().T
        worst = max(worst, float(np.linalg.norm(rebuilt - matrix) / np.linalg.norm(matrix)))
    return worst <= 1e-9, f"max relative reconstruction error {worst:.2e}"


def check_gpe_mu(fast: bool) -> tuple[bool, str]:
    ideal = ModelParams(atoms=500, coupling=0.0, temperature=0.0, cutoff=0)
    state = imaginary_time_ground_state(ideal, ground_state_grid(500, 0.0))
    passed = abs(state.mu - 0.5) <= 1e-6
    detail = f"g=0: mu={state.mu:.8f}"
    if not fast:
        params = ModelParams(atoms=500, coupling=1.0, temperature=0.0, cutoff=0)
        state = imaginary_time_ground_state(params, ground_state_grid(500, 1.0))
        reference = thomas_fermi_mu(500, 1.0)
        relative = abs(state.mu - reference) / reference
        passed = passed and relative <= 0.05
        detail += f"; g=1: mu={state.mu:.4f} vs Thomas-Fermi {reference:.4f}"
    return passed, detail


def check_two_mode_stationarity(fast: bool) -> tuple[bool, str]:
    """With K=1 and g=0 the excited occupation has density exp(-x/T) on [0, N]."""
    atoms, temperature = 10.0, 5.0
    thinning = 100
    samples = 4_000 if fast else 20_000
    burn_in = 10_000
    params = ModelParams(atoms=atoms, coupling=0.0, temperature=temperature, cutoff=1)
    stream = run_chain(
        params, MoveParams(), burn_in + samples * thinning, burn_in, thinning, CHECK_SEED
    )
    excited = np.abs(stream.snapshots[:, 1]) ** 2
    edges = np.linspace(0.0, atoms, 51)
    observed = np.histogram(excited, bins=edges)[0]
    cdf = -np.expm1(-edges / temperature) / -math.expm1(-atoms / temperature)
    expected = np.diff(cdf) * excited.size
    p_value = float(stats.chisquare(observed, expected).pvalue)
    return p_value > 0.01, f"chi-square p-value {p_value:.3f} over 50 bins"


def check_norm_drift(fast: bool) -> tuple[bool, str]:
    steps = 100_000 if fast else 10_000_000
    params = ModelParams(atoms=500.0, coupling=0.1, temperature=10.0, cutoff=12)
    stream = run_chain(params, MoveParams(), steps, steps // 2, steps // 100, CHECK_SEED)
    norms = np.sum(np.abs(stream.snapshots) ** 2, axis=1)
    drift = float(np.max(np.abs(norms - params.atoms)))
    return drift < 1e-6 * params.atoms, f"max norm drift {drift:.2e} after {steps} steps"


def check_acceptance_rate(fast: bool) -> tuple[bool, str]:
    trials = 100_000 if fast else 1_000_000
    rng = np.random.default_rng(CHECK_SEED)
    accepted = sum(metropolis_accept(1.0, 1.0, float(u)) for u in rng.random(trials))
    p = math.exp(-1.0)
    sigma = math.sqrt(trials * p * (1 - p))
    deviation = abs(accepted - trials * p) / sigma
    return deviation <= 3.0, f"acceptance at dE = T deviates by {deviation:.2f} sigma"


def check_determinism(fast: bool) -> tuple[bool, str]:
    params = ModelParams(atoms=100.0, coupling=0.5, temperature=5.0, cutoff=6)
    steps = 5_000 if fast else 50_000
    first = run_chain(params, MoveParams(), steps, steps // 2, 10, CHECK_SEED)
    second = run_chain(params, MoveParams(), steps, steps // 2, 10, CHECK_SEED)
    identical = np.array_equal(first.snapshots, second.snapshots) and np.array_equal(
        first.interaction, second.interaction
    )
    return identical, "identical seeds give identical streams" if identical else "streams differ"


CHECKS: dict[str, Callable[[bool], tuple[bool, str]]] = {
    "basis_orthonormality": check_basis_orthonormality,
    "exact_normalization": check_exact_normalization,
    "exact_enumeration": check_exact_enumeration,
    "partition_chain": check_partition_chain,
    "eigensolver": check_eigensolver,
    "gpe_chemical_potential": check_gpe_mu,
    "two_mode_stationarity": check_two_mode_stationarity,
    "norm_drift": check_norm_drift,
    "acceptance_rate": check_acceptance_rate,
    "determinism": check_determinism,
}


def run_checks(fast: bool = False, names: list[str] | None = None) -> list[CheckResult]:
    """Run the selected checks; a check that raises counts as failed."""
    results = []
    for name, check in CHECKS.items():
        if names is not None and name not in names:
            continue
        start = time.perf_counter()
        try:
            passed, detail = check(fast)
        except BFBaseException as e:
            passed, detail = False, f"{type(e).__name__}: {e}"
        elapsed = time.perf_counter() - start
        logger.info("Check {}: {} ({})", name, "passed" if passed else "FAILED", detail)
        results.append(
            CheckResult(name=name, passed=passed, detail=detail, elapsed_seconds=elapsed)
        )
    return results


def render_checks(results: list[CheckResult]) -> None:
    table = Table(
        title="Checks",
        show_header=True,
        title_justify="left",
        title_style="bold",
    )
    table.add_column("Check", min_width=20)
    table.add_column("Result")
    table.add_column("Detail")
    table.add_column("Seconds", justify="right")
    for result in results:
        status = "[green]pass[/green]" if result.passed else "[red]FAIL[/red]"
        table.add_row(result.name, status, result.detail, f"{result.elapsed_seconds:.2f}")
    _pprint(table)

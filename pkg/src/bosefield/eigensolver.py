"""Cyclic Jacobi eigensolver for small dense Hermitian matrices."""

import math

import numpy as np
from numpy.typing import NDArray

from bosefield.exceptions import BFConvergenceError, BFInvalidParameter

HERMITIAN_TOLERANCE = 1e-12
MAX_SWEEPS = 100


def check_hermitian(matrix: NDArray, tolerance: float = HERMITIAN_TOLERANCE) -> None:
    """Raise if `matrix` is not square and Hermitian."""
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        msg = f"Expected a square matrix, got shape {matrix.shape}"
        raise BFInvalidParameter(msg)
    scale = max(float(np.max(np.abs(matrix))), 1.0) if matrix.size else 1.0
    asymmetry = float(np.max(np.abs(matrix - matrix.conj().T))) if matrix.size else 0.0
    if asymmetry > tolerance * scale:
        msg = f"Matrix is not Hermitian: max |A - A^H| = {asymmetry:.3e}"
        raise BFInvalidParameter(msg)


def _off_diagonal_norm(matrix: NDArray) -> float:
    off = matrix - np.diag(np.diag(matrix))
    return float(np.linalg.norm(off))


def jacobi_eigh(
    matrix: NDArray, tolerance: float = 1e-14, max_sweeps: int = MAX_SWEEPS
) -> tuple[NDArray[np.float64], NDArray[np.complex128]]:
    """Diagonalize a Hermitian matrix by cyclic Jacobi rotations.

    Each rotation first removes the phase of a_pq with a diagonal unitary and then applies a
    real Jacobi rotation, so the pair (p, q) is annihilated exactly.

    Returns
    -------
    tuple
        Eigenvalues in descending order and the matrix whose columns are the corresponding
        eigenvectors.
    """
    check_hermitian(np.asarray(matrix))
    a = np.array(matrix, dtype=np.complex128)
    a = 0.5 * (a + a.conj().T)
    n = a.shape[0]
    vectors = np.eye(n, dtype=np.complex128)
    scale = float(np.linalg.norm(a)) or 1.0

    sweep = 0
    off = _off_diagonal_norm(a)
    previous = math.inf
    # Rounding keeps the off-diagonal norm near n * eps * scale; stop once it stagnates.
    while off > tolerance * scale and off < previous:
        if sweep >= max_sweeps:
            msg = f"Jacobi did not converge in {max_sweeps} sweeps (off-diagonal {off:.3e})"
            raise BFConvergenceError(msg)
        for p in range(n - 1):
            for q in range(p + 1, n):
                _rotate(a, vectors, p, q)
        sweep += 1
        previous = off
        off = _off_diagonal_norm(a)

    values = np.real(np.diag(a)).copy()
    order = np.argsort(values, kind="stable")[::-1]
    return values[order], vectors[:, order]


def _rotate(a: NDArray, vectors: NDArray, p: int, q: int) -> None:
    apq = a[p, q]
    r = abs(apq)
    if r == 0.0:
        return
    phase = apq / r
    app = a[p, p].real
    aqq = a[q, q].real
    theta = (aqq - app) / (2.0 * r)
    t = (1.0 if theta >= 0 else -1.0) / (abs(theta) + math.sqrt(theta * theta + 1.0))
    c = 1.0 / math.sqrt(t * t + 1.0)
    s = t * c
    # Columns p, q of the unitary D P, where D removes the phase of a_pq.
    rotation = np.array([[c, s], [-s * phase.conjugate(), c * phase.conjugate()]])
    cols = [p, q]
    a[:, cols] = a[:, cols] @ rotation
    a[cols, :] = rotation.conj().T @ a[cols, :]
    a[p, q] = 0.0
    a[q, p] = 0.0
    a[p, p] = a[p, p].real
    a[q, q] = a[q, q].real
    vectors[:, cols] = vectors[:, cols] @ rotation


def fix_phase(vector: NDArray) -> NDArray:
    """Return `vector` with its largest-magnitude component made real and positive."""
    k = int(np.argmax(np.abs(vector)))
    if vector[k] == 0:
        return vector
    return vector * (abs(vector[k]) / vector[k])

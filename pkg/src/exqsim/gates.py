"""Target gate matrices and phase-insensitive matrix comparison."""

from __future__ import annotations

import numpy as np

I2 = np.eye(2, dtype=complex)
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = (SX, SY, SZ)

HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
NOT = SX.copy()
CNOT = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)
CPHASE = np.diag([1, 1, 1, -1]).astype(complex)
SWAP = np.array(
    [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex
)

# Logical action of the two intra-block exchanges.
E12_LOGICAL = -SZ
E23_LOGICAL = np.sqrt(3) / 2 * SX + 0.5 * SZ

# Real rotation that diagonalizes the core of the exact CNOT construction.
S_LOGICAL = np.sqrt(3) / 2 * I2 - 0.5j * SY


def z_rotation(angle: float) -> np.ndarray:
    """``exp(i angle sigma_z)``; a single 1-2 exchange pulse of time ``angle``."""
    return np.diag([np.exp(1j * angle), np.exp(-1j * angle)])


# The pi/8 phase gate realised by one 1-2 exchange of time pi/8.
T_GATE = z_rotation(np.pi / 8)


def kron_all(*ops) -> np.ndarray:
    out = np.eye(1, dtype=complex)
    for op in ops:
        out = np.kron(out, op)
    return out


def cnot_matrix(control: int, target: int, n: int) -> np.ndarray:
    """CNOT on ``n`` qubits with qubit 0 as the most significant bit."""
    if control == target:
        raise ValueError("control and target must differ")
    dim = 2 ** n
    out = np.zeros((dim, dim), dtype=complex)
    for x in range(dim):
        y = x
        if (x >> (n - 1 - control)) & 1:
            y = x ^ (1 << (n - 1 - target))
        out[y, x] = 1
    return out


def single_qubit_on(op: np.ndarray, qubit: int, n: int) -> np.ndarray:
    return kron_all(*[op if q == qubit else I2 for q in range(n)])


def align_phase(U: np.ndarray, target: np.ndarray, method: str = "trace") -> np.ndarray:
    """Multiply ``U`` by the global phase that best matches ``target``.

    ``method="trace"`` uses the phase of ``tr(target^dagger U)`` (the
    least-squares optimum); ``method="largest"`` uses the phase of the
    largest-magnitude element of ``target``.
    """
    if method == "trace":
        ov = np.vdot(target, U)
        if abs(ov) < 1e-300:
            return U
        return U * (abs(ov) / ov)
    if method == "largest":
        k = np.unravel_index(np.argmax(np.abs(target)), target.shape)
        ph = U[k] / target[k]
        if abs(ph) < 1e-300:
            return U
        return U * (abs(ph) / ph)
    raise ValueError(f"unknown phase alignment {method!r}")


def max_deviation(U: np.ndarray, target: np.ndarray, method: str = "trace") -> float:
    """Largest element-wise ``|U - target|`` after global-phase alignment."""
    return float(np.max(np.abs(align_phase(U, target, method) - target)))


def raw_distance(U: np.ndarray, target: np.ndarray) -> float:
    """Phase-sensitive sum of element-wise absolute differences."""
    return float(np.sum(np.abs(U - target)))


def phase_aligned_distance(U: np.ndarray, target: np.ndarray) -> float:
    return float(np.sum(np.abs(align_phase(U, target) - target)))


def equal_up_to_phase(U: np.ndarray, V: np.ndarray, atol: float = 1e-10) -> bool:
    return max_deviation(U, V) <= atol


def is_unitary(U: np.ndarray, atol: float = 1e-8) -> bool:
    U = np.asarray(U)
    return U.shape[0] == U.shape[1] and np.allclose(
        U.conj().T @ U, np.eye(U.shape[0]), atol=atol
    )

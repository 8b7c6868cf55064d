"""State vectors, bitwise spin operators and the three-spin logical code.

Basis conventions
-----------------
A state of ``N`` physical spins is a complex array of length ``2**N``.
Basis index ``k`` is read as the ket ``|b_0 b_1 ... b_{N-1}>`` with site 0
as the most significant bit, so site ``j`` corresponds to bit position
``N - 1 - j``.  This matches ``np.kron`` ordering: the first Kronecker
factor is site 0.

Single-site operators follow the bit relations

    S_z |k> = 1/2 (1 - 2 b_j) |k>
    S^+ |k> = (1 - b_j) |k with b_j -> 1>
    S^- |k> = b_j |k with b_j -> 0>

so bit value 1 is the "excited" state counted by ``S^+ S^-``.

Logical qubit ``i`` lives on sites ``3i, 3i+1, 3i+2``; logical qubit 0 is the
leftmost Kronecker factor.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

SQRT2 = np.sqrt(2.0)
SQRT6 = np.sqrt(6.0)

SPIN_OPS = ("Sz", "Splus", "Sminus")


def n_sites(state: np.ndarray) -> int:
    """Number of physical spins for a state (or batch of states)."""
    dim = state.shape[-1]
    n = int(dim).bit_length() - 1
    if dim < 1 or (1 << n) != dim:
        raise ValueError(f"state length {dim} is not a power of two")
    return n


def bit_of(index, site: int, n: int):
    """Bit of basis index ``index`` belonging to ``site`` in an ``n``-spin chain."""
    return (np.asarray(index) >> (n - 1 - site)) & 1


def site_mask(site: int, n: int) -> int:
    return 1 << (n - 1 - site)


def basis_state(bits: str) -> np.ndarray:
    """Computational basis ket from a bit string such as ``"011"``."""
    if not bits or set(bits) - {"0", "1"}:
        raise ValueError(f"invalid bit string {bits!r}")
    psi = np.zeros(2 ** len(bits), dtype=complex)
    psi[int(bits, 2)] = 1.0
    return psi


def apply_single_spin_op(state: np.ndarray, site: int, op: str) -> np.ndarray:
    """Apply ``Sz``, ``Splus`` or ``Sminus`` on one site using bit arithmetic.

    Works on a single state or on a batch with the basis index last.  The
    result is a new array and is generally not normalized.
    """
    state = np.asarray(state, dtype=complex)
    n = n_sites(state)
    if not 0 <= site < n:
        raise IndexError(f"site {site} outside chain of {n} spins")
    idx = np.arange(1 << n)
    bits = bit_of(idx, site, n)
    mask = site_mask(site, n)
    if op == "Sz":
        return state * (0.5 * (1 - 2 * bits))
    out = np.zeros_like(state)
    if op == "Splus":
        # |..0..> -> |..1..>
        src = idx[bits == 0]
        out[..., src | mask] = state[..., src]
        return out
    if op == "Sminus":
        src = idx[bits == 1]
        out[..., src ^ mask] = state[..., src]
        return out
    raise ValueError(f"unknown spin operator {op!r}; expected one of {SPIN_OPS}")


def single_site_matrix(op: str) -> np.ndarray:
    """2x2 matrix of a spin operator in the (bit 0, bit 1) basis."""
    if op == "Sz":
        return np.diag([0.5, -0.5]).astype(complex)
    if op == "Splus":
        return np.array([[0, 0], [1, 0]], dtype=complex)
    if op == "Sminus":
        return np.array([[0, 1], [0, 0]], dtype=complex)
    raise ValueError(f"unknown spin operator {op!r}")


def embed_operator(op2: np.ndarray, site: int, n: int) -> np.ndarray:
    """Dense ``2**n`` matrix acting as ``op2`` on ``site`` (Kronecker product)."""
    out = np.eye(1, dtype=complex)
    for j in range(n):
        out = np.kron(out, op2 if j == site else np.eye(2))
    return out


def _codewords() -> np.ndarray:
    c = np.zeros((2, 8), dtype=complex)
    c[0, 0b011] = 1 / SQRT2
    c[0, 0b101] = -1 / SQRT2
    # Sign of |1>_L fixed so that exchange of the last two spins acts on the
    # code as +(sqrt3/2) sigma_x + 1/2 sigma_z.
    c[1, 0b011] = 1 / SQRT6
    c[1, 0b101] = 1 / SQRT6
    c[1, 0b110] = -np.sqrt(2.0 / 3.0)
    return c


CODEWORDS = _codewords()
CODE_CONFIGS = (0b011, 0b101, 0b110)


@dataclass(frozen=True)
class LogicalCodec:
    """Encoding of ``n_logical`` qubits into blocks of three spins."""

    n_logical: int

    def __post_init__(self):
        if self.n_logical < 1:
            raise ValueError("n_logical must be >= 1")

    @property
    def n_physical(self) -> int:
        return 3 * self.n_logical

    @property
    def codewords(self) -> np.ndarray:
        """Rows are |0>_L and |1>_L of a single block (length 8)."""
        return CODEWORDS.copy()

    def block_sites(self, i: int) -> tuple[int, int, int]:
        if not 0 <= i < self.n_logical:
            raise IndexError(f"logical qubit {i} out of range")
        return (3 * i, 3 * i + 1, 3 * i + 2)

    @cached_property
    def isometry(self) -> np.ndarray:
        """``W`` of shape ``(2**(3n), 2**n)``; column ``x`` encodes logical ``|x>``."""
        cols = []
        for x in range(2 ** self.n_logical):
            v = np.ones(1, dtype=complex)
            for i in range(self.n_logical):
                b = (x >> (self.n_logical - 1 - i)) & 1
                v = np.kron(v, CODEWORDS[b])
            cols.append(v)
        return np.array(cols).T

    def encode(self, logical: np.ndarray) -> np.ndarray:
        return encode_logical(logical, self)

    def decode(self, state: np.ndarray) -> np.ndarray:
        """Logical amplitudes ``W^dagger psi`` (norm < 1 if the state leaked)."""
        state = np.asarray(state, dtype=complex)
        if state.shape[-1] != 2 ** self.n_physical:
            raise ValueError("dimension mismatch between state and codec")
        return state @ self.isometry.conj()

    def logical_block(self, physical: np.ndarray) -> np.ndarray:
        """Project a physical operator onto the code: ``W^dagger U W``."""
        W = self.isometry
        return W.conj().T @ physical @ W


def encode_logical(logical: np.ndarray, codec: LogicalCodec) -> np.ndarray:
    logical = np.asarray(logical, dtype=complex)
    if logical.shape[-1] != 2 ** codec.n_logical:
        raise ValueError(
            f"logical vector has length {logical.shape[-1]}, "
            f"expected {2 ** codec.n_logical}"
        )
    return logical @ codec.isometry.T


def subspace_weights(state: np.ndarray, codec: LogicalCodec) -> tuple[float, float]:
    """Weight inside the code space and in its complement."""
    inside = float(np.sum(np.abs(codec.decode(state)) ** 2))
    inside = min(max(inside, 0.0), 1.0)
    return inside, 1.0 - inside


def overlap_fidelity(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError("dimension mismatch")
    return float(abs(np.vdot(a, b)) ** 2)


@dataclass(frozen=True)
class RngStream:
    """Counter-based random stream keyed by ``(seed, stream)``.

    ``purpose`` separates independent uses of the same seed (trajectory
    noise, initial-state sampling, optimizer starts).
    """

    seed: int
    stream: int = 0
    purpose: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.purpose, self.stream))
        return np.random.Generator(np.random.Philox(ss))


def bloch_amplitudes(thetas, phis) -> np.ndarray:
    """Hyperspherical amplitudes from ``D-1`` polar angles and ``D-1`` phases.

    ``c_0 = cos th_1``, ``c_k = e^{i ph_k} sin th_1 ... sin th_k cos th_{k+1}``
    and the last amplitude carries only sines.  The first phase is fixed to
    zero, so ``c_0`` is real.
    """
    thetas = np.asarray(thetas, dtype=float)
    phis = np.asarray(phis, dtype=float)
    m = thetas.shape[-1]
    if phis.shape[-1] != m:
        raise ValueError("need as many phases as polar angles")
    shape = thetas.shape[:-1] + (m + 1,)
    mag = np.ones(shape)
    s = np.ones(thetas.shape[:-1])
    for k in range(m):
        mag[..., k] = s * np.cos(thetas[..., k])
        s = s * np.sin(thetas[..., k])
    mag[..., m] = s
    phase = np.concatenate([np.zeros(thetas.shape[:-1] + (1,)), phis], axis=-1)
    return mag * np.exp(1j * phase)


def sample_logical_bloch_state(
    n_logical: int,
    rng: RngStream | np.random.Generator,
    method: str = "angles",
    size: int | None = None,
) -> np.ndarray:
    """Random normalized logical amplitudes.

    ``method="angles"`` draws the polar angles uniformly on ``[0, pi/2]`` and
    the phases uniformly on ``[0, 2 pi)``.  ``method="haar"`` returns
    unitarily invariant states (normalized complex Gaussians).
    """
    if n_logical < 1:
        raise ValueError("n_logical must be >= 1")
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    dim = 2 ** n_logical
    shape = (() if size is None else (size,))
    if method == "angles":
        thetas = gen.uniform(0.0, np.pi / 2, size=shape + (dim - 1,))
        phis = gen.uniform(0.0, 2 * np.pi, size=shape + (dim - 1,))
        c = bloch_amplitudes(thetas, phis)
    elif method == "haar":
        z = gen.standard_normal(shape + (dim,)) + 1j * gen.standard_normal(shape + (dim,))
        c = z
    else:
        raise ValueError(f"unknown sampling method {method!r}")
    return c / np.linalg.norm(c, axis=-1, keepdims=True)

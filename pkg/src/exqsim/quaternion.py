"""Quaternion synthesis of encoded single-qubit gates and the exact CNOT.

Unit quaternions ``{w, u}`` stand for ``SU(2)`` elements ``w I - i u.sigma``.
With this map the Hamilton product is the matrix product, so a pulse
sequence applied in temporal order ``p_1, ..., p_N`` has quaternion
``q_N * ... * q_1``.

On an encoded qubit the two intra-block exchanges act as

    E12 -> -sigma_z,        E23 -> (sqrt3/2) sigma_x + (1/2) sigma_z

so a pulse ``exp(-i t E)`` is the rotation ``{cos t, sin t * axis}`` with
axis ``(0, 0, -1)`` for E12 and ``(sqrt3/2, 0, 1/2)`` for E23.  Exchange
times enter with the full angle ``t``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exchange import EXCHANGE_SIGN, ExchangePulse, ExchangeSchedule, merge_pulses, reduce_time
from .gates import CPHASE, E12_LOGICAL, E23_LOGICAL, I2, PAULI, S_LOGICAL, SZ
from .hilbert import LogicalCodec
from .library import canonical_library, single_qubit_gate
from .exchange import schedule_unitary


class NoSolution(ValueError):
    """The requested rotation is outside the reachable set of a pulse pattern."""


AXES = {
    "E12": np.array([0.0, 0.0, -1.0]),
    "E23": np.array([np.sqrt(3) / 2, 0.0, 0.5]),
}
LOGICAL_GENERATORS = {"E12": E12_LOGICAL, "E23": E23_LOGICAL}
PATTERNS = {
    "E12-E23-E12": ("E12", "E23"),
    "E23-E12-E23": ("E23", "E12"),
}


@dataclass(frozen=True)
class Quaternion:
    w: float
    x: float
    y: float
    z: float

    @classmethod
    def from_parts(cls, w, u) -> "Quaternion":
        return cls(float(w), float(u[0]), float(u[1]), float(u[2]))

    @classmethod
    def identity(cls) -> "Quaternion":
        return cls(1.0, 0.0, 0.0, 0.0)

    @property
    def u(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    def as_array(self) -> np.ndarray:
        return np.array([self.w, self.x, self.y, self.z])

    def __mul__(self, other: "Quaternion") -> "Quaternion":
        return q_mul(self, other)

    def conjugate(self) -> "Quaternion":
        return Quaternion(self.w, -self.x, -self.y, -self.z)

    def norm(self) -> float:
        return float(np.linalg.norm(self.as_array()))

    def normalized(self) -> "Quaternion":
        a = self.as_array() / self.norm()
        return Quaternion(*a)

    def as_su2(self) -> np.ndarray:
        """``w I - i u.sigma``."""
        return self.w * I2 - 1j * sum(c * s for c, s in zip(self.u, PAULI))

    @classmethod
    def from_su2(cls, U: np.ndarray) -> "Quaternion":
        """Quaternion of a 2x2 unitary after removing its global phase.

        The result is defined up to an overall sign.
        """
        U = np.asarray(U, dtype=complex)
        det = np.linalg.det(U)
        if abs(abs(det) - 1) > 1e-8:
            raise ValueError("input is not unitary")
        V = U / np.sqrt(det)
        w = 0.5 * np.trace(V)
        u = [0.5j * np.trace(V @ s) for s in PAULI]
        # w and u are real up to a common sign ambiguity; fix it from w or u.
        comps = np.array([w] + u)
        k = np.argmax(np.abs(comps))
        comps = comps * (abs(comps[k]) / comps[k])
        if np.max(np.abs(comps.imag)) > 1e-8:
            raise ValueError("input is not a rotation up to phase")
        q = comps.real
        return cls(*(q / np.linalg.norm(q)))

    def close_to(self, other: "Quaternion", atol: float = 1e-10) -> bool:
        """Equality up to overall sign (``q`` and ``-q`` are the same rotation)."""
        a, b = self.as_array(), other.as_array()
        return min(np.max(np.abs(a - b)), np.max(np.abs(a + b))) <= atol


def q_mul(q1: Quaternion, q2: Quaternion) -> Quaternion:
    """Hamilton product ``{w1 w2 - u1.u2, w1 u2 + w2 u1 + u1 x u2}``."""
    u1, u2 = q1.u, q2.u
    w = q1.w * q2.w - u1 @ u2
    u = q1.w * u2 + q2.w * u1 + np.cross(u1, u2)
    return Quaternion.from_parts(w, u)


def q_rotation(angle: float, axis) -> Quaternion:
    """``exp(-i angle/2 axis.sigma)``: rotation by ``angle`` about ``axis``."""
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    return Quaternion.from_parts(np.cos(angle / 2), np.sin(angle / 2) * axis)


def q_from_exchange(gate: str, t: float) -> Quaternion:
    """Quaternion of an intra-block exchange pulse of time ``t``."""
    try:
        axis = AXES[gate]
    except KeyError:
        raise ValueError(f"unknown exchange {gate!r}; expected E12 or E23")
    if EXCHANGE_SIGN != -1:
        axis = -axis
    return Quaternion.from_parts(np.cos(t), np.sin(t) * axis)


def q_euler(phi: float, theta: float, chi: float) -> Quaternion:
    """Euler rotation ``R_z(phi) R_y(theta) R_z(chi)`` in closed form."""
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return Quaternion(
        c * np.cos((phi + chi) / 2),
        s * np.sin((chi - phi) / 2),
        s * np.cos((chi - phi) / 2),
        c * np.sin((phi + chi) / 2),
    )


def sequence_quaternion(gates, times) -> Quaternion:
    """Quaternion of pulses applied in temporal order."""
    q = Quaternion.identity()
    for g, t in zip(gates, times):
        q = q_mul(q_from_exchange(g, t), q)
    return q


def logical_pulse(gate: str, t: float) -> np.ndarray:
    """2x2 action of ``exp(EXCHANGE_SIGN i t E)`` on an encoded qubit."""
    return np.cos(t) * I2 + EXCHANGE_SIGN * 1j * np.sin(t) * LOGICAL_GENERATORS[gate]


def sequence_matrix(gates, times) -> np.ndarray:
    U = I2.copy()
    for g, t in zip(gates, times):
        U = logical_pulse(g, t) @ U
    return U


def _as_quaternion(target) -> Quaternion:
    if isinstance(target, Quaternion):
        return target.normalized()
    return Quaternion.from_su2(target)


def solve_three_exchange(target, pattern: str = "E12-E23-E12") -> tuple[float, float, float]:
    """Times ``(t1, t2, t3)`` in temporal order realizing ``target``.

    ``pattern`` names the outer and middle exchange, e.g. ``"E12-E23-E12"``
    applies E12 for ``t1``, then E23 for ``t2``, then E12 for ``t3``.
    Principal branches are used and times are reduced onto ``[0, pi)``.
    Raises ``NoSolution`` if the rotation is not reachable.
    """
    try:
        outer, middle = PATTERNS[pattern]
    except KeyError:
        raise ValueError(f"unknown pattern {pattern!r}; expected one of {list(PATTERNS)}")
    q = _as_quaternion(target)
    sign = -1.0 if EXCHANGE_SIGN == 1 else 1.0
    a = sign * AXES[outer]
    b = sign * AXES[middle]
    c = float(a @ b)
    s_ab = float(np.sqrt(1 - c * c))
    e3 = a
    e1 = (b - c * a) / s_ab
    e2 = np.cross(e3, e1)
    u = q.u
    x, y, z, w = u @ e1, u @ e2, u @ e3, q.w
    # In the frame (e1, e2, e3) the composite is
    #   w = c2 cos(sig) - c s2 sin(sig)        z = c2 sin(sig) + c s2 cos(sig)
    #   x = s_ab s2 cos(t1 - t3)               y = -s_ab s2 sin(t1 - t3)
    # with sig = t1 + t3, c2 = cos t2, s2 = sin t2.
    r = np.hypot(x, y) / s_ab
    if r > 1 + 1e-12:
        raise NoSolution(
            f"rotation needs sin(t2) = {r:.6f} > 1 under pattern {pattern}"
        )
    r = min(r, 1.0)
    t2 = float(np.arcsin(r))
    c2, s2 = np.cos(t2), np.sin(t2)
    d = float(np.arctan2(-y, x)) if r > 1e-14 else 0.0
    sig = float(np.arctan2(c2 * z - c * s2 * w, c2 * w + c * s2 * z))
    t1 = (sig + d) / 2
    t3 = (sig - d) / 2
    times = (reduce_time(t1), reduce_time(t2), reduce_time(t3))
    check = sequence_quaternion((outer, middle, outer), times)
    if not check.close_to(q, 1e-9):
        raise NoSolution(f"pattern {pattern} does not reproduce the target")
    return times


def solve_four_exchange(target) -> tuple[float, float, float, float]:
    """Times for the pattern E23(t1), E12(t2), E23(t3), E12(t4).

    The trailing E12 time is chosen to make the remaining rotation as deep
    inside the reachable set of E23-E12-E23 as possible.
    """
    q = _as_quaternion(target)
    k = AXES["E23"] * (1.0 if EXCHANGE_SIGN == -1 else -1.0)
    w, (ux, uy, uz) = q.w, q.u
    # q' = q12(t4)^-1 q = {cos t, (0,0,sin t)} * q for the E12 axis -z.
    # Reachability of q' by E23-E12-E23 grows with w'^2 + (u'.k)^2.
    v1 = np.array([w, -uz])
    v2 = np.array([k[0] * ux + k[2] * uz, -k[0] * uy + k[2] * w])
    M = np.outer(v1, v1) + np.outer(v2, v2)
    evals, evecs = np.linalg.eigh(M)
    e = evecs[:, -1]
    tau = float(np.arctan2(e[1], e[0]))
    q12_inv = q_from_exchange("E12", -tau)
    rest = q_mul(q12_inv, q)
    t1, t2, t3 = solve_three_exchange(rest, "E23-E12-E23")
    return (t1, t2, t3, reduce_time(tau))


def four_exchange_matrix(times) -> np.ndarray:
    """Closed-form elements of
    ``exp(-i t4 E12) exp(-i t3 E23) exp(-i t2 E12) exp(-i t1 E23)`` on the code.
    """
    t1, t2, t3, t4 = times
    s1, s3 = np.sin(t1), np.sin(t3)
    m1 = np.cos(t1) - 0.5j * s1
    p1 = np.cos(t1) + 0.5j * s1
    m3 = np.cos(t3) - 0.5j * s3
    p3 = np.cos(t3) + 0.5j * s3
    h = np.sqrt(3) / 2
    A00 = np.exp(1j * (t2 + t4)) * m3 * m1 - 0.75 * np.exp(1j * (t4 - t2)) * s1 * s3
    A01 = (-1j * h * np.exp(1j * (t2 + t4)) * s1 * m3
           - 1j * h * np.exp(1j * (t4 - t2)) * s3 * p1)
    A10 = (-1j * h * np.exp(1j * (t2 - t4)) * s3 * m1
           - 1j * h * np.exp(-1j * (t4 + t2)) * s1 * p3)
    A11 = -0.75 * np.exp(1j * (t2 - t4)) * s1 * s3 + np.exp(-1j * (t2 + t4)) * p3 * p1
    return np.array([[A00, A01], [A10, A11]])


def verify_four_exchange(A: np.ndarray, times, up_to_phase: bool = True) -> float:
    """Largest element deviation between ``A`` and the four-exchange closed form."""
    B = four_exchange_matrix(times)
    A = np.asarray(A, dtype=complex)
    if up_to_phase:
        ov = np.vdot(B, A)
        if abs(ov) > 1e-300:
            B = B * (ov / abs(ov))
    return float(np.max(np.abs(A - B)))


def pattern_to_four(pattern: str, times) -> tuple[float, float, float, float]:
    """Embed three-exchange times into the four-exchange ordering."""
    t1, t2, t3 = times
    if pattern == "E12-E23-E12":
        return (0.0, t1, t2, t3)
    if pattern == "E23-E12-E23":
        return (t1, t2, t3, 0.0)
    raise ValueError(f"unknown pattern {pattern!r}")


@dataclass(frozen=True)
class PhaseSolution:
    """Z-rotation angles turning a diagonal gate into C-PHASE.

    ``diag(D) * exp(i omega) exp(i (phi Z x I + theta I x Z)) = C-PHASE``;
    ``phi`` acts on the first logical qubit and ``theta`` on the second.
    """

    phi: float
    theta: float
    omega: float
    residual: float


def _wrap_half(a: float) -> float:
    """Map an angle onto ``(-pi/2, pi/2]``."""
    r = float(np.mod(a + np.pi / 2, np.pi) - np.pi / 2)
    if r <= -np.pi / 2 + 1e-15:
        r += np.pi
    return r


def solve_phase_system(D, tol: float = 1e-4) -> PhaseSolution:
    """Solve the four phase equations mapping diagonal ``D`` onto C-PHASE.

    ``D`` may be a diagonal 4x4 matrix or its four diagonal entries.  The
    system is consistent only if ``D00 - D01 - D10 + D11 = pi (mod 2 pi)``
    in phase; otherwise ``NoSolution`` is raised.
    """
    D = np.asarray(D, dtype=complex)
    d = np.diag(D) if D.ndim == 2 else D
    if d.shape != (4,) or np.max(np.abs(np.abs(d) - 1)) > 1e-6:
        raise ValueError("D must be a unitary diagonal 4x4 gate")
    if D.ndim == 2 and np.max(np.abs(D - np.diag(d))) > 1e-6:
        raise ValueError("D is not diagonal")
    delta = np.angle(d)
    mismatch = np.angle(np.exp(1j * (delta[0] - delta[1] - delta[2] + delta[3] - np.pi)))
    if abs(mismatch) > tol:
        raise NoSolution(f"diagonal gate is not C-PHASE equivalent (mismatch {mismatch:.3g})")
    phi = _wrap_half((delta[2] - delta[0]) / 2)
    theta = _wrap_half((delta[1] - delta[0]) / 2)
    omega = float(np.angle(np.exp(-1j * (delta[0] + phi + theta))))
    return PhaseSolution(phi, theta, omega, float(abs(mismatch)))


def cphase_rotation(sol: PhaseSolution) -> np.ndarray:
    """``exp(i omega) exp(i (phi Z x I + theta I x Z))``."""
    z = np.array([1, -1])
    diag = np.exp(1j * (sol.omega + sol.phi * np.repeat(z, 2) + sol.theta * np.tile(z, 2)))
    return np.diag(diag)


def core_logical_block(core: ExchangeSchedule | None = None) -> np.ndarray:
    """4x4 logical block of the 19-pulse core."""
    core = canonical_library()["CORE19"] if core is None else core
    return LogicalCodec(2).logical_block(schedule_unitary(core))


def diagonalize_core(core_block: np.ndarray) -> tuple[np.ndarray, float]:
    """``S^dagger C S`` with ``S`` on the second qubit; returns it and its off-diagonal size."""
    S = np.kron(I2, S_LOGICAL)
    D = S.conj().T @ core_block @ S
    off = float(np.max(np.abs(D - np.diag(np.diag(D)))))
    return D, off


@dataclass(frozen=True)
class CnotConstruction:
    """Pieces of the exact CNOT built around the 19-pulse core."""

    phases: PhaseSolution
    hadamard: tuple[float, float, float]
    s_dagger: tuple[float, float, float]
    offdiag: float


def analytic_cnot_pieces(core: ExchangeSchedule | None = None) -> CnotConstruction:
    """Synthesize the local rotations of the exact CNOT from scratch."""
    C = core_logical_block(core)
    D, off = diagonalize_core(C)
    phases = solve_phase_system(np.diag(D))
    hadamard = solve_three_exchange(
        np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2), "E12-E23-E12"
    )
    s_dagger = solve_three_exchange(S_LOGICAL.conj().T, "E12-E23-E12")
    return CnotConstruction(phases, hadamard, s_dagger, off)


def cnot_segments(pieces: CnotConstruction | None = None, core: ExchangeSchedule | None = None):
    """Logical segments of ``CNOT = H2 S2^dag C S2 R H2`` in temporal order.

    Each entry is ``(name, logical_qubits, pulses on a 6-site chain)``.
    """
    pieces = analytic_cnot_pieces(core) if pieces is None else pieces
    core = canonical_library()["CORE19"] if core is None else core
    h1, h2, h3 = pieces.hadamard
    a1, a2, a3 = pieces.s_dagger
    p12, p23 = (3, 4), (4, 5)
    had = (ExchangePulse(p12, h1), ExchangePulse(p23, h2), ExchangePulse(p12, h3))
    sdg = (ExchangePulse(p12, a1), ExchangePulse(p23, a2), ExchangePulse(p12, a3))
    s = tuple(ExchangePulse(p.pair, reduce_time(-p.t)) for p in reversed(sdg))
    return [
        ("H", (1,), had),
        ("RZ", (0,), (ExchangePulse((0, 1), reduce_time(pieces.phases.phi)),)),
        ("RZ", (1,), (ExchangePulse(p12, reduce_time(pieces.phases.theta)),)),
        ("S", (1,), s),
        ("CORE", (0, 1), core.pulses),
        ("SDG", (1,), sdg),
        ("H", (1,), had),
    ]


def assemble_analytic_cnot(merge: bool = True) -> ExchangeSchedule:
    """Exact encoded CNOT (control = first block) from the 19-pulse core.

    Unmerged the sequence has 33 pulses; merging same-pair neighbours
    leaves 30.
    """
    pulses = tuple(p for _, _, seg in cnot_segments() for p in seg)
    if merge:
        pulses = merge_pulses(pulses)
    return ExchangeSchedule(pulses, 6, "CNOT30")

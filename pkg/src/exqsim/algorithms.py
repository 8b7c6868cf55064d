"""Encoded circuits: compilation to exchange pulses, Deutsch-Jozsa, CNOT sandwich.

Logical gates are tuples such as ``("H", 0)``, ``("NOT", 2)``, ``("T", 1)``
or ``("CNOT", control, target)``; ``("ORACLE", k)`` inserts one of the
eight two-input Deutsch-Jozsa oracles (query qubits 0 and 1, answer
qubit 2).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .exchange import (
    ExchangeSchedule,
    block_swap_pulses,
    merge_pulses,
    schedule_unitary,
)
from .gates import (
    HADAMARD,
    I2,
    NOT,
    S_LOGICAL,
    SWAP,
    T_GATE,
    cnot_matrix,
    kron_all,
    max_deviation,
    single_qubit_on,
    z_rotation,
)
from .hilbert import LogicalCodec, encode_logical
from .library import canonical_library, single_qubit_gate, z_rotation_block
from .mcwf import (
    FidelityEstimate,
    NoiseModel,
    TrajectoryConfig,
    ensemble_fidelity,
    sample_initial_states,
)
from .quaternion import analytic_cnot_pieces, assemble_analytic_cnot

SINGLE = ("H", "NOT", "T", "S", "SDG")
SELF_INVERSE = ("H", "NOT")
INVERSE_PAIRS = {("S", "SDG"), ("SDG", "S")}
SINGLE_MATRICES = {
    "H": HADAMARD,
    "NOT": NOT,
    "T": T_GATE,
    "S": S_LOGICAL,
    "SDG": S_LOGICAL.conj().T,
}


@dataclass(frozen=True)
class LogicalGate:
    """A gate on logical qubits; ``param`` holds a rotation angle for ``RZ``."""

    name: str
    qubits: tuple[int, ...]
    param: float | None = None

    @classmethod
    def parse(cls, g) -> "LogicalGate":
        if isinstance(g, LogicalGate):
            return g
        name, *rest = g
        name = str(name).upper()
        if name == "RZ":
            return cls(name, (int(rest[0]),), float(rest[1]))
        if name == "ORACLE":
            return cls(name, (), float(rest[0]))
        return cls(name, tuple(int(q) for q in rest))

    def overlaps(self, other: "LogicalGate") -> bool:
        return bool(set(self.support) & set(other.support))

    @property
    def support(self) -> tuple[int, ...]:
        if self.name == "BSWAP":
            return (self.qubits[0], self.qubits[0] + 1)
        return self.qubits


@dataclass(frozen=True)
class DJOracle:
    """Two-input Boolean oracle ``|x1 x2 y> -> |x1 x2, y xor f(x1, x2)>``."""

    id: int

    NAMES = ("0", "1", "x1", "not x1", "x2", "not x2", "x1 xor x2", "not (x1 xor x2)")

    def __post_init__(self):
        if not 0 <= self.id < 8:
            raise ValueError("oracle id must be in 0..7")

    @property
    def name(self) -> str:
        return self.NAMES[self.id]

    @property
    def constant(self) -> bool:
        return self.id in (0, 1)

    @property
    def classification(self) -> str:
        return "constant" if self.constant else "balanced"

    @property
    def negated(self) -> bool:
        return self.id % 2 == 1

    @property
    def inputs(self) -> tuple[int, ...]:
        return {0: (), 1: (), 2: (0,), 3: (0,), 4: (1,), 5: (1,), 6: (0, 1), 7: (0, 1)}[self.id]

    def f(self, x1: int, x2: int) -> int:
        bits = (x1, x2)
        return (sum(bits[i] for i in self.inputs) + self.negated) % 2

    def gates(self) -> list[tuple]:
        out = [("CNOT", q, 2) for q in self.inputs]
        if self.negated:
            out.append(("NOT", 2))
        return out

    def unitary(self) -> np.ndarray:
        U = np.zeros((8, 8), dtype=complex)
        for x in range(8):
            x1, x2, y = (x >> 2) & 1, (x >> 1) & 1, x & 1
            U[(x1 << 2) | (x2 << 1) | (y ^ self.f(x1, x2)), x] = 1
        return U


ALL_ORACLES = tuple(DJOracle(k) for k in range(8))


@lru_cache(maxsize=1)
def _cnot_block() -> ExchangeSchedule:
    return assemble_analytic_cnot()


@lru_cache(maxsize=1)
def _cnot_pieces():
    return analytic_cnot_pieces()


def _route_cnot(c: int, t: int) -> list[LogicalGate]:
    """Adjacent-only realization of CNOT(c, t) using block swaps."""
    if c == t:
        raise ValueError("CNOT needs distinct qubits")
    swaps: list[LogicalGate] = []
    if t > c + 1:
        for b in range(t - 1, c, -1):
            swaps.append(LogicalGate("BSWAP", (b,)))
        t_new = c + 1
    elif t < c - 1:
        for b in range(t, c - 1):
            swaps.append(LogicalGate("BSWAP", (b,)))
        t_new = c - 1
    else:
        t_new = t
    if t_new == c + 1:
        core = [LogicalGate("CNOTADJ", (c, t_new))]
    else:
        core = [
            LogicalGate("H", (c,)),
            LogicalGate("H", (t_new,)),
            LogicalGate("CNOTADJ", (t_new, c)),
            LogicalGate("H", (c,)),
            LogicalGate("H", (t_new,)),
        ]
    return swaps + core + list(reversed(swaps))


def _macro_cnot(c: int, t: int) -> list[LogicalGate]:
    """CNOT(c, c+1) as H, z-rotations, S, core, S^dag, H."""
    ph = _cnot_pieces().phases
    return [
        LogicalGate("H", (t,)),
        LogicalGate("RZ", (c,), ph.phi),
        LogicalGate("RZ", (t,), ph.theta),
        LogicalGate("S", (t,)),
        LogicalGate("CORE", (c, t)),
        LogicalGate("SDG", (t,)),
        LogicalGate("H", (t,)),
    ]


def expand_gates(gates, n_logical: int, macro: bool = False) -> list[LogicalGate]:
    out: list[LogicalGate] = []
    for raw in gates:
        g = LogicalGate.parse(raw)
        if g.name == "ORACLE":
            out += expand_gates(DJOracle(int(g.param)).gates(), n_logical, macro)
            continue
        for q in g.qubits:
            if not 0 <= q < n_logical:
                raise ValueError(f"gate {g.name} on qubit {q} outside {n_logical} qubits")
        if g.name == "CNOT":
            for h in _route_cnot(*g.qubits):
                if h.name == "CNOTADJ" and macro:
                    out += _macro_cnot(*h.qubits)
                else:
                    out.append(h)
        elif g.name in SINGLE or g.name in ("RZ", "BSWAP", "CORE", "CNOTADJ"):
            out.append(g)
        else:
            raise ValueError(f"unsupported gate {g.name!r}")
    return out


def simplify_gates(gates: list[LogicalGate]) -> list[LogicalGate]:
    """Cancel ``H H``, ``NOT NOT``, ``S S^dag`` and repeated block swaps.

    Two gates cancel if every gate between them acts on other qubits.
    """
    out: list[LogicalGate] = []
    for g in gates:
        cancelled = False
        for k in range(len(out) - 1, -1, -1):
            h = out[k]
            same_target = h.support == g.support
            if same_target and (
                (h.name == g.name and g.name in SELF_INVERSE + ("BSWAP",))
                or (h.name, g.name) in INVERSE_PAIRS
            ):
                del out[k]
                cancelled = True
                break
            if h.overlaps(g):
                break
        if not cancelled:
            out.append(g)
    return out


def gate_pulses(g: LogicalGate, n_physical: int, cnot: str = "analytic"):
    if g.name in SINGLE:
        return single_qubit_gate(g.name).shifted(3 * g.qubits[0], n_physical).pulses
    if g.name == "RZ":
        return z_rotation_block(g.param).shifted(3 * g.qubits[0], n_physical).pulses
    if g.name == "CORE":
        return canonical_library()["CORE19"].shifted(3 * g.qubits[0], n_physical).pulses
    if g.name == "CNOTADJ":
        block = _cnot_block() if cnot == "analytic" else canonical_library()["CNOT30"]
        return block.shifted(3 * g.qubits[0], n_physical).pulses
    if g.name == "BSWAP":
        return block_swap_pulses(g.qubits[0], n_physical)
    raise ValueError(f"unsupported gate {g.name!r}")


def gate_matrix(g: LogicalGate, n: int) -> np.ndarray:
    if g.name in SINGLE_MATRICES:
        return single_qubit_on(SINGLE_MATRICES[g.name], g.qubits[0], n)
    if g.name == "RZ":
        return single_qubit_on(z_rotation(g.param), g.qubits[0], n)
    if g.name in ("CNOT", "CNOTADJ"):
        return cnot_matrix(g.qubits[0], g.qubits[1], n)
    if g.name == "BSWAP":
        b = g.qubits[0]
        return kron_all(*([I2] * b + [SWAP] + [I2] * (n - b - 2)))
    if g.name == "CORE":
        raise ValueError("the bare core has no exact logical matrix")
    raise ValueError(f"unsupported gate {g.name!r}")


@dataclass
class EncodedCircuit:
    gates: list
    n_logical: int
    schedule: ExchangeSchedule
    expanded: list = field(default_factory=list)

    @property
    def total_time(self) -> float:
        return self.schedule.total_time

    @property
    def codec(self) -> LogicalCodec:
        return LogicalCodec(self.n_logical)

    def logical_unitary(self) -> np.ndarray:
        """Ideal logical unitary of the (unexpanded) gate list."""
        n = self.n_logical
        U = np.eye(2**n, dtype=complex)
        for g in expand_gates(self.gates, n, macro=False):
            U = gate_matrix(g, n) @ U
        return U

    def compiled_logical_block(self) -> np.ndarray:
        return self.codec.logical_block(schedule_unitary(self.schedule))

    def max_error(self) -> float:
        return max_deviation(self.compiled_logical_block(), self.logical_unitary())


def compile_logical_circuit(
    gates,
    n_logical: int | None = None,
    simplify: bool = False,
    merge: bool = True,
    label: str = "",
    cnot: str = "analytic",
) -> EncodedCircuit:
    """Compile logical gates into one adjacent-exchange schedule.

    ``simplify`` expands each CNOT into its analytic building blocks and
    cancels inverse neighbours such as ``H H``; ``merge`` joins same-pair
    pulses that meet (across gate boundaries) modulo ``pi``.  With both off
    every gate keeps its own pulse block.

    ``cnot`` selects the 30-pulse CNOT block: ``"analytic"`` recomputes the
    times at full precision, ``"table"`` uses the tabulated six-decimal times.
    """
    if cnot not in ("analytic", "table"):
        raise ValueError("cnot must be 'analytic' or 'table'")
    parsed = [LogicalGate.parse(g) for g in gates]
    if n_logical is None:
        qs = [q for g in parsed for q in g.qubits]
        if any(g.name == "ORACLE" for g in parsed):
            qs.append(2)
        n_logical = max(qs) + 1 if qs else 1
    expanded = expand_gates(parsed, n_logical, macro=simplify)
    if simplify:
        expanded = simplify_gates(expanded)
    n_phys = 3 * n_logical
    pulses = tuple(p for g in expanded for p in gate_pulses(g, n_phys, cnot))
    if merge:
        pulses = merge_pulses(pulses)
    sched = ExchangeSchedule(pulses, n_phys, label)
    return EncodedCircuit(list(parsed), n_logical, sched, expanded)


def dj_gates(oracle: DJOracle) -> list[tuple]:
    return (
        [("NOT", 2), ("H", 0), ("H", 1), ("H", 2)]
        + oracle.gates()
        + [("H", 0), ("H", 1)]
    )


def build_dj_circuit(oracle: DJOracle | int, simplify: bool = False, merge: bool = True) -> EncodedCircuit:
    """Deutsch-Jozsa on three encoded qubits, started from ``|000>_L``.

    The answer qubit is flipped to ``|1>_L`` by the circuit itself.
    """
    oracle = oracle if isinstance(oracle, DJOracle) else DJOracle(int(oracle))
    return compile_logical_circuit(
        dj_gates(oracle), 3, simplify=simplify, merge=merge, label=f"DJ{oracle.id}"
    )


def dj_initial_state() -> np.ndarray:
    logical = np.zeros(8, dtype=complex)
    logical[0] = 1
    return encode_logical(logical, LogicalCodec(3))


def query_zero_probability(state: np.ndarray, codec: LogicalCodec | None = None) -> float:
    """Probability that a projective measurement of both query qubits gives 00."""
    codec = LogicalCodec(3) if codec is None else codec
    amps = codec.decode(state)
    return float(np.sum(np.abs(amps[..., :2]) ** 2, axis=-1))


@dataclass
class DJResult:
    noise: NoiseModel
    estimates: list
    total_times: list

    @property
    def worst(self) -> FidelityEstimate:
        return min(self.estimates, key=lambda e: e.mean)

    @property
    def worst_case(self) -> float:
        return self.worst.mean

    @property
    def average(self) -> float:
        return float(np.mean([e.mean for e in self.estimates]))


def dj_algorithmic_fidelity(
    noise: NoiseModel,
    cfg: TrajectoryConfig,
    oracles=ALL_ORACLES,
    random_inputs: bool = False,
    n_states: int = 8,
) -> DJResult:
    """Ensemble fidelity of each DJ circuit; the worst case is the algorithmic fidelity."""
    codec = LogicalCodec(3)
    if random_inputs:
        initials = sample_initial_states(codec, n_states, cfg.seed)
    else:
        initials = dj_initial_state()[None, :]
    estimates, times = [], []
    for o in oracles:
        o = o if isinstance(o, DJOracle) else DJOracle(int(o))
        circ = build_dj_circuit(o)
        est = ensemble_fidelity(initials, circ.schedule, noise, cfg, label=f"DJ{o.id}")
        est.metadata.update({"oracle": o.id, "t_f": circ.total_time, "n_pulses": len(circ.schedule)})
        estimates.append(est)
        times.append(circ.total_time)
    return DJResult(noise, estimates, times)


SANDWICH_GATES = [("H", 0), ("H", 1), ("CNOT", 0, 1), ("H", 0), ("H", 1)]


def sandwich_schedules() -> tuple[ExchangeSchedule, ExchangeSchedule]:
    """(serial 42-pulse, merged 31-pulse) schedules for ``H H CNOT H H``."""
    serial = compile_logical_circuit(SANDWICH_GATES, 2, simplify=False, merge=False)
    merged = compile_logical_circuit(SANDWICH_GATES, 2, simplify=True, merge=True)
    return serial.schedule.relabel("SERIAL42"), merged.schedule.relabel("MERGED31")


@dataclass
class SandwichPoint:
    noise: NoiseModel
    serial: FidelityEstimate
    merged: FidelityEstimate

    @property
    def gain(self) -> float:
        return self.merged.mean - self.serial.mean

    @property
    def gain_stderr(self) -> float:
        return float(np.hypot(self.serial.stderr, self.merged.stderr))


def sandwiched_cnot_comparison(noise_grid, cfg: TrajectoryConfig, n_states: int = 64) -> list[SandwichPoint]:
    """Serial versus merged sandwich under identical noise and initial states."""
    serial, merged = sandwich_schedules()
    initials = sample_initial_states(LogicalCodec(2), n_states, cfg.seed)
    out = []
    for noise in noise_grid:
        out.append(
            SandwichPoint(
                noise,
                ensemble_fidelity(initials, serial, noise, cfg),
                ensemble_fidelity(initials, merged, noise, cfg),
            )
        )
    return out

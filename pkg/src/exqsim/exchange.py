"""Exchange pulses, schedules and their action on spin-chain states.

A pulse of time ``t`` on sites ``(i, j)`` applies

    U = exp(EXCHANGE_SIGN * i * t * E_ij) = cos(t) I + EXCHANGE_SIGN * i sin(t) E_ij

where ``E_ij`` swaps the two spins (``E**2 = I``).  Times are dimensionless
(units of ``2 hbar / J0``), so ``t = pi/2`` is a SWAP up to a phase and
``t`` and ``t + pi`` differ only by a global sign.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .gates import PAULI
from .hilbert import embed_operator, n_sites

# exp(-i t E): the same sign as Schroedinger evolution under H = E.
EXCHANGE_SIGN = -1

SWAP_TIME = np.pi / 2
ZERO_TOL = 1e-12


def reduce_time(t: float) -> float:
    """Map a pulse time onto ``[0, pi)``."""
    r = float(np.mod(t, np.pi))
    if np.pi - r < ZERO_TOL:
        r = 0.0
    return r


@dataclass(frozen=True)
class ExchangePulse:
    """Exchange between two sites for time ``t`` (stored as given, ``t >= 0``)."""

    pair: tuple[int, int]
    t: float

    def __post_init__(self):
        i, j = (int(s) for s in self.pair)
        if i == j:
            raise ValueError("exchange needs two distinct sites")
        if min(i, j) < 0:
            raise ValueError("sites must be non-negative")
        t = float(self.t)
        if not np.isfinite(t):
            raise ValueError("pulse time must be finite")
        if t < 0:
            t = reduce_time(t)
        object.__setattr__(self, "pair", (min(i, j), max(i, j)))
        object.__setattr__(self, "t", t)

    @property
    def adjacent(self) -> bool:
        return self.pair[1] - self.pair[0] == 1

    def reduced(self) -> "ExchangePulse":
        return ExchangePulse(self.pair, reduce_time(self.t))

    def disjoint(self, other: "ExchangePulse") -> bool:
        return not set(self.pair) & set(other.pair)


@dataclass(frozen=True)
class ExchangeSchedule:
    """Ordered pulse list; the first pulse is applied first."""

    pulses: tuple[ExchangePulse, ...]
    n_physical: int
    label: str = ""
    meta: dict = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        pulses = tuple(
            p if isinstance(p, ExchangePulse) else ExchangePulse(tuple(p[0]), p[1])
            for p in self.pulses
        )
        object.__setattr__(self, "pulses", pulses)
        for p in pulses:
            if p.pair[1] >= self.n_physical:
                raise ValueError(
                    f"pulse on {p.pair} outside chain of {self.n_physical} sites"
                )

    def __len__(self) -> int:
        return len(self.pulses)

    def __iter__(self):
        return iter(self.pulses)

    def __getitem__(self, k):
        return self.pulses[k]

    def __add__(self, other: "ExchangeSchedule") -> "ExchangeSchedule":
        if self.n_physical != other.n_physical:
            raise ValueError("cannot concatenate schedules on different chains")
        label = "+".join(s for s in (self.label, other.label) if s)
        return ExchangeSchedule(self.pulses + other.pulses, self.n_physical, label)

    @property
    def total_time(self) -> float:
        return schedule_total_time(self)

    @property
    def executable(self) -> bool:
        return all(p.adjacent for p in self.pulses)

    @property
    def times(self) -> np.ndarray:
        return np.array([p.t for p in self.pulses])

    @property
    def pairs(self) -> list[tuple[int, int]]:
        return [p.pair for p in self.pulses]

    def shifted(self, offset: int, n_physical: int | None = None) -> "ExchangeSchedule":
        """Same pulses moved ``offset`` sites down a (possibly longer) chain."""
        n = self.n_physical + offset if n_physical is None else n_physical
        pulses = tuple(
            ExchangePulse((p.pair[0] + offset, p.pair[1] + offset), p.t)
            for p in self.pulses
        )
        return ExchangeSchedule(pulses, n, self.label)

    def inverse(self) -> "ExchangeSchedule":
        """Reversed order with negated (re-reduced) times."""
        pulses = tuple(
            ExchangePulse(p.pair, reduce_time(-p.t)) for p in reversed(self.pulses)
        )
        return ExchangeSchedule(pulses, self.n_physical, self.label + "^-1")

    def merged(self) -> "ExchangeSchedule":
        return ExchangeSchedule(merge_pulses(self.pulses), self.n_physical, self.label)

    def relabel(self, label: str) -> "ExchangeSchedule":
        return ExchangeSchedule(self.pulses, self.n_physical, label)

    def to_dict(self) -> dict:
        return {
            "format": "exqsim-schedule",
            "version": 1,
            "label": self.label,
            "n_physical": self.n_physical,
            "pulses": [{"pair": list(p.pair), "t": p.t} for p in self.pulses],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExchangeSchedule":
        try:
            pulses = tuple(ExchangePulse(tuple(p["pair"]), p["t"]) for p in d["pulses"])
            return cls(pulses, int(d["n_physical"]), d.get("label", ""))
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed schedule description: {exc}") from exc

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "ExchangeSchedule":
        return cls.from_dict(json.loads(Path(path).read_text()))


def schedule_total_time(schedule: ExchangeSchedule | Iterable[ExchangePulse]) -> float:
    return float(sum(p.t for p in schedule))


@lru_cache(maxsize=None)
def _partner_index(i: int, j: int, n: int) -> np.ndarray:
    idx = np.arange(1 << n)
    bi = (idx >> (n - 1 - i)) & 1
    bj = (idx >> (n - 1 - j)) & 1
    flip = (1 << (n - 1 - i)) | (1 << (n - 1 - j))
    partner = np.where(bi != bj, idx ^ flip, idx)
    partner.setflags(write=False)
    return partner


def partner_index(pair: tuple[int, int], n: int) -> np.ndarray:
    """Index map ``k -> k`` with the bits of ``pair`` swapped."""
    return _partner_index(int(pair[0]), int(pair[1]), int(n))


def apply_exchange_op(state: np.ndarray, pair: tuple[int, int]) -> np.ndarray:
    """``E_ij psi`` by permuting amplitudes."""
    n = n_sites(state)
    return state[..., partner_index(pair, n)]


def apply_pulse(state: np.ndarray, pulse: ExchangePulse) -> np.ndarray:
    """Closed-form action of one pulse; basis index is the last axis."""
    state = np.asarray(state, dtype=complex)
    n = n_sites(state)
    if pulse.pair[1] >= n:
        raise ValueError(f"pulse on {pulse.pair} outside chain of {n} sites")
    swapped = state[..., partner_index(pulse.pair, n)]
    return np.cos(pulse.t) * state + (EXCHANGE_SIGN * 1j * np.sin(pulse.t)) * swapped


def exchange_unitary(pulse: ExchangePulse, n: int):
    """Return a function applying ``pulse`` on ``n``-spin states."""
    if pulse.pair[1] >= n:
        raise ValueError(f"pulse on {pulse.pair} outside chain of {n} sites")

    def applier(state: np.ndarray) -> np.ndarray:
        if n_sites(state) != n:
            raise ValueError("state dimension does not match chain length")
        return apply_pulse(state, pulse)

    return applier


def apply_schedule(
    state: np.ndarray, schedule: ExchangeSchedule, require_adjacent: bool = True
) -> np.ndarray:
    state = np.asarray(state, dtype=complex)
    if n_sites(state) != schedule.n_physical:
        raise ValueError("state dimension does not match schedule chain length")
    for p in schedule.pulses:
        if require_adjacent and not p.adjacent:
            raise ValueError(f"non-adjacent pulse {p.pair} in executable schedule")
        state = apply_pulse(state, p)
    return state


def schedule_unitary(schedule: ExchangeSchedule, require_adjacent: bool = True) -> np.ndarray:
    """Dense ``2**N`` matrix of a schedule."""
    dim = 2 ** schedule.n_physical
    rows = apply_schedule(np.eye(dim, dtype=complex), schedule, require_adjacent)
    return rows.T


def exchange_operator(pair: tuple[int, int], n: int) -> np.ndarray:
    """Dense ``E_ij = (sigma_i . sigma_j + I) / 2`` built from Kronecker products."""
    i, j = pair
    E = np.eye(2 ** n, dtype=complex)
    for s in PAULI:
        E = E + embed_operator(s, i, n) @ embed_operator(s, j, n)
    return 0.5 * E


def lift_nonadjacent(pulse: ExchangePulse, n: int) -> ExchangeSchedule:
    """Adjacent-only schedule equal to ``pulse`` up to a global phase.

    The far spin is carried next to the near one with SWAP pulses, the
    exchange is applied, and the SWAPs are undone.
    """
    i, j = pulse.pair
    if j >= n:
        raise ValueError(f"pulse on {pulse.pair} outside chain of {n} sites")
    if pulse.adjacent:
        return ExchangeSchedule((pulse,), n)
    inward = [ExchangePulse((k - 1, k), SWAP_TIME) for k in range(j, i + 1, -1)]
    core = ExchangePulse((i, i + 1), pulse.t)
    pulses = tuple(inward) + (core,) + tuple(reversed(inward))
    return ExchangeSchedule(pulses, n, f"lift{pulse.pair}")


def merge_pulses(pulses: Sequence[ExchangePulse]) -> tuple[ExchangePulse, ...]:
    """Combine same-pair pulses that are separated only by commuting pulses.

    A new pulse absorbs the most recent pulse on the same pair if every
    pulse in between acts on disjoint sites; the combined pulse stays at the
    later position.  Times are reduced modulo ``pi`` and pulses that reduce
    to zero are dropped.  The product changes at most by a global phase.
    """
    out: list[ExchangePulse] = []
    for p in pulses:
        t = p.t
        for k in range(len(out) - 1, -1, -1):
            q = out[k]
            if q.pair == p.pair:
                t = t + q.t
                del out[k]
                break
            if not q.disjoint(p):
                break
        t = reduce_time(t)
        if t > ZERO_TOL:
            out.append(ExchangePulse(p.pair, t))
    return tuple(out)


def block_swap_pulses(block: int, n_physical: int) -> tuple[ExchangePulse, ...]:
    """Nine SWAP pulses exchanging three-site blocks ``block`` and ``block + 1``."""
    a = 3 * block
    if a + 5 >= n_physical:
        raise ValueError("block swap runs past the end of the chain")
    pulses = []
    for m in range(3):
        src = a + 3 + m
        for k in range(src, a + m, -1):
            pulses.append(ExchangePulse((k - 1, k), SWAP_TIME))
    return tuple(pulses)


def commutation_equivalent(a, b, tol: float = 1e-5) -> bool:
    """True if two pulse lists differ only by reordering pulses on disjoint pairs.

    Uses the projection test for partially commutative words: for every
    pair of overlapping pairs, the subsequences restricted to those pairs
    must agree (pair by pair, times within ``tol`` modulo ``pi``).
    """
    a, b = tuple(a), tuple(b)
    if len(a) != len(b):
        return False
    pairs = sorted({p.pair for p in a} | {p.pair for p in b})
    for x in pairs:
        for y in pairs:
            if y < x or set(x).isdisjoint(y):
                continue
            pa = [p for p in a if p.pair in (x, y)]
            pb = [p for p in b if p.pair in (x, y)]
            if len(pa) != len(pb):
                return False
            for p, q in zip(pa, pb):
                d = abs(reduce_time(p.t) - reduce_time(q.t))
                if p.pair != q.pair or min(d, np.pi - d) > tol:
                    return False
    return True

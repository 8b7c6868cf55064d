"""Canonical exchange sequences: tabulated CNOT schedules and single-qubit gates.

Two-qubit schedules are read from ``data/library.json`` (six-decimal times,
0-based sites).  Single-qubit gates on one three-spin block are given in
closed form; the block's first pair is ``(0, 1)`` ("12") and its second
pair is ``(1, 2)`` ("23").
"""

from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources

import numpy as np

from .exchange import (
    ExchangePulse,
    ExchangeSchedule,
    block_swap_pulses,
    merge_pulses,
    reduce_time,
)
from .hilbert import LogicalCodec

TWO_QUBIT_NAMES = ("CORE19", "CNOT35", "CNOT30", "SANDWICH31")

# Closed-form single-qubit times.
H_OUTER = reduce_time(-np.arctan(np.sqrt(2.0)) / 2)
H_MIDDLE = float(np.arcsin(np.sqrt(2.0 / 3.0)))
NOT_OUTER = float(np.arctan(np.sqrt(2.0)))
NOT_MIDDLE = float(np.arcsin(1 / np.sqrt(3.0)))
T_TIME = np.pi / 8
S_T1 = float(np.arcsin(1 / 3) / 2 + np.pi / 4)
S_T2 = float(np.arcsin(1 / np.sqrt(3.0)))
S_T3 = float(np.arcsin(1 / 3) / 2 - np.pi / 4)

P12 = (0, 1)
P23 = (1, 2)


def _block(pulses, label) -> ExchangeSchedule:
    return ExchangeSchedule(
        tuple(ExchangePulse(p, reduce_time(t)) for p, t in pulses), 3, label
    )


def single_qubit_gate(name: str) -> ExchangeSchedule:
    """Exchange sequence on one block for ``H``, ``NOT``, ``T``, ``S`` or ``SDG``.

    ``S`` is the real rotation ``sqrt3/2 I - i/2 sigma_y`` used to diagonalize
    the CNOT core; ``SDG`` is its inverse.
    """
    if name == "H":
        return _block([(P12, H_OUTER), (P23, H_MIDDLE), (P12, H_OUTER)], "H")
    if name == "NOT":
        return _block([(P23, NOT_OUTER), (P12, NOT_MIDDLE), (P23, NOT_OUTER)], "NOT")
    if name == "T":
        return _block([(P12, T_TIME)], "T")
    if name == "SDG":
        return _block([(P12, S_T3), (P23, S_T2), (P12, S_T1)], "SDG")
    if name == "S":
        return _block([(P12, -S_T1), (P23, -S_T2), (P12, -S_T3)], "S")
    raise KeyError(f"no single-qubit sequence named {name!r}")


def z_rotation_block(angle: float) -> ExchangeSchedule:
    """``exp(i angle sigma_z)`` on one block as a single 1-2 exchange."""
    return _block([(P12, angle)], "RZ")


@lru_cache(maxsize=None)
def _raw_library() -> dict:
    text = resources.files("exqsim").joinpath("data/library.json").read_text()
    return json.loads(text)


class CanonicalLibrary:
    """Named read-only schedules from the shipped data file."""

    names = TWO_QUBIT_NAMES + ("H", "NOT", "T")

    def __init__(self):
        raw = _raw_library()
        self.version = raw["version"]
        self._schedules = {
            name: ExchangeSchedule.from_dict({**d, "label": name})
            for name, d in raw["schedules"].items()
        }
        for name in ("H", "NOT", "T"):
            self._schedules[name] = single_qubit_gate(name)

    def __getitem__(self, name: str) -> ExchangeSchedule:
        try:
            return self._schedules[name]
        except KeyError:
            raise KeyError(f"unknown schedule {name!r}; have {sorted(self._schedules)}")

    def __contains__(self, name: str) -> bool:
        return name in self._schedules

    def get(self, name: str) -> ExchangeSchedule:
        return self[name]


@lru_cache(maxsize=1)
def canonical_library() -> CanonicalLibrary:
    return CanonicalLibrary()


def build_cnot13(codec: LogicalCodec, merge: bool = True) -> ExchangeSchedule:
    """CNOT from logical qubit 0 to logical qubit 2 on a nine-spin chain.

    Blocks 1 and 2 are exchanged with SWAP pulses, the tabulated adjacent
    CNOT acts on blocks 0 and 1, and the blocks are swapped back.
    """
    if codec.n_logical != 3 or codec.n_physical != 9:
        raise ValueError("CNOT(1,3) construction needs three logical qubits (9 spins)")
    swap = block_swap_pulses(1, 9)
    cnot = canonical_library()["CNOT30"].shifted(0, 9)
    pulses = swap + cnot.pulses + swap
    if merge:
        pulses = merge_pulses(pulses)
    return ExchangeSchedule(pulses, 9, "CNOT13")

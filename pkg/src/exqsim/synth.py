"""Numerical synthesis of the local gates around the 19-pulse CNOT core.

The 35-pulse schedule is ``A | CORE19 | B`` where ``A`` and ``B`` each hold
four pulses per block on the pattern 12, 23, 12, 23.  The sixteen free times
are found by minimizing ``C = distance + leakage`` with a Nelder-Mead
simplex search, started from the best of many uniform random shots.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import null_space, polar
from scipy.optimize import linear_sum_assignment

from .exchange import ExchangePulse, ExchangeSchedule, apply_schedule, reduce_time
from .gates import CNOT, align_phase, is_unitary, raw_distance
from .hilbert import LogicalCodec, RngStream
from .library import canonical_library
from .quaternion import logical_pulse

LOCAL_PAIRS = ((0, 1), (1, 2), (0, 1), (1, 2), (3, 4), (4, 5), (3, 4), (4, 5))
N_TIMES = 16


@dataclass(frozen=True)
class CostEvaluation:
    """Cost terms of a candidate CNOT.

    ``distance`` is the element-wise absolute difference between the logical
    block and CNOT after global-phase alignment; ``leakage`` is the summed
    squared modulus of the logical-to-complement block (independent of the
    complement basis).  ``leakage_abs`` and ``leakage_frobenius`` are the
    absolute-value sum in a fixed orthonormal completion and the block's
    Frobenius norm.
    """

    distance: float
    leakage: float
    raw_distance: float = float("nan")
    leakage_abs: float = float("nan")
    leakage_frobenius: float = float("nan")

    @property
    def total(self) -> float:
        return self.distance + self.leakage


def local_schedule(times, core: ExchangeSchedule | None = None) -> ExchangeSchedule:
    """35-pulse schedule ``A | core | B`` from sixteen local times."""
    times = np.asarray(times, dtype=float)
    if times.shape != (N_TIMES,):
        raise ValueError("expected sixteen local times")
    core = canonical_library()["CORE19"] if core is None else core
    a = tuple(ExchangePulse(p, reduce_time(t)) for p, t in zip(LOCAL_PAIRS, times[:8]))
    b = tuple(ExchangePulse(p, reduce_time(t)) for p, t in zip(LOCAL_PAIRS, times[8:]))
    return ExchangeSchedule(a + core.pulses + b, 6, "CNOT35")


def table_local_times() -> np.ndarray:
    """Sixteen local times of the tabulated 35-pulse CNOT (as printed)."""
    s = canonical_library()["CNOT35"]
    return np.array([p.t for p in s.pulses[:8] + s.pulses[27:]])


class CnotCostModel:
    """Evaluates the CNOT cost for the 35-pulse layout.

    ``evaluate`` propagates the code space through the full six-spin
    schedule.  ``fast`` uses the fact that intra-block pulses act on the code
    as 2x2 rotations and leave the leakage of the core unchanged; both give
    the same distance and squared leakage.
    """

    def __init__(self, core: ExchangeSchedule | None = None):
        self.core = canonical_library()["CORE19"] if core is None else core
        self.codec = LogicalCodec(2)
        self.W = self.codec.isometry
        self.complement = null_space(self.W.conj().T)
        self.basis = np.hstack([self.W, self.complement])
        rows = apply_schedule(self.W.T.copy(), self.core)
        self.core_block = (rows @ self.W.conj()).T
        self.core_leakage = float(4 - np.sum(np.abs(self.core_block) ** 2))
        self.n_evals = 0

    def full_unitary(self, times) -> np.ndarray:
        """Full 64x64 unitary in the ``[codewords; complement]`` ordering."""
        from .exchange import schedule_unitary

        U = schedule_unitary(local_schedule(times, self.core))
        return self.basis.conj().T @ U @ self.basis

    def evaluate(self, times) -> CostEvaluation:
        self.n_evals += 1
        sched = local_schedule(times, self.core)
        rows = apply_schedule(self.W.T.copy(), sched)  # row x is U W e_x
        block = (rows @ self.W.conj()).T
        leak_block = (rows @ self.complement.conj()).T
        leak_sq = float(np.sum(np.abs(leak_block) ** 2))
        return CostEvaluation(
            distance=float(np.sum(np.abs(align_phase(block, CNOT) - CNOT))),
            leakage=leak_sq,
            raw_distance=raw_distance(block, CNOT),
            leakage_abs=float(np.sum(np.abs(leak_block))),
            leakage_frobenius=float(np.sqrt(leak_sq)),
        )

    def _local(self, times) -> tuple[np.ndarray, np.ndarray]:
        gates = ("E12", "E23", "E12", "E23")

        def block(ts):
            U = np.eye(2, dtype=complex)
            for g, t in zip(gates, ts):
                U = logical_pulse(g, t) @ U
            return U

        A = np.kron(block(times[0:4]), block(times[4:8]))
        B = np.kron(block(times[8:12]), block(times[12:16]))
        return A, B

    def fast(self, times) -> float:
        """Total cost ``distance + leakage`` through 4x4 algebra."""
        self.n_evals += 1
        A, B = self._local(np.asarray(times, dtype=float))
        L = B @ self.core_block @ A
        return float(np.sum(np.abs(align_phase(L, CNOT) - CNOT))) + self.core_leakage

    __call__ = fast


def cnot_cost(times, model: CnotCostModel | None = None) -> CostEvaluation:
    model = CnotCostModel() if model is None else model
    return model.evaluate(times)


@dataclass
class SimplexState:
    vertices: np.ndarray
    values: np.ndarray
    iteration: int = 0

    def __post_init__(self):
        if self.vertices.shape[0] != self.vertices.shape[1] + 1:
            raise ValueError("simplex needs dimension + 1 vertices")

    def order(self) -> None:
        idx = np.argsort(self.values, kind="stable")
        self.vertices = self.vertices[idx]
        self.values = self.values[idx]

    @property
    def best(self) -> float:
        return float(self.values.min())

    @property
    def worst(self) -> float:
        return float(self.values.max())

    @property
    def diameter(self) -> float:
        return float(np.max(np.linalg.norm(self.vertices[1:] - self.vertices[0], axis=1)))


@dataclass
class NelderMeadResult:
    x: np.ndarray
    fun: float
    n_iter: int
    n_eval: int
    converged: bool
    history: list = field(default_factory=list)


def nelder_mead(
    cost: Callable[[np.ndarray], float],
    x0,
    tol: float = 1e-10,
    max_iter: int = 10000,
    step: float = 0.1,
    alpha: float = 1.0,
    gamma: float = 2.0,
    rho: float = 0.5,
    sigma: float = 0.5,
) -> NelderMeadResult:
    """Minimize ``cost`` with the reflect/expand/contract/shrink simplex method.

    Stops when the simplex diameter or the spread of vertex values drops
    below ``tol``, or after ``max_iter`` iterations (``converged=False``).
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    m = x0.size
    if m < 1:
        raise ValueError("need at least one parameter")
    if tol <= 0:
        raise ValueError("tol must be positive")
    n_eval = 0

    def f(x):
        nonlocal n_eval
        n_eval += 1
        return float(cost(x))

    verts = np.vstack([x0] + [x0 + step * e for e in np.eye(m)])
    state = SimplexState(verts, np.array([f(v) for v in verts]))
    history = []
    converged = False
    while state.iteration < max_iter:
        state.order()
        history.append(state.best)
        if state.diameter < tol or state.worst - state.best < tol:
            converged = True
            break
        state.iteration += 1
        centroid = state.vertices[:-1].mean(axis=0)
        worst = state.vertices[-1]
        xr = centroid + alpha * (centroid - worst)
        fr = f(xr)
        if fr < state.values[0]:
            xe = centroid + gamma * (xr - centroid)
            fe = f(xe)
            if fe < fr:
                state.vertices[-1], state.values[-1] = xe, fe
            else:
                state.vertices[-1], state.values[-1] = xr, fr
            continue
        if fr < state.values[-2]:
            state.vertices[-1], state.values[-1] = xr, fr
            continue
        if fr < state.values[-1]:
            xc = centroid + rho * (xr - centroid)
            fc = f(xc)
            if fc <= fr:
                state.vertices[-1], state.values[-1] = xc, fc
                continue
        else:
            xc = centroid + rho * (worst - centroid)
            fc = f(xc)
            if fc < state.values[-1]:
                state.vertices[-1], state.values[-1] = xc, fc
                continue
        best = state.vertices[0]
        state.vertices[1:] = best + sigma * (state.vertices[1:] - best)
        state.values[1:] = [f(v) for v in state.vertices[1:]]
    state.order()
    return NelderMeadResult(
        x=state.vertices[0].copy(),
        fun=float(state.values[0]),
        n_iter=state.iteration,
        n_eval=n_eval,
        converged=converged,
        history=history,
    )


@dataclass
class SynthesisResult:
    schedule: ExchangeSchedule
    times: np.ndarray
    cost: CostEvaluation
    start_cost: float
    trace: list


def multi_start_synthesize(
    n_shots: int,
    rng: RngStream | np.random.Generator | int,
    max_iter: int = 20000,
    restarts: int = 20,
    tol: float = 1e-12,
    seed_times=None,
    model: CnotCostModel | None = None,
) -> SynthesisResult:
    """Shoot ``n_shots`` uniform starts in ``[0, pi)**16`` and refine the best.

    The refinement repeats Nelder-Mead from its own result (a fresh simplex)
    up to ``restarts`` times while it keeps improving.  ``seed_times``, if
    given, is used as the first shot.
    """
    if n_shots < 1:
        raise ValueError("n_shots must be >= 1")
    if isinstance(rng, int):
        rng = RngStream(rng, purpose=2)
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    model = CnotCostModel() if model is None else model
    shots = gen.uniform(0.0, np.pi, size=(n_shots, N_TIMES))
    if seed_times is not None:
        shots[0] = np.asarray(seed_times, dtype=float)
    values = np.array([model.fast(x) for x in shots])
    k = int(np.argmin(values))
    x, fx = shots[k], float(values[k])
    trace = [(0, fx)]
    step = 0.2
    for r in range(restarts):
        res = nelder_mead(model.fast, x, tol=tol, max_iter=max_iter, step=step)
        improved = fx - res.fun
        if res.fun < fx:
            x, fx = res.x, res.fun
        trace.append((r + 1, fx))
        if improved < 1e-13:
            break
        step = max(step / 2, 1e-3)
    x = np.array([reduce_time(t) for t in x])
    return SynthesisResult(
        schedule=local_schedule(x, model.core),
        times=x,
        cost=model.evaluate(x),
        start_cost=float(values[k]),
        trace=trace,
    )


# Magic (Bell) basis.
MAGIC = np.array(
    [[1, 0, 0, 1j], [0, 1j, 1, 0], [0, 1j, -1, 0], [1, 0, 0, -1j]], dtype=complex
) / np.sqrt(2)


@dataclass(frozen=True)
class MakhlinClass:
    """Spectrum of ``m = M_B^T M_B`` for ``U`` normalized to unit determinant.

    The spectrum is defined up to an overall sign (the fourth root of the
    determinant is ambiguous by powers of ``i``).  ``g1`` and ``g2`` are the
    scalar invariants derived from ``m``.
    """

    spectrum: tuple[complex, ...]
    g1: complex
    g2: float

    def matches(self, other: "MakhlinClass", tol: float = 1e-8) -> bool:
        a = np.array(self.spectrum)
        b = np.array(other.spectrum)
        return min(_multiset_gap(a, b), _multiset_gap(a, -b)) <= tol


def _multiset_gap(a: np.ndarray, b: np.ndarray) -> float:
    cost = np.abs(a[:, None] - b[None, :])
    r, c = linear_sum_assignment(cost)
    return float(cost[r, c].max())


def makhlin_class(U: np.ndarray, atol: float = 1e-6) -> MakhlinClass:
    """Local-equivalence class of a two-qubit gate.

    Inputs within ``atol`` of unitary are projected onto the nearest unitary
    first; anything further off raises ``ValueError``.
    """
    U = np.asarray(U, dtype=complex)
    if U.shape != (4, 4):
        raise ValueError("expected a 4x4 matrix")
    if not is_unitary(U, atol):
        raise ValueError("input is not unitary")
    U, _ = polar(U)
    det = np.linalg.det(U)
    V = U / det ** 0.25
    MB = MAGIC.conj().T @ V @ MAGIC
    m = MB.T @ MB
    eigs = np.linalg.eigvals(m)
    tr = np.trace(m)
    g1 = tr**2 / 16
    g2 = float(np.real((tr**2 - np.trace(m @ m)) / 4))
    return MakhlinClass(tuple(eigs), complex(g1), g2)


def is_locally_equivalent(U: np.ndarray, V: np.ndarray, tol: float = 1e-8) -> bool:
    return makhlin_class(U).matches(makhlin_class(V), tol)

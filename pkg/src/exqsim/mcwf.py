"""Monte Carlo wavefunction propagation of exchange schedules with noise.

Each site carries a dephasing jump ``C = sqrt(gamma_dep/2) sigma_z`` and an
emission jump ``C = sqrt(gamma_emi) S^-`` (bit 1 -> bit 0).  With this
normalization a lone spin loses coherence as ``exp(-gamma_dep t)`` and
excited population as ``exp(-gamma_emi t)``.

A step of length ``dt`` first draws ``r``: with probability
``P_tot = dt sum_m <C_m^dag C_m>`` a jump is applied (the operator picked
with a second draw ``s``), otherwise the state evolves under the
conditional Hamiltonian ``H - i/2 sum C^dag C`` and is renormalized.

Two propagators are available for the no-jump step:

``dense``  matrix exponential of the full conditional Hamiltonian;
``split``  ``exp(-i D dt/2) exp(-i T dt) exp(-i D dt/2)`` with ``D`` the
           diagonal part (coupling plus dephasing decay) and ``T`` the
           flip-flop plus emission decay, all evaluated with bit operations.

Trajectories are vectorized in batches; trajectory ``k`` draws its random
numbers from its own counter-based stream, so results do not depend on the
batching or the number of workers.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import expm

from .exchange import (
    EXCHANGE_SIGN,
    ExchangePulse,
    ExchangeSchedule,
    apply_pulse,
    exchange_operator,
    partner_index,
)
from .hilbert import RngStream, n_sites

BACKENDS = ("dense", "split")


class StepSizeError(RuntimeError):
    """Jump probability per step too large for the first-order scheme."""

    def __init__(self, p_tot: float, dt: float, noise: "NoiseModel"):
        self.p_tot = p_tot
        self.dt = dt
        self.noise = noise
        super().__init__(
            f"P_tot={p_tot:.3g} per step exceeds the guard "
            f"(gamma_dep={noise.gamma_dep:g}, gamma_emi={noise.gamma_emi:g}, dt={dt:g}); "
            "use more steps per gate"
        )


@dataclass(frozen=True)
class NoiseModel:
    """Dimensionless rates ``hbar Gamma / J0`` of dephasing and emission."""

    gamma_dep: float = 0.0
    gamma_emi: float = 0.0

    def __post_init__(self):
        for name in ("gamma_dep", "gamma_emi"):
            v = float(getattr(self, name))
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be a non-negative number")
            object.__setattr__(self, name, v)

    @classmethod
    def with_ratio(cls, gamma_dep: float, ratio: float = 100.0) -> "NoiseModel":
        """Dephasing plus emission at ``gamma_dep / ratio``."""
        return cls(gamma_dep, gamma_dep / ratio)

    @property
    def silent(self) -> bool:
        return self.gamma_dep == 0 and self.gamma_emi == 0

    def jump_labels(self, n: int) -> list[tuple[str, int]]:
        out = []
        if self.gamma_dep > 0:
            out += [("dep", k) for k in range(n)]
        if self.gamma_emi > 0:
            out += [("emi", k) for k in range(n)]
        return out

    def decay_diagonal(self, n: int) -> np.ndarray:
        """Diagonal of ``sum_m C_m^dag C_m`` over the ``2**n`` basis."""
        bits = _bits(n)
        return n * self.gamma_dep / 2 + self.gamma_emi * bits.sum(axis=1)

    def jump_matrices(self, n: int) -> list[np.ndarray]:
        """Dense jump operators (for oracles and tests)."""
        from .hilbert import embed_operator, single_site_matrix

        mats = []
        sz = np.diag([1.0, -1.0]).astype(complex)
        for kind, k in self.jump_labels(n):
            if kind == "dep":
                mats.append(np.sqrt(self.gamma_dep / 2) * embed_operator(sz, k, n))
            else:
                mats.append(
                    np.sqrt(self.gamma_emi)
                    * embed_operator(single_site_matrix("Sminus"), k, n)
                )
        return mats


@dataclass(frozen=True)
class TrajectoryConfig:
    steps_per_gate: int = 20
    n_traj: int = 512
    seed: int = 0
    backend: str = "split"
    max_p_tot: float = 0.1
    batch_size: int | None = None
    workers: int | None = None

    def __post_init__(self):
        if self.steps_per_gate < 1:
            raise ValueError("steps_per_gate must be >= 1")
        if self.n_traj < 1:
            raise ValueError("n_traj must be >= 1")
        if self.backend not in BACKENDS:
            raise ValueError(f"backend must be one of {BACKENDS}")
        if not 0 < self.max_p_tot <= 1:
            raise ValueError("max_p_tot must lie in (0, 1]")


@dataclass(frozen=True)
class Segment:
    """A stretch of evolution: an exchange pulse, idling, or a fixed Hamiltonian."""

    duration: float
    pair: tuple[int, int] | None = None
    hamiltonian: np.ndarray | None = field(default=None, compare=False, hash=False)
    n_steps: int | None = None
    label: str = ""

    @property
    def kind(self) -> str:
        if self.hamiltonian is not None:
            return "hamiltonian"
        return "idle" if self.pair is None else "exchange"


def program_from_schedule(schedule: ExchangeSchedule | Sequence[Segment]) -> list[Segment]:
    if isinstance(schedule, ExchangeSchedule):
        for p in schedule.pulses:
            if not p.adjacent:
                raise ValueError(f"non-adjacent pulse {p.pair} cannot be propagated")
        return [Segment(p.t, p.pair) for p in schedule.pulses]
    return list(schedule)


def idle_program(schedule: ExchangeSchedule) -> list[Segment]:
    """Pure waiting on the same time grid as ``schedule``."""
    return [Segment(p.t, None) for p in schedule.pulses]


def analytic_dephasing_fidelity(gamma: float, t: float) -> float:
    """Bloch-sphere averaged fidelity of one dephasing qubit, ``(2 + e^{-gamma t}) / 3``."""
    if gamma < 0 or t < 0:
        raise ValueError("gamma and t must be non-negative")
    return (2.0 + np.exp(-gamma * t)) / 3.0


_BITS_CACHE: dict[int, np.ndarray] = {}


def _bits(n: int) -> np.ndarray:
    if n not in _BITS_CACHE:
        idx = np.arange(1 << n)
        b = np.array([(idx >> (n - 1 - k)) & 1 for k in range(n)]).T
        b.setflags(write=False)
        _BITS_CACHE[n] = b
    return _BITS_CACHE[n]


def conditional_hamiltonian(segment: Segment | ExchangePulse | None, noise: NoiseModel, n: int) -> np.ndarray:
    """Dense ``H - i/2 sum C^dag C`` for one segment."""
    dim = 1 << n
    if isinstance(segment, ExchangePulse):
        segment = Segment(segment.t, segment.pair)
    if segment is None or segment.kind == "idle":
        H = np.zeros((dim, dim), dtype=complex)
    elif segment.kind == "exchange":
        H = -EXCHANGE_SIGN * exchange_operator(segment.pair, n)
    else:
        H = np.asarray(segment.hamiltonian, dtype=complex)
    return H - 0.5j * np.diag(noise.decay_diagonal(n))


class DenseKernel:
    def __init__(self, segment, noise: NoiseModel, dt: float, n: int):
        self.matrix_T = expm(-1j * dt * conditional_hamiltonian(segment, noise, n)).T.copy()

    def apply(self, psi: np.ndarray) -> np.ndarray:
        return psi @ self.matrix_T


class SplitKernel:
    def __init__(self, segment, noise: NoiseModel, dt: float, n: int):
        if isinstance(segment, ExchangePulse):
            segment = Segment(segment.t, segment.pair)
        if segment is not None and segment.kind == "hamiltonian":
            raise ValueError("split propagation only handles exchange pulses")
        dim = 1 << n
        bits = _bits(n)
        # D: diagonal coherent part and dephasing decay (a constant here).
        d_half = np.full(dim, np.exp(-n * noise.gamma_dep * dt / 8), dtype=complex)
        # T: flip-flop on the active pair and emission decay.
        emis = np.exp(-0.5 * noise.gamma_emi * dt * bits.sum(axis=1)).astype(complex)
        self.pair = None if segment is None else segment.pair
        if self.pair is not None:
            i, j = self.pair
            equal = bits[:, i] == bits[:, j]
            # Diagonal of -s E: -s on equal-bit states, 0 otherwise.
            d_half = d_half * np.where(equal, np.exp(1j * EXCHANGE_SIGN * dt / 2), 1.0)
            self.a = np.where(equal, 1.0, np.cos(dt)).astype(complex) * emis
            self.b = np.where(equal, 0.0, 1j * EXCHANGE_SIGN * np.sin(dt)) * emis
            self.partner = partner_index(self.pair, n)
            # Fold both half steps into the two coefficient vectors:
            # out = d a d psi + d b d[partner] psi[partner].
            self.coef_self = d_half * self.a * d_half
            self.coef_partner = d_half * self.b * d_half[self.partner]
        else:
            self.coef_self = d_half * d_half * emis
        self.n = n

    def apply(self, psi: np.ndarray) -> np.ndarray:
        if self.pair is None:
            return psi * self.coef_self
        # coef_partner vanishes where the partner is the state itself.
        swapped = np.take(psi, self.partner, axis=-1)
        return self.coef_self * psi + self.coef_partner * swapped


def _kernel(segment, noise, dt, n, backend):
    if backend == "dense" or (isinstance(segment, Segment) and segment.kind == "hamiltonian"):
        return DenseKernel(segment, noise, dt, n)
    return SplitKernel(segment, noise, dt, n)


def dense_step(state, active_pulse, noise: NoiseModel, dt: float) -> np.ndarray:
    """No-jump propagation ``exp(-i H_cond dt) psi`` (not renormalized)."""
    state = np.asarray(state, dtype=complex)
    return DenseKernel(active_pulse, noise, dt, n_sites(state)).apply(state)


def split_step(state, active_pulse, noise: NoiseModel, dt: float) -> np.ndarray:
    """Symmetric split no-jump propagation (not renormalized)."""
    state = np.asarray(state, dtype=complex)
    return SplitKernel(active_pulse, noise, dt, n_sites(state)).apply(state)


class JumpSet:
    """Per-site dephasing and emission jumps of a noise model."""

    def __init__(self, noise: NoiseModel, n: int):
        self.noise = noise
        self.n = n
        self.labels = noise.jump_labels(n)
        bits = _bits(n)
        self.bits = bits.astype(float)
        self.zsign = (1 - 2 * bits).astype(float)
        self.idx = np.arange(1 << n)
        self.n_dep = n if noise.gamma_dep > 0 else 0

    @property
    def empty(self) -> bool:
        return not self.labels

    @property
    def state_dependent(self) -> bool:
        return self.noise.gamma_emi > 0

    def constant_probabilities(self, dt: float) -> np.ndarray:
        """``dt <C_m^dag C_m>`` when every jump rate is state independent."""
        return np.full(self.n_dep, dt * self.noise.gamma_dep / 2)

    def probabilities(self, psi: np.ndarray, dt: float) -> np.ndarray:
        """``dt <C_m^dag C_m>`` for every row of ``psi``; shape ``(B, M)``."""
        B = psi.shape[0]
        parts = []
        if self.noise.gamma_dep > 0:
            parts.append(np.full((B, self.n), dt * self.noise.gamma_dep / 2))
        if self.noise.gamma_emi > 0:
            pop = (psi.real**2 + psi.imag**2) @ self.bits
            parts.append(dt * self.noise.gamma_emi * pop)
        return np.hstack(parts)

    def apply(self, psi: np.ndarray, m: np.ndarray) -> np.ndarray:
        """Apply jump ``m[r]`` to row ``r`` and renormalize."""
        out = np.empty_like(psi)
        for r, mm in enumerate(m):
            kind, k = self.labels[mm]
            if kind == "dep":
                v = psi[r] * self.zsign[:, k]
            else:
                mask = 1 << (self.n - 1 - k)
                v = np.zeros_like(psi[r])
                src = self.idx[(self.idx & mask) != 0]
                v[src ^ mask] = psi[r, src]
            out[r] = v / np.linalg.norm(v)
        return out


@dataclass
class _Plan:
    kernels: list
    steps: list
    dts: list
    n: int
    jumps: JumpSet
    noise: NoiseModel
    guard: float

    @property
    def total_steps(self) -> int:
        return int(sum(self.steps))


def _plan(program: list[Segment], noise: NoiseModel, cfg: TrajectoryConfig, n: int) -> _Plan:
    kernels, steps, dts = [], [], []
    cache = {}
    for seg in program:
        ns = seg.n_steps or cfg.steps_per_gate
        if seg.duration <= 0:
            continue
        dt = seg.duration / ns
        key = (seg.pair, seg.kind, dt, id(seg.hamiltonian))
        if key not in cache:
            cache[key] = _kernel(seg, noise, dt, n, cfg.backend)
        kernels.append(cache[key])
        steps.append(ns)
        dts.append(dt)
    return _Plan(kernels, steps, dts, n, JumpSet(noise, n), noise, cfg.max_p_tot)


def _propagate(psi: np.ndarray, plan: _Plan, draws: np.ndarray, trace=None, ids=None) -> np.ndarray:
    """Run a batch of trajectories; ``draws`` has shape ``(B, steps, 2)``."""
    jumps = plan.jumps
    step = 0
    t = 0.0
    for kernel, ns, dt in zip(plan.kernels, plan.steps, plan.dts):
        for _ in range(ns):
            new = kernel.apply(psi)
            if not jumps.empty:
                if jumps.state_dependent:
                    dP = jumps.probabilities(psi, dt)
                    P = dP.sum(axis=1)
                    pmax = float(P.max())
                else:
                    dP = jumps.constant_probabilities(dt)
                    pmax = float(dP.sum())
                    P = np.full(psi.shape[0], pmax)
                    dP = np.broadcast_to(dP, (psi.shape[0], dP.size))
                if pmax >= plan.guard:
                    raise StepSizeError(pmax, dt, plan.noise)
                jumped = np.nonzero(draws[:, step, 0] < P)[0]
                if jumped.size:
                    s = draws[jumped, step, 1] * P[jumped]
                    cum = np.cumsum(dP[jumped], axis=1)
                    m = np.minimum((cum < s[:, None]).sum(axis=1), dP.shape[1] - 1)
                    new[jumped] = jumps.apply(psi[jumped], m)
                    if trace is not None:
                        for r, mm in zip(jumped, m):
                            kind, site = jumps.labels[mm]
                            trace.append((int(ids[r]), step, t, kind, site))
            norms = np.sqrt(np.sum(new.view(float) ** 2, axis=1))
            psi = new / norms[:, None]
            step += 1
            t += dt
    return psi


def conditional_step(
    state,
    active_pulse,
    noise: NoiseModel,
    dt: float,
    rng,
    backend: str = "split",
    max_p_tot: float = 0.1,
) -> np.ndarray:
    """One MCWF step for a single state.

    ``rng`` is a ``numpy.random.Generator`` or an explicit pair ``(r, s)``
    of uniform numbers.  ``active_pulse`` is an ``ExchangePulse`` (only its
    pair is used), a ``Segment`` or ``None`` for idling.
    """
    state = np.asarray(state, dtype=complex)
    n = n_sites(state)
    if isinstance(active_pulse, ExchangePulse):
        seg = Segment(dt, active_pulse.pair, n_steps=1)
    elif active_pulse is None:
        seg = Segment(dt, None, n_steps=1)
    else:
        seg = Segment(dt, active_pulse.pair, active_pulse.hamiltonian, 1, active_pulse.label)
    if isinstance(rng, np.random.Generator):
        draw = rng.random(2)
    else:
        draw = np.asarray(rng, dtype=float)
    cfg = TrajectoryConfig(backend=backend, max_p_tot=max_p_tot)
    plan = _plan([seg], noise, cfg, n)
    return _propagate(state[None, :].copy(), plan, draw.reshape(1, 1, 2))[0]


def trajectory_draws(stream: RngStream, n_steps: int) -> np.ndarray:
    return stream.generator().random((n_steps, 2))


def run_trajectory(
    initial,
    schedule,
    noise: NoiseModel,
    cfg: TrajectoryConfig,
    stream: RngStream | int = 0,
    trace: list | None = None,
) -> np.ndarray:
    """Propagate one trajectory; identical ``stream`` gives identical output."""
    initial = np.asarray(initial, dtype=complex)
    n = n_sites(initial)
    if isinstance(stream, int):
        stream = RngStream(cfg.seed, stream)
    plan = _plan(program_from_schedule(schedule), noise, cfg, n)
    draws = trajectory_draws(stream, plan.total_steps)[None]
    psi = initial[None, :] / np.linalg.norm(initial)
    return _propagate(psi, plan, draws, trace, np.array([stream.stream]))[0]


def reference_state(initial, schedule) -> np.ndarray:
    """Noise-free final state using exact segment unitaries."""
    psi = np.asarray(initial, dtype=complex)
    psi = psi / np.linalg.norm(psi, axis=-1, keepdims=True)
    for seg in program_from_schedule(schedule):
        if seg.kind == "exchange":
            psi = apply_pulse(psi, ExchangePulse(seg.pair, seg.duration))
        elif seg.kind == "hamiltonian":
            psi = psi @ expm(-1j * seg.duration * np.asarray(seg.hamiltonian)).T
    return psi


@dataclass(frozen=True)
class FidelityEstimate:
    """Trajectory-averaged fidelity.

    ``n_traj`` is the number of trajectories per initial state; the standard
    error uses all ``n_traj * n_initial_states`` samples.
    """

    mean: float
    stderr: float
    n_traj: int
    n_initial_states: int
    converged: bool
    metadata: dict = field(default_factory=dict)

    @property
    def n_samples(self) -> int:
        return self.n_traj * self.n_initial_states


def _worker_count(cfg: TrajectoryConfig) -> int:
    if cfg.workers is not None:
        return max(1, int(cfg.workers))
    env = os.environ.get("EXQSIM_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1


def trajectory_samples(
    initials: np.ndarray,
    schedule,
    noise: NoiseModel,
    cfg: TrajectoryConfig,
    trace: list | None = None,
    observable=None,
) -> np.ndarray:
    """Per-trajectory fidelities, shape ``(n_states, n_traj)``.

    Trajectory ``j`` of initial state ``s`` uses stream ``s * n_traj + j``.
    ``observable(final_states, state_index)`` may replace the overlap
    fidelity with any per-row scalar.
    """
    initials = np.atleast_2d(np.asarray(initials, dtype=complex))
    initials = initials / np.linalg.norm(initials, axis=1, keepdims=True)
    S, dim = initials.shape
    n = n_sites(initials)
    program = program_from_schedule(schedule)
    plan = _plan(program, noise, cfg, n)
    refs = reference_state(initials, program)
    T = plan.total_steps
    rows = S * cfg.n_traj
    batch = cfg.batch_size or int(np.clip((1 << 19) // dim, 64, 8192))
    out = np.empty(rows)
    chunks = [(a, min(a + batch, rows)) for a in range(0, rows, batch)]

    def run(chunk):
        a, b = chunk
        ids = np.arange(a, b)
        s_idx = ids // cfg.n_traj
        draws = np.empty((b - a, T, 2))
        for r, k in enumerate(ids):
            draws[r] = RngStream(cfg.seed, int(k)).generator().random((T, 2))
        local_trace = [] if trace is not None else None
        psi = _propagate(initials[s_idx].copy(), plan, draws, local_trace, ids)
        if observable is None:
            vals = np.abs(np.einsum("ij,ij->i", refs[s_idx].conj(), psi)) ** 2
        else:
            vals = observable(psi, s_idx)
        return a, b, vals, local_trace

    workers = _worker_count(cfg)
    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, chunks))
    else:
        results = [run(c) for c in chunks]
    for a, b, vals, local_trace in results:
        out[a:b] = vals
        if trace is not None:
            trace.extend(local_trace)
    return out.reshape(S, cfg.n_traj)


def summarize(samples: np.ndarray, metadata: dict | None = None) -> FidelityEstimate:
    samples = np.atleast_2d(samples)
    S, n_traj = samples.shape
    flat = samples.ravel()
    mean = float(flat.mean())
    stderr = float(flat.std(ddof=1) / np.sqrt(flat.size)) if flat.size > 1 else 0.0
    half = samples[:, : max(1, n_traj // 2)].mean()
    converged = bool(abs(half - mean) < 2 * stderr) if stderr > 0 else True
    return FidelityEstimate(
        mean=min(max(mean, 0.0), 1.0),
        stderr=stderr,
        n_traj=n_traj,
        n_initial_states=S,
        converged=converged,
        metadata=dict(metadata or {}),
    )


def ensemble_fidelity(
    initials,
    schedule,
    noise: NoiseModel,
    cfg: TrajectoryConfig,
    trace: list | None = None,
    label: str | None = None,
) -> FidelityEstimate:
    """Mean overlap between noisy trajectories and the noise-free evolution."""
    samples = trajectory_samples(initials, schedule, noise, cfg, trace)
    if label is None:
        label = getattr(schedule, "label", "") or "program"
    meta = {
        "schedule": label,
        "gamma_dep": noise.gamma_dep,
        "gamma_emi": noise.gamma_emi,
        "backend": cfg.backend,
        "steps_per_gate": cfg.steps_per_gate,
        "seed": cfg.seed,
    }
    return summarize(samples, meta)


def ensemble_density_matrix(
    initial, schedule, noise: NoiseModel, cfg: TrajectoryConfig
) -> tuple[np.ndarray, np.ndarray]:
    """Trajectory average of ``|psi><psi|`` and its element-wise standard error."""
    initial = np.asarray(initial, dtype=complex)
    n = n_sites(initial)
    program = program_from_schedule(schedule)
    plan = _plan(program, noise, cfg, n)
    T = plan.total_steps
    draws = np.stack(
        [RngStream(cfg.seed, k).generator().random((T, 2)) for k in range(cfg.n_traj)]
    )
    psi0 = np.repeat((initial / np.linalg.norm(initial))[None], cfg.n_traj, axis=0)
    psi = _propagate(psi0, plan, draws)
    outer = psi[:, :, None] * psi[:, None, :].conj()
    rho = outer.mean(axis=0)
    se = (outer.real.std(axis=0, ddof=1) + 1j * outer.imag.std(axis=0, ddof=1)) / np.sqrt(cfg.n_traj)
    return rho, se


def sample_initial_states(codec, n_states: int, seed: int, method: str = "angles") -> np.ndarray:
    """Encoded random logical states (rows), reproducible from ``seed``."""
    from .hilbert import encode_logical, sample_logical_bloch_state

    gen = RngStream(seed, 0, purpose=1).generator()
    logical = sample_logical_bloch_state(codec.n_logical, gen, method, size=n_states)
    return encode_logical(logical, codec)

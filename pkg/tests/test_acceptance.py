"""Acceptance criteria 1-11.

Each check appends one ``criterion N: PASS|FAIL ...`` line to ``LINES``; the
lines are printed in the terminal summary (see ``conftest.py``).  Run alone
with ``pytest tests/test_acceptance.py`` or ``python3 tests/test_acceptance.py``.
"""

import time

import numpy as np
import pytest
from scipy.stats import unitary_group

from exqsim.algorithms import compile_logical_circuit, dj_algorithmic_fidelity, build_dj_circuit, ALL_ORACLES
from exqsim.algorithms import dj_initial_state, query_zero_probability, sandwiched_cnot_comparison
from exqsim.exchange import (
    ExchangePulse,
    apply_pulse,
    apply_schedule,
    exchange_operator,
    schedule_total_time,
    schedule_unitary,
)
from exqsim.gates import CNOT, HADAMARD, NOT, S_LOGICAL, T_GATE, max_deviation
from exqsim.hilbert import (
    LogicalCodec,
    apply_single_spin_op,
    embed_operator,
    encode_logical,
    sample_logical_bloch_state,
    single_site_matrix,
    subspace_weights,
)
from exqsim.library import (
    H_MIDDLE,
    H_OUTER,
    NOT_MIDDLE,
    NOT_OUTER,
    S_T1,
    S_T2,
    S_T3,
    canonical_library,
)
from exqsim.mcwf import (
    NoiseModel,
    Segment,
    TrajectoryConfig,
    analytic_dephasing_fidelity,
    dense_step,
    ensemble_fidelity,
    idle_program,
    sample_initial_states,
    split_step,
)
from exqsim.quaternion import analytic_cnot_pieces, pattern_to_four, solve_three_exchange, verify_four_exchange
from exqsim.synth import cnot_cost, makhlin_class, table_local_times

LINES = []


def report(label, ok, detail):
    LINES.append(f"criterion {label}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def test_criterion_1a_compiled_cnot30():
    start = time.perf_counter()
    circ = compile_logical_circuit([("CNOT", 0, 1)], 2)
    dev = circ.max_error()
    wall = time.perf_counter() - start
    ok = len(circ.schedule) == 30 and dev <= 5.5e-6 and wall < 1.0
    report("1a", ok, f"compiled CNOT30 max deviation {dev:.3e} (<= 5.5e-6), {wall:.2f} s")


def test_criterion_1b_tabulated_cnot30():
    start = time.perf_counter()
    table = canonical_library()["CNOT30"]
    dev = max_deviation(LogicalCodec(2).logical_block(schedule_unitary(table)), CNOT)
    wall = time.perf_counter() - start
    report("1b", dev <= 5.5e-6 and wall < 1.0, f"tabulated CNOT30 max deviation {dev:.3e} (<= 5.5e-6), {wall:.2f} s")


def test_criterion_2_cnot35_cost():
    start = time.perf_counter()
    ev = cnot_cost(table_local_times())
    wall = time.perf_counter() - start
    ok = (
        ev.total <= 1e-4
        and 1e-6 <= ev.distance <= 1e-4
        and 5e-10 <= ev.leakage <= 5e-8
        and wall < 1.0
    )
    report("2", ok, f"C={ev.total:.3e} distance={ev.distance:.3e} leakage={ev.leakage:.3e}, {wall:.2f} s")


def test_criterion_3_totals():
    lib = canonical_library()
    t30 = schedule_total_time(lib["CNOT30"])
    t35 = schedule_total_time(lib["CNOT35"])
    ok = abs(t30 - 43.373) <= 1e-3 and abs(t35 - 54.326) <= 1e-3
    report("3", ok, f"CNOT30 total {t30:.4f}, CNOT35 total {t35:.4f}")


def test_criterion_4_analytic_synthesis():
    errs = []
    s = solve_three_exchange(S_LOGICAL, "E12-E23-E12")
    errs.append(np.max(np.abs(np.array(s) - [S_T1, S_T2, S_T3 % np.pi])))
    errs.append(abs(S_T1 - (np.arcsin(1 / 3) / 2 + np.pi / 4)))
    errs.append(abs(S_T3 - (np.arcsin(1 / 3) / 2 - np.pi / 4)))
    h = solve_three_exchange(HADAMARD, "E12-E23-E12")
    errs.append(np.max(np.abs(np.array(h) - [H_OUTER, H_MIDDLE, H_OUTER])))
    errs.append(abs(H_OUTER - (-np.arctan(np.sqrt(2)) / 2) % np.pi))
    errs.append(abs(H_MIDDLE - np.arcsin(np.sqrt(2 / 3))))
    x = solve_three_exchange(NOT, "E23-E12-E23")
    errs.append(np.max(np.abs(np.array(x) - [NOT_OUTER, NOT_MIDDLE, NOT_OUTER])))
    errs.append(abs(NOT_OUTER - np.arctan(np.sqrt(2))))
    errs.append(abs(NOT_MIDDLE - np.arcsin(1 / np.sqrt(3))))
    times_err = max(errs)
    oracle = max(
        verify_four_exchange(S_LOGICAL, pattern_to_four("E12-E23-E12", s)),
        verify_four_exchange(HADAMARD, pattern_to_four("E12-E23-E12", h)),
        verify_four_exchange(NOT, pattern_to_four("E23-E12-E23", x)),
        verify_four_exchange(T_GATE, (0.0, 0.0, 0.0, np.pi / 8)),
    )
    ph = analytic_cnot_pieces().phases
    phase_err = max(abs(ph.phi - 0.612497), abs(ph.theta + 0.547580))
    ok = times_err <= 1e-10 and oracle <= 1e-10 and phase_err <= 1e-5
    report("4", ok, f"closed-form time error {times_err:.1e}, oracle error {oracle:.1e}, "
                    f"phi={ph.phi:.6f} theta={ph.theta:.6f}")


TIMES_5 = (0.25, 0.5, 1.0, 2.0, 4.0)
GAMMA_5 = 1.0


def _idle(t):
    return [Segment(t, None, n_steps=int(np.ceil(t / 0.01)))]


def test_criterion_5a_physical_qubit_dephasing():
    start = time.perf_counter()
    states = sample_logical_bloch_state(1, np.random.default_rng(5), method="haar", size=10_000)
    zs = []
    for t in TIMES_5:
        est = ensemble_fidelity(states, _idle(t), NoiseModel(GAMMA_5), TrajectoryConfig(n_traj=1, seed=5))
        zs.append((est.mean - analytic_dephasing_fidelity(GAMMA_5, t)) / est.stderr)
    wall = time.perf_counter() - start
    ok = max(abs(z) for z in zs) <= 3 and wall < 30
    report("5a", ok, "one dephasing spin vs (2+exp(-gt))/3, z=" + " ".join(f"{z:+.2f}" for z in zs)
           + f", {wall:.1f} s")


def _encoded_exact(p, gamma, t):
    bits = np.array([[(k >> (2 - j)) & 1 for j in range(3)] for k in range(8)])
    hamming = (bits[:, None, :] != bits[None, :, :]).sum(-1)
    return np.einsum("si,ij,sj->s", p, np.exp(-gamma * t * hamming), p)


def _encoded_run(t):
    logical = sample_logical_bloch_state(1, np.random.default_rng(6), method="haar", size=2000)
    enc = encode_logical(logical, LogicalCodec(1))
    est = ensemble_fidelity(enc, _idle(t), NoiseModel(GAMMA_5), TrajectoryConfig(n_traj=5, seed=6))
    exact = _encoded_exact(np.abs(enc) ** 2, GAMMA_5, t).mean()
    return est, exact


@pytest.fixture(scope="module")
def encoded_idle():
    return [_encoded_run(t) for t in TIMES_5]


def test_criterion_5b_encoded_qubit_vs_lindblad(encoded_idle):
    zs = [(est.mean - exact) / est.stderr for est, exact in encoded_idle]
    report("5b", max(abs(z) for z in zs) <= 3,
           "encoded qubit vs exact dephasing solution, z=" + " ".join(f"{z:+.2f}" for z in zs))


def test_criterion_5c_encoded_qubit_vs_single_qubit_formula(encoded_idle):
    zs = [(est.mean - analytic_dephasing_fidelity(GAMMA_5, t)) / est.stderr
          for (est, _), t in zip(encoded_idle, TIMES_5)]
    report("5c", max(abs(z) for z in zs) <= 3,
           "encoded qubit vs (2+exp(-gt))/3, z=" + " ".join(f"{z:+.1f}" for z in zs))


def test_criterion_6a_split_local_error_order():
    rng = np.random.default_rng(7)
    v = rng.standard_normal(64) + 1j * rng.standard_normal(64)
    psi = v / np.linalg.norm(v)
    noise = NoiseModel(1e-3, 1e-5)
    pulse = ExchangePulse((2, 3), 1.0)
    dts = np.logspace(-3, -2, 6)
    errs = np.array([np.max(np.abs(split_step(psi, pulse, noise, dt) - dense_step(psi, pulse, noise, dt)))
                     for dt in dts])
    slope = np.polyfit(np.log10(dts), np.log10(np.maximum(errs, 1e-300)), 1)[0]
    report("6a", abs(slope - 3) <= 0.2,
           f"split vs dense local error slope {slope:.2f} (max error {errs.max():.1e})")


def test_criterion_6b_backend_agreement():
    start = time.perf_counter()
    sched = canonical_library()["CNOT30"]
    initials = sample_initial_states(LogicalCodec(2), 4, 0)
    noise = NoiseModel(1e-3)
    ests = {b: ensemble_fidelity(initials, sched, noise, TrajectoryConfig(n_traj=128, seed=1, backend=b))
            for b in ("split", "dense")}
    gap = abs(ests["split"].mean - ests["dense"].mean)
    err = np.hypot(ests["split"].stderr, ests["dense"].stderr)
    wall = time.perf_counter() - start
    report("6b", gap <= err and wall < 120,
           f"split F={ests['split'].mean:.4f} dense F={ests['dense'].mean:.4f}, gap {gap:.1e} <= {err:.1e}, "
           f"{wall:.0f} s")


def test_criterion_7a_cnot_fidelity():
    sched = canonical_library()["CNOT30"]
    initials = sample_initial_states(LogicalCodec(2), 16, 0)
    est = ensemble_fidelity(initials, sched, NoiseModel(1e-3), TrajectoryConfig(n_traj=6400, seed=0))
    report("7a", abs(est.mean - 0.98) <= 0.01,
           f"CNOT30 at gamma_dep=1e-3: F={est.mean:.4f} +- {est.stderr:.4f} (target 0.98 +- 0.01)")


def test_criterion_7b_gate_vs_free_evolution():
    sched = canonical_library()["CNOT30"]
    initials = sample_initial_states(LogicalCodec(2), 16, 0)
    cfg = TrajectoryConfig(n_traj=400, seed=0)
    gaps, errs = [], []
    for g in (1e-4, 1e-3, 1e-2):
        gate = ensemble_fidelity(initials, sched, NoiseModel(g), cfg)
        free = ensemble_fidelity(initials, idle_program(sched), NoiseModel(g), cfg)
        gaps.append(free.mean - gate.mean)
        errs.append(np.hypot(gate.stderr, free.stderr))
    ok = abs(gaps[0]) <= 3 * errs[0] and gaps[2] > 3 * errs[2] and gaps[2] == max(gaps)
    report("7b", ok, "free minus gate F at 1e-4,1e-3,1e-2: "
           + " ".join(f"{d:+.4f}({e:.4f})" for d, e in zip(gaps, errs)))


def test_criterion_8_emission():
    sched = canonical_library()["CNOT30"]
    initials = sample_initial_states(LogicalCodec(2), 16, 0)
    cfg = TrajectoryConfig(n_traj=512, seed=0)
    fs = [ensemble_fidelity(initials, sched, NoiseModel(0, g), cfg).mean for g in (1e-6, 1e-5)]
    report("8", min(fs) >= 0.95 - 0.02, f"CNOT30 F at gamma_emi 1e-6, 1e-5: {fs[0]:.4f} {fs[1]:.4f}")


@pytest.mark.parametrize("gamma,target", [(1e-3, 0.70), (1e-5, 0.98)])
def test_criterion_9_dj(gamma, target):
    res = dj_algorithmic_fidelity(NoiseModel(gamma), TrajectoryConfig(n_traj=2560, seed=0))
    w = res.worst
    ok = w.mean >= target - 0.03 - 2 * w.stderr
    report(f"9 (gamma_dep={gamma:g})", ok,
           f"worst-case DJ F={w.mean:.4f} +- {w.stderr:.4f} (oracle {w.metadata['oracle']}), target >= {target}")


def test_criterion_10_sandwich():
    p = sandwiched_cnot_comparison([NoiseModel(1e-3)], TrajectoryConfig(n_traj=200, seed=0), n_states=64)[0]
    ok = 0.05 - 0.03 <= p.gain <= 0.10 + 0.03
    report("10", ok, f"merged31 F={p.merged.mean:.4f} serial42 F={p.serial.mean:.4f}, "
                     f"gain {p.gain:.4f} +- {p.gain_stderr:.4f}")


def test_criterion_11_properties():
    rng = np.random.default_rng(11)
    checks = {}
    psi = rng.standard_normal(16) + 1j * rng.standard_normal(16)
    psi /= np.linalg.norm(psi)
    out = psi
    for k, t in zip(rng.integers(0, 3, 2000), rng.uniform(0, np.pi, 2000)):
        out = apply_pulse(out, ExchangePulse((int(k), int(k) + 1), t))
    checks["norm"] = abs(np.linalg.norm(out) - 1) < 1e-10

    codec = LogicalCodec(1)
    enc = encode_logical(sample_logical_bloch_state(1, rng, method="haar"), codec)
    for k, t in zip(rng.integers(0, 2, 200), rng.uniform(0, np.pi, 200)):
        enc = apply_pulse(enc, ExchangePulse((int(k), int(k) + 1), t))
    checks["sector"] = subspace_weights(enc, codec)[1] < 1e-12

    U = unitary_group.rvs(4, random_state=rng)
    A, B, C, D = (unitary_group.rvs(2, random_state=rng) for _ in range(4))
    checks["makhlin"] = makhlin_class(U).matches(makhlin_class(np.kron(A, B) @ U @ np.kron(C, D)), 1e-8)

    ok = True
    for n in range(1, 5):
        v = rng.standard_normal(2**n) + 1j * rng.standard_normal(2**n)
        for site in range(n):
            for op in ("Sz", "Splus", "Sminus"):
                ok &= np.allclose(apply_single_spin_op(v, site, op), embed_operator(single_site_matrix(op), site, n) @ v)
        if n > 1:
            E = exchange_operator((0, n - 1), n)
            ok &= np.allclose(E @ E, np.eye(2**n))
    checks["bit-op"] = bool(ok)

    a = apply_pulse(psi, ExchangePulse((1, 2), 0.4))
    b = apply_pulse(psi, ExchangePulse((1, 2), 0.4 + 3 * np.pi))
    checks["mod-pi"] = abs(abs(np.vdot(a, b)) - 1) < 1e-10

    psi0 = dj_initial_state()
    probs = [query_zero_probability(apply_schedule(psi0, build_dj_circuit(o).schedule)) for o in ALL_ORACLES]
    twice = [query_zero_probability(apply_schedule(psi0, build_dj_circuit(o).schedule)) for o in ALL_ORACLES]
    checks["dj"] = probs == twice and all(
        (p > 1 - 1e-6) if o.constant else (p < 1e-6) for p, o in zip(probs, ALL_ORACLES))

    initials = sample_initial_states(LogicalCodec(2), 2, 3)
    cfg = TrajectoryConfig(n_traj=8, seed=3)
    sched = canonical_library()["CORE19"]
    e1 = ensemble_fidelity(initials, sched, NoiseModel(1e-2, 1e-4), cfg)
    e2 = ensemble_fidelity(sample_initial_states(LogicalCodec(2), 2, 3), sched, NoiseModel(1e-2, 1e-4), cfg)
    checks["seed"] = e1.mean == e2.mean and e1.stderr == e2.stderr

    failed = [k for k, v in checks.items() if not v]
    report("11", not failed, "properties " + ", ".join(checks) + (f"; failed: {failed}" if failed else ""))


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))

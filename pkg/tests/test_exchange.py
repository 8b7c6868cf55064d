import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from exqsim.exchange import (
    EXCHANGE_SIGN,
    SWAP_TIME,
    ExchangePulse,
    ExchangeSchedule,
    apply_pulse,
    apply_schedule,
    block_swap_pulses,
    commutation_equivalent,
    exchange_operator,
    exchange_unitary,
    lift_nonadjacent,
    merge_pulses,
    reduce_time,
    schedule_total_time,
    schedule_unitary,
)
from exqsim.gates import CNOT, SWAP, cnot_matrix, equal_up_to_phase, max_deviation
from exqsim.hilbert import LogicalCodec, basis_state, encode_logical, subspace_weights
from exqsim.library import (
    H_MIDDLE,
    H_OUTER,
    build_cnot13,
    canonical_library,
    single_qubit_gate,
)


def random_state(rng, n):
    v = rng.standard_normal(2**n) + 1j * rng.standard_normal(2**n)
    return v / np.linalg.norm(v)


def dense_pulse(pair, t, n):
    return expm(EXCHANGE_SIGN * 1j * t * exchange_operator(pair, n))


def test_pulse_validation():
    with pytest.raises(ValueError):
        ExchangePulse((1, 1), 0.3)
    with pytest.raises(ValueError):
        ExchangePulse((0, 1), np.inf)
    p = ExchangePulse((2, 1), -0.5)
    assert p.pair == (1, 2)
    assert p.t == pytest.approx(np.pi - 0.5)
    assert p.adjacent


def test_reduce_time():
    assert reduce_time(np.pi) == 0.0
    assert reduce_time(3 * np.pi + 0.25) == pytest.approx(0.25)
    assert 0 <= reduce_time(-1e-3) < np.pi


def test_exchange_operator_squares_to_identity():
    E = exchange_operator((0, 2), 3)
    assert np.allclose(E @ E, np.eye(8))
    assert np.allclose(exchange_operator((0, 1), 2), SWAP)


def test_pulse_zero_time_is_identity():
    psi = random_state(np.random.default_rng(0), 3)
    assert np.allclose(exchange_unitary(ExchangePulse((0, 1), 0.0), 3)(psi), psi)


def test_swap_time_gives_swap_up_to_phase():
    U = schedule_unitary(ExchangeSchedule((ExchangePulse((0, 1), SWAP_TIME),), 2))
    assert np.allclose(np.abs(np.sum(SWAP.conj() * U, axis=0)), 1)
    assert np.allclose(U, EXCHANGE_SIGN * 1j * SWAP)
    out = apply_pulse(basis_state("0100"), ExchangePulse((1, 2), SWAP_TIME))
    assert abs(np.vdot(basis_state("0010"), out)) == pytest.approx(1)


@settings(max_examples=30, deadline=None)
@given(n=st.integers(2, 4), t=st.floats(-10, 10), seed=st.integers(0, 2**31 - 1), data=st.data())
def test_pulse_matches_dense_exponential(n, t, seed, data):
    i = data.draw(st.integers(0, n - 2))
    j = data.draw(st.integers(i + 1, n - 1))
    psi = random_state(np.random.default_rng(seed), n)
    pulse = ExchangePulse((i, j), t)
    out = apply_pulse(psi, pulse)
    # pulses store negative times modulo pi, so compare up to the sign
    ref = dense_pulse((i, j), t, n) @ psi
    assert abs(abs(np.vdot(ref, out)) - 1) < 1e-10


@settings(max_examples=30, deadline=None)
@given(t=st.floats(0, 3), k=st.integers(-3, 3), seed=st.integers(0, 2**31 - 1))
def test_mod_pi_periodicity(t, k, seed):
    psi = random_state(np.random.default_rng(seed), 3)
    a = apply_pulse(psi, ExchangePulse((1, 2), t))
    b = apply_pulse(psi, ExchangePulse((1, 2), t + k * np.pi))
    assert np.allclose(b, (-1) ** (k % 2) * a, atol=1e-10) or np.allclose(b, a, atol=1e-10)
    assert abs(abs(np.vdot(a, b)) - 1) < 1e-10


def test_t_and_pi_minus_t_compose_to_phase():
    psi = random_state(np.random.default_rng(4), 3)
    out = apply_pulse(apply_pulse(psi, ExchangePulse((0, 1), 0.7)), ExchangePulse((0, 1), np.pi - 0.7))
    assert abs(abs(np.vdot(psi, out)) - 1) < 1e-10


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), n_log=st.integers(1, 2))
def test_norm_and_sector_preserved(seed, n_log):
    rng = np.random.default_rng(seed)
    codec = LogicalCodec(n_log)
    n = codec.n_physical
    logical = rng.standard_normal(2**n_log) + 1j * rng.standard_normal(2**n_log)
    psi = encode_logical(logical / np.linalg.norm(logical), codec)
    pulses = tuple(
        ExchangePulse((k, k + 1), t) for k, t in zip(rng.integers(0, n - 1, 25), rng.uniform(0, np.pi, 25))
    )
    out = psi
    for p in pulses:
        out = apply_pulse(out, p)
        if n_log == 1:
            assert subspace_weights(out, codec)[1] < 1e-12
    assert abs(np.linalg.norm(out) - 1) < 1e-10


def test_norm_after_many_pulses():
    rng = np.random.default_rng(5)
    psi = random_state(rng, 4)
    for k, t in zip(rng.integers(0, 3, 10_000), rng.uniform(0, np.pi, 10_000)):
        psi = apply_pulse(psi, ExchangePulse((int(k), int(k) + 1), t))
    assert abs(np.linalg.norm(psi) - 1) < 1e-10


def test_apply_schedule_empty_and_errors():
    psi = random_state(np.random.default_rng(6), 3)
    assert np.allclose(apply_schedule(psi, ExchangeSchedule((), 3)), psi)
    far = ExchangeSchedule((ExchangePulse((0, 2), 0.3),), 3)
    assert not far.executable
    with pytest.raises(ValueError):
        apply_schedule(psi, far)
    with pytest.raises(ValueError):
        apply_schedule(random_state(np.random.default_rng(6), 2), far)


def test_lift_examples():
    lifted = lift_nonadjacent(ExchangePulse((0, 2), 0.4), 3)
    assert [(p.pair, p.t) for p in lifted] == [((1, 2), SWAP_TIME), ((0, 1), 0.4), ((1, 2), SWAP_TIME)]
    adj = lift_nonadjacent(ExchangePulse((1, 2), 0.4), 3)
    assert len(adj) == 1 and adj[0] == ExchangePulse((1, 2), 0.4)


@pytest.mark.parametrize("n", [3, 4, 5])
def test_lift_matches_dense_for_all_pairs(n):
    for i in range(n):
        for j in range(i + 2, n):
            sched = lift_nonadjacent(ExchangePulse((i, j), 0.83), n)
            assert sched.executable
            assert equal_up_to_phase(schedule_unitary(sched), dense_pulse((i, j), 0.83, n), atol=1e-10)


def test_merge_rules():
    a = ExchangePulse((0, 1), 1.0)
    b = ExchangePulse((2, 3), 0.5)
    c = ExchangePulse((0, 1), 2.5)
    merged = merge_pulses((a, b, c))
    assert len(merged) == 2
    assert merged[1].pair == (0, 1) and merged[1].t == pytest.approx(3.5 - np.pi)
    # an overlapping pulse in between blocks the merge
    assert len(merge_pulses((a, ExchangePulse((1, 2), 0.5), c))) == 3
    # pulses adding to pi disappear
    assert merge_pulses((a, ExchangePulse((0, 1), np.pi - 1.0))) == ()
    U1 = schedule_unitary(ExchangeSchedule((a, b, c), 4))
    U2 = schedule_unitary(ExchangeSchedule(merged, 4))
    assert equal_up_to_phase(U1, U2, atol=1e-12)


def test_schedule_algebra_and_roundtrip(tmp_path):
    s = canonical_library()["CNOT30"]
    assert len(s) == 30
    assert schedule_total_time(s) == pytest.approx(float(np.sum(s.times)), abs=1e-12)
    assert schedule_total_time(ExchangeSchedule((), 2)) == 0
    path = tmp_path / "s.json"
    s.save(path)
    back = ExchangeSchedule.load(path)
    assert back.pulses == s.pulses and back.n_physical == s.n_physical
    inv = s.inverse()
    U = schedule_unitary(s)
    assert equal_up_to_phase(schedule_unitary(inv) @ U, np.eye(64), atol=1e-10)
    assert len(s + inv) == 60


def test_library_totals():
    lib = canonical_library()
    assert lib["CNOT30"].total_time == pytest.approx(43.373, abs=1e-3)
    assert lib["CNOT35"].total_time == pytest.approx(54.326, abs=1e-3)
    assert len(lib["CORE19"]) == 19 and len(lib["CNOT35"]) == 35 and len(lib["SANDWICH31"]) == 31
    assert lib["CNOT35"].pulses[8:27] == lib["CORE19"].pulses
    assert lib["CNOT30"].pulses[6:25] == lib["CORE19"].pulses
    assert all(s.executable for s in (lib[k] for k in ("CORE19", "CNOT35", "CNOT30", "SANDWICH31")))


def test_library_single_qubit_entries():
    lib = canonical_library()
    assert len(lib["H"]) == 3 and len(lib["NOT"]) == 3 and len(lib["T"]) == 1
    assert lib["T"][0].t == pytest.approx(np.pi / 8)
    assert [p.t for p in lib["H"]] == [H_OUTER, H_MIDDLE, H_OUTER]
    with pytest.raises(KeyError):
        lib["CZ"]
    with pytest.raises(KeyError):
        single_qubit_gate("Y")


def test_cnot30_on_encoded_10_gives_11():
    codec = LogicalCodec(2)
    psi = encode_logical(np.array([0, 0, 1, 0]), codec)
    out = apply_schedule(psi, canonical_library()["CNOT30"])
    amp = codec.decode(out)
    assert abs(amp[3]) == pytest.approx(1, abs=1e-5)
    block = codec.logical_block(schedule_unitary(canonical_library()["CNOT30"]))
    assert max_deviation(block, CNOT) < 6e-6


def test_block_swap_pulses():
    pulses = block_swap_pulses(0, 6)
    assert len(pulses) == 9
    U = schedule_unitary(ExchangeSchedule(pulses, 6))
    perm = np.zeros((64, 64))
    for k in range(64):
        perm[((k & 7) << 3) | (k >> 3), k] = 1
    assert equal_up_to_phase(U, perm, atol=1e-12)
    with pytest.raises(ValueError):
        block_swap_pulses(1, 6)


def test_cnot13_truth_table_and_count():
    codec = LogicalCodec(3)
    sched = build_cnot13(codec)
    assert sched.executable and len(sched) < 76
    block = codec.logical_block(schedule_unitary(sched))
    assert max_deviation(block, cnot_matrix(0, 2, 3)) < 1e-5
    # same as the four adjacent CNOTs CNOT12 CNOT23 CNOT12 CNOT23
    four = cnot_matrix(1, 2, 3) @ cnot_matrix(0, 1, 3) @ cnot_matrix(1, 2, 3) @ cnot_matrix(0, 1, 3)
    assert np.allclose(four, cnot_matrix(0, 2, 3))
    with pytest.raises(ValueError):
        build_cnot13(LogicalCodec(2))


def test_commutation_equivalence():
    a = ExchangePulse((0, 1), 0.3)
    b = ExchangePulse((3, 4), 0.7)
    c = ExchangePulse((1, 2), 0.2)
    assert commutation_equivalent((a, b, c), (b, a, c))
    assert not commutation_equivalent((a, c), (c, a))
    assert not commutation_equivalent((a,), (a, b))

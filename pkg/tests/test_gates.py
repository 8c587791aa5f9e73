import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lopsim.fock import FockError, FockSpace, PureState, fidelity, make_basis_state, superpose
from lopsim.gates import (
    CNOT_FEED_FORWARD,
    CNOT_MATRIX,
    NS_PARAMETERS,
    DualRailQubit,
    PolarizationQubit,
    apply_pauli,
    bell_pair,
    cnot_polarization,
    cnot_polarization_branches,
    cnot_via_csign_branch,
    csign,
    csign_branch,
    derive_cnot_feed_forward,
    logical_matrix,
    logical_readout,
    logical_state,
    logical_vector,
    ns_gate,
    ns_herald_amplitudes,
    ns_residuals,
    phase_aligned_error,
    single_qubit_gate,
    solve_ns_parameters,
)
from lopsim.measurement import sample_outcome

QA, QB = DualRailQubit(0, 1), DualRailQubit(2, 3)
PC, PT = PolarizationQubit(0, 1), PolarizationQubit(2, 3)
CZ = np.diag([1, 1, 1, -1]).astype(complex)


def ns_input(a):
    return PureState(FockSpace(1, 2), {(k,): a[k] for k in range(3)})


def test_ns_herald_amplitudes():
    a0, a1, a2 = ns_herald_amplitudes(NS_PARAMETERS)
    assert abs(a0) == pytest.approx(0.5, abs=1e-9)
    assert a1 == pytest.approx(a0, abs=1e-9)
    assert a2 == pytest.approx(-a0, abs=1e-9)


def test_frozen_ns_parameters_resolve():
    solved = solve_ns_parameters()
    assert np.max(np.abs(ns_residuals(solved))) < 1e-9
    assert np.max(np.abs(ns_residuals(NS_PARAMETERS))) < 1e-9
    assert solved.theta_1 == pytest.approx(NS_PARAMETERS.theta_1, abs=1e-7)


def test_ns_equal_superposition():
    a = np.ones(3) / math.sqrt(3)
    r = ns_gate(ns_input(a), 0)
    assert r.success
    assert r.success_probability == pytest.approx(0.25, abs=1e-9)
    want = ns_input(a * np.array([1, 1, -1]))
    assert fidelity(r.output_state, want) == pytest.approx(1, abs=1e-9)
    # no spurious global phase either: the overlap itself is real positive up to a common phase
    ratio = r.output_state.amplitude((2,)) / r.output_state.amplitude((0,))
    assert ratio == pytest.approx(-1, abs=1e-9)


def test_ns_vacuum():
    r = ns_gate(make_basis_state(FockSpace(1, 2), (0,)), 0)
    assert r.success_probability == pytest.approx(0.25, abs=1e-9)
    assert abs(r.output_state.amplitude((0,))) == pytest.approx(1)


def test_ns_rejects_three_photons():
    with pytest.raises(FockError):
        ns_gate(make_basis_state(FockSpace(1, 3), (3,)), 0)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_ns_probability_input_independent(seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=3) + 1j * rng.normal(size=3)
    a /= np.linalg.norm(a)
    r = ns_gate(ns_input(a), 0)
    assert r.success_probability == pytest.approx(0.25, abs=1e-9)
    assert fidelity(r.output_state, ns_input(a * np.array([1, 1, -1]))) > 1 - 1e-9


def test_ns_conserves_photons():
    for n in range(3):
        r = ns_gate(make_basis_state(FockSpace(1, 2), (n,)), 0)
        assert r.output_state.photon_numbers() == {n}
        assert r.herald_pattern.total == 1


def test_single_qubit_identity_and_balanced():
    s = logical_state([QA], {"0": 1})
    assert single_qubit_gate(s, QA, 0.0) == s
    probs, leak = logical_readout(single_qubit_gate(s, QA, math.pi / 4), [QA])
    assert probs["0"] == pytest.approx(0.5) and probs["1"] == pytest.approx(0.5) and leak == 0


def test_single_qubit_rotations_compose():
    s = logical_state([QA], {"0": 0.6, "1": 0.8j})
    a = single_qubit_gate(single_qubit_gate(s, QA, 0.3), QA, 0.5)
    b = single_qubit_gate(s, QA, 0.8)
    assert np.abs(logical_vector(a, [QA]) - logical_vector(b, [QA])).max() < 1e-12


@pytest.mark.parametrize("label,matrix", [
    ("X", [[0, 1], [1, 0]]), ("Z", [[1, 0], [0, -1]]), ("XZ", [[0, 1], [-1, 0]])])
def test_pauli_corrections(label, matrix):
    m = logical_matrix(lambda s: apply_pauli(s, QA, label), [QA])
    assert np.abs(m - np.array(matrix)).max() < 1e-12


def test_logical_readout_examples():
    assert logical_readout(logical_state([QA], {"0": 1}), [QA]) == ({"0": 1.0}, 0.0)
    probs, leak = logical_readout(logical_state([QA], {"0": 1, "1": 1}), [QA])
    assert probs == pytest.approx({"0": 0.5, "1": 0.5}) and leak == 0


def test_logical_readout_reports_leakage():
    s = superpose(FockSpace(2, 2), {(1, 0): 0.6, (1, 1): 0.8})
    probs, leak = logical_readout(s, [QA])
    assert probs == pytest.approx({"0": 0.36})
    assert leak == pytest.approx(0.64)


def test_csign_logical_matrix():
    k = logical_matrix(lambda s: csign_branch(s, QA, QB), [QA, QB])
    assert phase_aligned_error(k, CZ) < 1e-9
    assert np.abs(k - 0.25 * CZ).max() < 1e-9


@pytest.mark.parametrize("bits,sign", [("00", 1), ("01", 1), ("10", 1), ("11", -1)])
def test_csign_basis_states(bits, sign):
    s = logical_state([QA, QB], {bits: 1})
    r = csign(s, QA, QB)
    assert logical_readout(r.output_state, [QA, QB])[0] == pytest.approx({bits: 1.0})
    v = logical_vector(r.output_state, [QA, QB])
    assert v[int(bits, 2)] / abs(v[int(bits, 2)]) == pytest.approx(sign * np.sign(0.25))
    # two independent NS heralds at 1/4 each
    assert r.success_probability == pytest.approx(0.0625, abs=1e-9)
    assert r.herald_pattern.counts == (1, 0, 1, 0)


def test_csign_superposition(rng):
    a = rng.normal(size=4) + 1j * rng.normal(size=4)
    s = logical_state([QA, QB], {format(j, "02b"): a[j] for j in range(4)})
    r = csign(s, QA, QB)
    v = logical_vector(r.output_state, [QA, QB])
    want = CZ @ (a / np.linalg.norm(a))
    assert abs(np.vdot(want, v)) ** 2 == pytest.approx(1, abs=1e-9)


def test_csign_symmetric():
    k1 = logical_matrix(lambda s: csign_branch(s, QA, QB), [QA, QB])
    k2 = logical_matrix(lambda s: csign_branch(s, QB, QA), [QA, QB])
    assert np.abs(k1 - k2).max() < 1e-9


def test_csign_rejects_non_logical():
    s = make_basis_state(FockSpace(4, 2), (2, 0, 0, 0))
    with pytest.raises(FockError):
        csign(s, QA, QB)


def test_csign_with_rotations_is_cnot():
    k = logical_matrix(lambda s: cnot_via_csign_branch(s, QA, QB), [QA, QB])
    assert phase_aligned_error(k, CNOT_MATRIX) < 1e-9


def test_bell_pair():
    s = bell_pair(PC, PT)
    assert s.norm2() == pytest.approx(1)
    want = superpose(FockSpace(4, 2), {(1, 0, 1, 0): 1 / math.sqrt(2), (0, 1, 0, 1): 1 / math.sqrt(2)})
    assert fidelity(s, want) == pytest.approx(1)
    for seed in range(10):
        counts = sample_outcome(s, [0, 1, 2, 3], seed).pattern.counts
        assert counts[:2] == counts[2:]


def test_bell_pair_overlap_rejected():
    with pytest.raises(FockError):
        bell_pair(PC, PolarizationQubit(1, 2))


def test_feed_forward_table_rederives():
    assert derive_cnot_feed_forward() == CNOT_FEED_FORWARD


@pytest.mark.parametrize("bits,out", [("00", "00"), ("01", "01"), ("10", "11"), ("11", "10")])
def test_cnot_truth_table(bits, out):
    s = logical_state([PC, PT], {bits: 1})
    branches = cnot_polarization_branches(s, PC, PT)
    assert len(branches) == 4
    for b in branches:
        assert logical_readout(b.output_state, [PC, PT])[0] == pytest.approx({out: 1.0})
        assert b.success_probability == pytest.approx(0.25, abs=1e-9)
    assert sum(b.branch_probability for b in branches) == pytest.approx(0.25, abs=1e-9)


def test_cnot_entangles():
    s = logical_state([PC, PT], {"00": 1, "10": 1})
    want = bell_pair(PC, PT)
    for b in cnot_polarization_branches(s, PC, PT):
        assert fidelity(b.output_state, want) == pytest.approx(1, abs=1e-9)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_cnot_random_inputs(seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=4) + 1j * rng.normal(size=4)
    s = logical_state([PC, PT], {format(j, "02b"): a[j] for j in range(4)})
    want = CNOT_MATRIX @ (a / np.linalg.norm(a))
    branches = cnot_polarization_branches(s, PC, PT)
    assert branches[0].success_probability == pytest.approx(0.25, abs=1e-9)
    for b in branches:
        v = logical_vector(b.output_state, [PC, PT])
        assert abs(np.vdot(want, v)) ** 2 == pytest.approx(1, abs=1e-9)
        assert b.output_state.photon_numbers() == {2}


def test_cnot_sampled_run():
    s = logical_state([PC, PT], {"10": 1})
    seen = set()
    for seed in range(40):
        r = cnot_polarization(s, PC, PT, seed)
        assert r.success_probability == pytest.approx(0.25, abs=1e-9)
        seen.add(r.success)
        if r.success:
            assert logical_readout(r.output_state, [PC, PT])[0] == pytest.approx({"11": 1.0})
    assert seen == {True, False}


def test_cnot_seed_replay():
    s = logical_state([PC, PT], {"00": 1, "11": 1j})
    a = cnot_polarization(s, PC, PT, 17)
    b = cnot_polarization(s, PC, PT, 17)
    assert a.herald_pattern == b.herald_pattern and a.output_state == b.output_state

import cmath
import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lopsim.fock import FockError, FockSpace, make_basis_state, random_state, superpose, vacuum
from lopsim.interferometer import (
    BeamSplitter,
    OpticalCircuit,
    PhaseShift,
    apply_element,
    apply_mode_unitary,
    beamsplitter_unitary,
    circuit_mode_matrix,
    embed,
    permanent,
    permanent_naive,
    random_circuit,
    random_unitary,
    two_mode_fock_matrix,
)

R2 = 1 / math.sqrt(2)


def max_diff(a, b):
    occs = set(a.amplitudes) | set(b.amplitudes)
    return max((abs(a.amplitude(o) - b.amplitude(o)) for o in occs), default=0.0)


@pytest.mark.parametrize("phi", [0.0, 0.7, -2.0])
def test_zero_angle_is_identity(phi):
    assert np.allclose(beamsplitter_unitary(0.0, phi), np.eye(2))


def test_balanced_magnitudes():
    assert np.allclose(np.abs(beamsplitter_unitary(math.pi / 4, 0.0)), R2)


def test_convention_columns():
    th, ph = 0.3, 0.9
    u = beamsplitter_unitary(th, ph)
    # column k is the image of the k-th creation operator
    assert np.allclose(u[:, 0], [math.cos(th), cmath.exp(1j * ph) * math.sin(th)])
    assert np.allclose(u[:, 1], [-cmath.exp(-1j * ph) * math.sin(th), math.cos(th)])


def test_opposite_angles_cancel():
    u = beamsplitter_unitary(-0.4) @ beamsplitter_unitary(0.4)
    assert np.abs(u - np.eye(2)).max() < 1e-12


def test_hom_output_state():
    s = make_basis_state(FockSpace(2, 2), (1, 1))
    out = apply_element(s, BeamSplitter(math.pi / 4, 0.0, 0, 1))
    assert abs(out.amplitude((1, 1))) < 1e-12
    assert abs(out.amplitude((2, 0))) == pytest.approx(R2)
    assert out.amplitude((2, 0)) == pytest.approx(-out.amplitude((0, 2)))


def test_vacuum_is_fixed():
    v = vacuum(FockSpace(3, 2))
    assert apply_element(v, BeamSplitter(0.3, 0.2, 0, 2)) == v


def test_phase_on_number_state():
    for n in range(4):
        s = make_basis_state(FockSpace(1, 3), (n,))
        out = apply_element(s, PhaseShift(0.7, 0))
        assert out.amplitude((n,)) == pytest.approx(cmath.exp(1j * n * 0.7))


def test_mode_out_of_range_rejected():
    s = vacuum(FockSpace(2, 1))
    with pytest.raises(FockError):
        apply_element(s, BeamSplitter(0.1, 0.0, 0, 2))
    with pytest.raises(FockError):
        BeamSplitter(0.1, 0.0, 1, 1)


def test_two_mode_matrix_unitary():
    for n in range(5):
        m = two_mode_fock_matrix(0.37, 1.1, n)
        assert np.allclose(m @ m.conj().T, np.eye(n + 1))


def test_empty_circuit_is_identity():
    assert np.allclose(circuit_mode_matrix(OpticalCircuit(3)), np.eye(3))


def test_single_element_embeds():
    e = BeamSplitter(0.3, 0.1, 0, 2)
    u = circuit_mode_matrix(OpticalCircuit(3, (e,)))
    assert np.allclose(u, embed(e, 3))
    assert np.allclose(u[np.ix_([0, 2], [0, 2])], beamsplitter_unitary(0.3, 0.1))
    assert u[1, 1] == 1


def test_circuit_then_inverse(rng):
    c = random_circuit(4, 12, rng)
    u = circuit_mode_matrix(c.inverse()) @ circuit_mode_matrix(c)
    assert np.abs(u - np.eye(4)).max() < 1e-10


def test_circuit_matrix_is_ordered_product(rng):
    c = random_circuit(3, 5, rng)
    ref = np.eye(3, dtype=complex)
    for e in c.elements:
        ref = embed(e, 3) @ ref
    assert np.abs(circuit_mode_matrix(c) - ref).max() < 1e-12


def test_circuit_json_roundtrip(rng):
    c = random_circuit(4, 6, rng)
    assert OpticalCircuit.from_json(c.to_json()) == c


def test_permanent_small():
    assert permanent(np.eye(5)) == pytest.approx(1)
    a, b, c, d = 2, 3 + 1j, -1, 0.5j
    assert permanent(np.array([[a, b], [c, d]])) == pytest.approx(a * d + b * c)
    assert permanent(np.zeros((0, 0))) == 1


def test_permanent_rejects_non_square():
    with pytest.raises(FockError):
        permanent(np.ones((2, 3)))


def test_permanent_4x4_against_permutation_sum(rng):
    m = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    ref = sum(np.prod([m[i, p[i]] for i in range(4)]) for p in itertools.permutations(range(4)))
    assert abs(permanent(m) - ref) <= 1e-10 * abs(ref)


@pytest.mark.parametrize("n", range(1, 7))
def test_ryser_matches_naive(n, rng):
    m = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    ref = permanent_naive(m)
    assert abs(permanent(m) - ref) <= 1e-10 * abs(ref)


def test_identity_unitary_leaves_state(rng):
    s = random_state(FockSpace(3, 2), rng)
    assert max_diff(apply_mode_unitary(s, np.eye(3)), s) < 1e-12


def test_hom_paths_agree():
    s = make_basis_state(FockSpace(2, 2), (1, 1))
    e = BeamSplitter(math.pi / 4, 0.0, 0, 1)
    assert max_diff(apply_element(s, e), apply_mode_unitary(s, e.matrix())) < 1e-12


def test_random_unitary_three_photons_four_modes(rng):
    c = random_circuit(4, 15, rng)
    s = random_state(FockSpace(4, 3), rng, photons=3)
    assert max_diff(c.apply(s), apply_mode_unitary(s, c.mode_matrix())) < 1e-10


def test_mode_subset_application(rng):
    s = random_state(FockSpace(4, 2), rng, photons=2)
    u = beamsplitter_unitary(0.4, 0.3)
    assert max_diff(apply_mode_unitary(s, u, [3, 1]), apply_element(s, BeamSplitter(0.4, 0.3, 3, 1))) < 1e-12


def test_dimension_mismatch_rejected():
    with pytest.raises(FockError):
        apply_mode_unitary(vacuum(FockSpace(3, 1)), np.eye(2))


def test_non_unitary_rejected():
    with pytest.raises(FockError):
        apply_mode_unitary(vacuum(FockSpace(2, 1)), np.ones((2, 2)))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 5), st.integers(1, 4))
def test_kernel_paths_agree(seed, modes, photons):
    rng = np.random.default_rng(seed)
    c = random_circuit(modes, 8, rng)
    s = random_state(FockSpace(modes, photons), rng, photons=photons)
    assert max_diff(c.apply(s), apply_mode_unitary(s, c.mode_matrix())) < 1e-10


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_norm_and_photon_number_preserved(seed):
    rng = np.random.default_rng(seed)
    s = random_state(FockSpace(3, 3), rng).scaled(0.8)
    c = random_circuit(3, 6, rng)
    out = c.apply(s)
    assert out.norm2() == pytest.approx(s.norm2(), abs=1e-12)
    for n in range(4):
        before = sum(abs(v) ** 2 for o, v in s.amplitudes.items() if sum(o) == n)
        after = sum(abs(v) ** 2 for o, v in out.amplitudes.items() if sum(o) == n)
        assert after == pytest.approx(before, abs=1e-12)


def test_random_unitary_is_unitary(rng):
    u = random_unitary(5, rng)
    assert np.allclose(u @ u.conj().T, np.eye(5))


def test_mixed_sector_superposition():
    s = superpose(FockSpace(2, 2), {(0, 0): R2, (1, 1): R2})
    out = apply_element(s, BeamSplitter(math.pi / 4, 0.0, 0, 1))
    assert out.amplitude((0, 0)) == pytest.approx(R2)
    assert abs(out.amplitude((1, 1))) < 1e-12

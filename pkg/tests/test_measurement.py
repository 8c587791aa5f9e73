import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lopsim.fock import FockError, FockSpace, PureState, make_basis_state, random_state, superpose, vacuum
from lopsim.measurement import (
    QND_EMPTY,
    QND_OCCUPIED,
    DetectionPattern,
    DetectorModel,
    HeraldImpossibleError,
    detect_with_model,
    make_rng,
    outcome_distribution,
    postselect,
    project,
    qnd_photon_presence,
    sample_outcome,
    sample_qnd,
    spawn_rngs,
)

R2 = 1 / math.sqrt(2)


def dist_dict(s, modes):
    return {p.counts: w for p, w in outcome_distribution(s, modes)}


def test_vacuum_distribution():
    assert dist_dict(vacuum(FockSpace(3, 2)), [0, 2]) == {(0, 0): 1.0}


def test_single_photon_distribution():
    assert dist_dict(make_basis_state(FockSpace(2, 1), (1, 0)), [0]) == {(1,): 1.0}


def test_hom_output_distribution():
    s = superpose(FockSpace(2, 2), {(2, 0): R2, (0, 2): -R2})
    d = dist_dict(s, [0])
    assert d[(2,)] == pytest.approx(0.5)
    assert d[(0,)] == pytest.approx(0.5)


def test_distribution_order_is_deterministic():
    s = superpose(FockSpace(2, 2), {(2, 0): 0.5, (0, 2): 0.5, (1, 1): R2})
    assert [p.counts for p, _ in outcome_distribution(s, [0])] == [(0,), (1,), (2,)]


def test_distribution_rejects_zero_state_and_bad_modes():
    with pytest.raises(FockError):
        outcome_distribution(PureState(FockSpace(1, 1), {}), [0])
    with pytest.raises(FockError):
        outcome_distribution(vacuum(FockSpace(2, 1)), [0, 0])
    with pytest.raises(FockError):
        outcome_distribution(vacuum(FockSpace(2, 1)), [2])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 5), st.integers(0, 4))
def test_distribution_complete(seed, modes, photons):
    rng = np.random.default_rng(seed)
    s = random_state(FockSpace(modes, photons), rng).scaled(0.7)
    measured = sorted(rng.choice(modes, size=rng.integers(1, modes + 1), replace=False))
    total = sum(w for _, w in outcome_distribution(s, measured))
    assert total == pytest.approx(s.norm2(), abs=1e-10)


def test_marginals_independent_of_extra_measurement(rng):
    s = random_state(FockSpace(3, 3), rng)
    joint = dist_dict(s, [0, 2])
    marginal = {}
    for (a, _), w in joint.items():
        marginal[(a,)] = marginal.get((a,), 0.0) + w
    direct = dist_dict(s, [0])
    assert set(marginal) == set(direct)
    for k in direct:
        assert marginal[k] == pytest.approx(direct[k], abs=1e-12)


def test_postselect_basis():
    r = postselect(make_basis_state(FockSpace(2, 1), (1, 0)), DetectionPattern((0,), (1,)))
    assert r.probability == pytest.approx(1)
    assert r.post_state.amplitudes == {(0,): 1}


def test_postselect_superposition():
    s = superpose(FockSpace(2, 1), {(0, 1): R2, (1, 0): R2})
    r = postselect(s, DetectionPattern((0,), (0,)))
    assert r.probability == pytest.approx(0.5)
    assert r.post_state.amplitude((1,)) == pytest.approx(1)


def test_postselect_impossible_herald():
    s = make_basis_state(FockSpace(2, 1), (1, 0))
    with pytest.raises(HeraldImpossibleError):
        postselect(s, DetectionPattern((0,), (0,)))


def test_postselect_all_modes():
    s = superpose(FockSpace(2, 1), {(0, 1): R2, (1, 0): R2})
    r = postselect(s, DetectionPattern((0, 1), (1, 0)))
    assert r.post_state is None
    assert r.probability == pytest.approx(0.5)


def test_pattern_validation():
    with pytest.raises(FockError):
        DetectionPattern((0, 1), (1,))
    with pytest.raises(FockError):
        DetectionPattern((0,), (-1,))


def test_project_keeps_remaining_order():
    s = make_basis_state(FockSpace(3, 3), (1, 2, 0))
    b = project(s, DetectionPattern((1,), (2,)))
    assert b.amplitudes == {(1, 0): 1}


def test_deterministic_outcome_any_seed():
    s = make_basis_state(FockSpace(2, 1), (0, 1))
    for seed in range(10):
        assert sample_outcome(s, [1], seed).pattern.counts == (1,)


def test_sampling_frequency():
    s = superpose(FockSpace(2, 1), {(0, 1): R2, (1, 0): R2})
    rng = make_rng(5)
    hits = sum(sample_outcome(s, [0], rng).pattern.counts == (1,) for _ in range(100_000))
    assert abs(hits / 100_000 - 0.5) < 0.01


def test_seed_replay():
    s = random_state(FockSpace(3, 2), np.random.default_rng(0))
    a = [sample_outcome(s, [0, 1], g).pattern for g in spawn_rngs(9, 50)]
    b = [sample_outcome(s, [0, 1], g).pattern for g in spawn_rngs(9, 50)]
    assert a == b


@pytest.mark.parametrize("seed", range(20))
def test_ideal_detector_matches_sampling(seed):
    s = random_state(FockSpace(3, 3), np.random.default_rng(seed))
    a = sample_outcome(s, [0, 2], seed)
    b = detect_with_model(s, [0, 2], DetectorModel(1.0), seed)
    assert a.pattern == b.pattern
    assert a.probability == b.probability
    assert a.post_state == b.post_state


def test_dead_detector_reports_nothing():
    s = make_basis_state(FockSpace(2, 2), (2, 0))
    for seed in range(5):
        assert detect_with_model(s, [0, 1], DetectorModel(0.0), seed).pattern.counts == (0, 0)


def test_saturating_detector():
    s = make_basis_state(FockSpace(1, 3), (3,))
    r = detect_with_model(s, [0], DetectorModel(1.0, max_resolved_count=1), 0)
    assert r.pattern.counts == (1,)


def test_detector_efficiency_statistics():
    s = make_basis_state(FockSpace(1, 1), (1,))
    model = DetectorModel(0.99)
    rng = make_rng(11)
    hits = sum(detect_with_model(s, [0], model, rng).pattern.counts == (1,) for _ in range(100_000))
    assert abs(hits / 100_000 - 0.99) < 0.01


def test_detector_model_validation():
    with pytest.raises(FockError):
        DetectorModel(1.5)
    with pytest.raises(FockError):
        DetectorModel(0.5, -1)


def test_qnd_single_photon():
    s = make_basis_state(FockSpace(2, 1), (1, 0))
    (b,) = qnd_photon_presence(s, (0, 1))
    assert b.label == QND_OCCUPIED and b.probability == pytest.approx(1) and b.post_state == s


def test_qnd_vacuum():
    (b,) = qnd_photon_presence(vacuum(FockSpace(2, 1)), (0, 1))
    assert b.label == QND_EMPTY and b.probability == 1


def test_qnd_split_superposition():
    s = superpose(FockSpace(4, 1), {(0, 0, 1, 0): R2, (1, 0, 0, 0): R2})
    branches = {b.label: b for b in qnd_photon_presence(s, (0, 1))}
    assert branches[QND_EMPTY].probability == pytest.approx(0.5)
    assert branches[QND_OCCUPIED].probability == pytest.approx(0.5)
    assert branches[QND_EMPTY].post_state.amplitude((0, 0, 1, 0)) == pytest.approx(1)
    assert branches[QND_OCCUPIED].post_state.amplitude((1, 0, 0, 0)) == pytest.approx(1)


def test_qnd_idempotent(rng):
    s = random_state(FockSpace(3, 2), rng)
    for b in qnd_photon_presence(s, (0, 1)):
        (again,) = qnd_photon_presence(b.post_state, (0, 1))
        assert again.label == b.label
        assert again.probability == pytest.approx(1)


def test_qnd_sampling_deterministic():
    s = superpose(FockSpace(4, 1), {(0, 0, 1, 0): R2, (1, 0, 0, 0): R2})
    assert sample_qnd(s, (0, 1), 3).label == sample_qnd(s, (0, 1), 3).label

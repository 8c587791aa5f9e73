"""Teleportation gates, photon loss and a four-qubit loss-recovery code.

Resource ``|t_n>`` lives on ``2n`` modes. Modes ``0..n-1`` are the half that is
measured together with the input, modes ``n..2n-1`` the half that receives the
teleported state. Its terms are::

    |t_n> = sum_j |1>^j |0>^(n-j)  (x)  |0>^j |1>^(n-j)   / sqrt(n+1)

A dual-rail qubit is teleported by sending its ``mode_b`` rail (the rail that
is occupied for logical 1) through a discrete Fourier transform together with
the first half of the resource, then counting those ``n+1`` modes. A total of
``k`` photons with ``0 < k < n+1`` leaves the rail's state on resource mode
``n + k - 1`` up to a phase fixed by the count pattern. ``k = 0`` and
``k = n+1`` are failures that measure the qubit as 0 and 1.

The loss code stores one logical qubit in four dual-rail qubits as
``a |Phi+>|Phi+> + b |Psi+>|Psi+>`` over the pairs (0, 1) and (2, 3).
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from .fock import FockError, FockSpace, PureState, fidelity, normalize, tensor
from .gates import (
    NS_PARAMETERS,
    DualRailQubit,
    HeraldedGateResult,
    NsParameters,
    apply_pauli,
    check_logical,
    cnot_via_csign_branch,
    conditional_sign_branch,
    logical_state,
    logical_vector,
    single_qubit_gate,
)
from .interferometer import PhaseShift, apply_element, apply_mode_unitary
from .measurement import (
    DetectionPattern,
    Seed,
    make_rng,
    outcome_distribution,
    project,
    reindex,
    sample_outcome,
    sample_qnd,
    spawn_rngs,
    QND_EMPTY,
)

MAX_RESOURCE_N = 3

# Scalability thresholds; used only to annotate reports.
ERROR_THRESHOLD = 0.5
LOSS_THRESHOLD_PER_GATE = 0.01


@dataclass(frozen=True)
class ResourceState:
    n: int
    state: PureState


def make_resource(n: int) -> ResourceState:
    if int(n) != n or not 1 <= n <= MAX_RESOURCE_N:
        raise FockError(f"resource size n must be an integer in [1, {MAX_RESOURCE_N}], got {n}")
    amp = 1 / math.sqrt(n + 1)
    terms = {}
    for j in range(n + 1):
        first = (1,) * j + (0,) * (n - j)
        second = (0,) * j + (1,) * (n - j)
        terms[first + second] = amp
    return ResourceState(n, PureState(FockSpace(2 * n, n), terms))


@lru_cache(maxsize=None)
def dft_matrix(d: int) -> np.ndarray:
    k = np.arange(d)
    f = np.exp(2j * np.pi * np.outer(k, k) / d) / math.sqrt(d)
    f.setflags(write=False)
    return f


def _teleport_front(rail: int, offset: int, n: int) -> list[int]:
    return [rail] + [offset + i for i in range(n)]


def _teleport_outcome(counts: Sequence[int], n: int) -> tuple[bool, int, str | None]:
    """(success, phase steps, measured value) for one detector pattern."""
    k = sum(counts)
    if k == 0:
        return False, 0, "0"
    if k == n + 1:
        return False, 0, "1"
    return True, sum(l * c for l, c in enumerate(counts)) % (n + 1), None


def _teleport_branch(
    t: PureState, pattern: DetectionPattern, q: DualRailQubit, offset: int, n: int
) -> tuple[PureState, DualRailQubit | None, str | None, tuple[str, ...]]:
    """Project one herald and apply its phase correction.

    Returns the unnormalized branch, the output qubit (reindexed), the measured
    value on failure, and correction labels.
    """
    removed = pattern.measured_modes
    branch = project(t, pattern)
    ok, steps, measured = _teleport_outcome(pattern.counts, n)
    if not ok:
        return branch, None, measured, ()
    out_mode = offset + n + sum(pattern.counts) - 1
    new_out = reindex(out_mode, t.mode_count, removed)
    labels = ()
    if steps:
        branch = apply_element(branch, PhaseShift(2 * math.pi * steps / (n + 1), new_out))
        labels = (f"phase {steps}/{n + 1} turn on mode {new_out}",)
    qubit = DualRailQubit(reindex(q.mode_a, t.mode_count, removed), new_out)
    return branch, qubit, None, labels


def _prepare_teleport(s: PureState, q: DualRailQubit, r: ResourceState):
    check_logical(s, [q])
    offset = s.mode_count
    t = tensor(s, r.state)
    front = _teleport_front(q.mode_b, offset, r.n)
    t = apply_mode_unitary(t, dft_matrix(r.n + 1), front)
    return t, front, offset


def teleport_branches(s: PureState, q: DualRailQubit, r: ResourceState) -> list[HeraldedGateResult]:
    """Every detector outcome of the teleportation, evaluated exactly.

    ``success_probability`` on each entry is the total over successful heralds;
    ``branch_probability`` is the entry's own weight.
    """
    t, front, offset = _prepare_teleport(s, q, r)
    dist = outcome_distribution(t, front)
    n2 = s.norm2()
    total = sum(p for pat, p in dist if _teleport_outcome(pat.counts, r.n)[0]) / n2
    out = []
    for pattern, p in dist:
        out.append(_teleport_result(t, pattern, p / n2, total, q, offset, r.n))
    return out


def _teleport_result(t, pattern, p, total, q, offset, n) -> HeraldedGateResult:
    branch, qubit, measured, labels = _teleport_branch(t, pattern, q, offset, n)
    return HeraldedGateResult(
        success=qubit is not None,
        herald_pattern=pattern,
        success_probability=total,
        output_state=normalize(branch)[0],
        corrections_applied=labels,
        branch_probability=p,
        output_qubits=() if qubit is None else (qubit,),
        measured_value=measured,
    )


def teleport_qubit(
    s: PureState, q: DualRailQubit, r: ResourceState, seed: Seed = None
) -> HeraldedGateResult:
    """Teleport ``q`` through ``r`` once, sampling the detector outcome.

    The resource modes are appended after ``s``'s modes; the measured modes
    are removed, so ``output_qubits`` is given in the post-measurement indexing.
    """
    t, front, offset = _prepare_teleport(s, q, r)
    dist = outcome_distribution(t, front)
    n2 = s.norm2()
    total = sum(p for pat, p in dist if _teleport_outcome(pat.counts, r.n)[0]) / n2
    pattern = sample_outcome(t, front, make_rng(seed)).pattern
    p = dict((pat.counts, w) for pat, w in dist)[pattern.counts]
    return _teleport_result(t, pattern, p / n2, total, q, offset, r.n)


# ---------------------------------------------------------------------------
# teleported CSIGN


@dataclass(frozen=True)
class CsignResource:
    n: int
    state: PureState
    offline_attempts: int
    herald_probability: float


def prepare_csign_resource(
    n: int, params: NsParameters = NS_PARAMETERS, seed: Seed = None
) -> CsignResource:
    """Two ``|t_n>`` resources with a conditional sign between every pair of output-half modes.

    This applies ``(-1)^(filled_A * filled_B)`` where ``filled`` counts photons
    in each resource's second half. Each of the ``n^2`` heralded sign gates is
    retried until it succeeds; the retries are sampled from ``seed`` and
    reported, and the resulting state is the exact success branch.
    """
    rng = make_rng(seed)
    a, b = make_resource(n), make_resource(n)
    pair = tensor(a.state, b.state)
    attempts = 0
    p_total = 1.0
    for i in range(n, 2 * n):
        for j in range(2 * n + n, 4 * n):
            branch = conditional_sign_branch(pair, i, j, params)
            pair, p = normalize(branch)
            p_total *= p
            attempts += int(rng.geometric(p))
    return CsignResource(n, pair, attempts, p_total)


def _prepare_teleported_csign(s, qa, qb, resource):
    check_logical(s, [qa, qb])
    n = resource.n
    offset = s.mode_count
    t = tensor(s, resource.state)
    front_a = _teleport_front(qa.mode_b, offset, n)
    front_b = _teleport_front(qb.mode_b, offset + 2 * n, n)
    t = apply_mode_unitary(t, dft_matrix(n + 1), front_a)
    t = apply_mode_unitary(t, dft_matrix(n + 1), front_b)
    return t, front_a, front_b, offset


def _csign_outcome(counts: Sequence[int], n: int) -> bool:
    return _teleport_outcome(counts[: n + 1], n)[0] and _teleport_outcome(counts[n + 1:], n)[0]


def _teleported_csign_result(t, pattern, p, total, qa, qb, offset, n, attempts):
    counts = pattern.counts
    ca, cb = counts[: n + 1], counts[n + 1:]
    ok = _csign_outcome(counts, n)
    branch = project(t, pattern)
    removed = pattern.measured_modes
    if not ok:
        values = []
        for c in (ca, cb):
            values.append(_teleport_outcome(c, n)[2] or "?")
        return HeraldedGateResult(
            success=False, herald_pattern=pattern, success_probability=total,
            output_state=normalize(branch)[0], branch_probability=p,
            measured_value="".join(values), details={"offline_attempts": attempts},
        )
    labels = []
    qubits = []
    for c, q, off in ((ca, qa, offset), (cb, qb, offset + 2 * n)):
        k = sum(c)
        out_mode = reindex(off + n + k - 1, t.mode_count, removed)
        steps = sum(l * x for l, x in enumerate(c)) % (n + 1)
        if steps:
            branch = apply_element(branch, PhaseShift(2 * math.pi * steps / (n + 1), out_mode))
            labels.append(f"phase {steps}/{n + 1} turn on mode {out_mode}")
        qubits.append(DualRailQubit(reindex(q.mode_a, t.mode_count, removed), out_mode))
    # sign pattern (-1)^((N_a + b_a)(N_b + b_b)) leaves Z^{N_b} on a and Z^{N_a} on b
    n_a, n_b = n - sum(ca), n - sum(cb)
    if n_b % 2:
        branch = apply_pauli(branch, qubits[0], "Z")
        labels.append("Z on qubit a")
    if n_a % 2:
        branch = apply_pauli(branch, qubits[1], "Z")
        labels.append("Z on qubit b")
    return HeraldedGateResult(
        success=True, herald_pattern=pattern, success_probability=total,
        output_state=normalize(branch)[0], corrections_applied=tuple(labels),
        branch_probability=p, output_qubits=tuple(qubits),
        details={"offline_attempts": attempts},
    )


def teleported_csign_branches(
    s: PureState, qa: DualRailQubit, qb: DualRailQubit, n: int,
    params: NsParameters = NS_PARAMETERS, seed: Seed = None,
) -> list[HeraldedGateResult]:
    """Exact enumeration of the online phase of the teleported CSIGN."""
    resource = prepare_csign_resource(n, params, seed)
    t, fa, fb, offset = _prepare_teleported_csign(s, qa, qb, resource)
    dist = outcome_distribution(t, fa + fb)
    n2 = s.norm2()
    total = sum(p for pat, p in dist if _csign_outcome(pat.counts, n)) / n2
    return [
        _teleported_csign_result(t, pat, p / n2, total, qa, qb, offset, n, resource.offline_attempts)
        for pat, p in dist
    ]


def teleported_csign(
    s: PureState, qa: DualRailQubit, qb: DualRailQubit, n: int,
    params: NsParameters = NS_PARAMETERS, seed: Seed = None,
) -> HeraldedGateResult:
    """CSIGN by teleporting both qubits through a sign-entangled resource pair.

    Offline retries of the resource preparation do not enter
    ``success_probability``, which covers the online teleportations only.
    """
    rng = make_rng(seed)
    resource = prepare_csign_resource(n, params, rng)
    t, fa, fb, offset = _prepare_teleported_csign(s, qa, qb, resource)
    dist = outcome_distribution(t, fa + fb)
    n2 = s.norm2()
    total = sum(p for pat, p in dist if _csign_outcome(pat.counts, n)) / n2
    pattern = sample_outcome(t, fa + fb, rng).pattern
    p = dict((pat.counts, w) for pat, w in dist)[pattern.counts]
    return _teleported_csign_result(
        t, pattern, p / n2, total, qa, qb, offset, n, resource.offline_attempts)


# ---------------------------------------------------------------------------
# photon loss


@dataclass(frozen=True)
class LossChannel:
    per_pass_loss: float
    affected_modes: tuple[int, ...]

    def __post_init__(self):
        if not 0.0 <= self.per_pass_loss <= 1.0:
            raise FockError(f"loss probability must lie in [0, 1], got {self.per_pass_loss}")
        object.__setattr__(self, "affected_modes", tuple(self.affected_modes))


def apply_loss(s: PureState, channel: LossChannel, seed: Seed = None) -> tuple[PureState, list[int]]:
    """One quantum trajectory of independent per-photon loss.

    For each affected mode the number of lost photons ``l`` is drawn with its
    Born weight and the state is updated by the Kraus operator
    ``sqrt(C(n, l) p^l (1-p)^(n-l)) |n - l><n|``. ``lost_modes`` lists the
    mode of every deleted photon; recovery code must not look at it.
    """
    rng = make_rng(seed)
    p = channel.per_pass_loss
    lost: list[int] = []
    amps = dict(s.amplitudes)
    for mode in channel.affected_modes:
        if not 0 <= mode < s.mode_count:
            raise FockError(f"mode {mode} out of range")
        top = max((occ[mode] for occ in amps), default=0)
        if top == 0:
            continue
        # kraus[n][l]^2 = C(n, l) p^l (1-p)^(n-l)
        kraus = [[math.sqrt(math.comb(n, l) * p ** l * (1 - p) ** (n - l)) for l in range(n + 1)]
                 for n in range(top + 1)]
        weights = [0.0] * (top + 1)
        for occ, v in amps.items():
            w = abs(v) ** 2
            for l, k in enumerate(kraus[occ[mode]]):
                weights[l] += w * k * k
        u = rng.random() * math.fsum(weights)
        l, acc = 0, weights[0]
        while (u >= acc or weights[l] == 0) and l < top:
            l += 1
            acc += weights[l]
        new = {}
        for occ, v in amps.items():
            n = occ[mode]
            if n < l or kraus[n][l] == 0:
                continue
            o = occ[:mode] + (n - l,) + occ[mode + 1:]
            new[o] = new.get(o, 0j) + kraus[n][l] * v
        norm = math.sqrt(math.fsum(abs(v) ** 2 for v in new.values()))
        amps = {o: v / norm for o, v in new.items()}
        lost.extend([mode] * l)
    return PureState._trusted(s.space, amps, s.prune), lost


# ---------------------------------------------------------------------------
# four-qubit loss code

BLOCK_QUBITS = tuple(DualRailQubit(2 * i, 2 * i + 1) for i in range(4))
BLOCK_PAIRS = ((0, 1), (2, 3))
LOGICAL_QUBIT = DualRailQubit(0, 1)


@dataclass(frozen=True)
class EncodedBlock:
    state: PureState
    qubits: tuple[DualRailQubit, ...] = BLOCK_QUBITS
    provenance: dict = field(default_factory=dict)


@lru_cache(maxsize=None)
def _encoding_images(params: NsParameters = NS_PARAMETERS) -> tuple[PureState, PureState, float]:
    """Code words for logical 0 and 1, produced by the heralded encoding circuit.

    Qubit 0 carries the data; qubit 2 starts in |0> and qubits 1 and 3 in |+>.
    CNOT 0->2 copies the data into the second pair, then CNOT 1->0 and CNOT
    3->2 spread each copy over a Bell pair. The three CNOTs are CSIGN-based
    and heralded; the herald weight is the same for both code words.
    """
    q = BLOCK_QUBITS
    words = []
    weight = None
    for bit in "01":
        s = logical_state(q, {bit + "000": 1.0})
        s = single_qubit_gate(s, q[1], math.pi / 4)
        s = single_qubit_gate(s, q[3], math.pi / 4)
        s = cnot_via_csign_branch(s, q[0], q[2], params)
        s = cnot_via_csign_branch(s, q[1], q[0], params)
        s = cnot_via_csign_branch(s, q[3], q[2], params)
        s, w = normalize(s)
        weight = w if weight is None else weight
        if abs(w - weight) > 1e-12:
            raise FockError("encoding herald weight depends on the input")
        words.append(s)
    return words[0], words[1], weight


def encode_block(
    logical: PureState, seed: Seed = None, qubit: DualRailQubit = LOGICAL_QUBIT,
    params: NsParameters = NS_PARAMETERS,
) -> EncodedBlock:
    """Encode one dual-rail qubit into the four-qubit loss code.

    The map is the heralded encoding circuit, applied through its images on
    the logical basis (identical by linearity and much cheaper to reuse). The
    block holds four photons: the data photon, its encoder copy and two
    ancilla photons.
    """
    check_logical(logical, [qubit])
    vec = logical_vector(logical, [qubit])
    vec = vec / np.linalg.norm(vec)
    zero, one, weight = _encoding_images(params)
    amps = {}
    for word, c in ((zero, vec[0]), (one, vec[1])):
        if c == 0:
            continue
        for occ, v in word.amplitudes.items():
            amps[occ] = amps.get(occ, 0j) + c * v
    return EncodedBlock(
        PureState._trusted(zero.space, amps),
        provenance={
            "data_qubits": [0, 2],
            "ancilla_qubits": [1, 3],
            "photons": 4,
            "encoding_herald_probability": weight,
            "seed": seed if isinstance(seed, int) else None,
        },
    )


@dataclass(frozen=True)
class RecoveryResult:
    state: PureState | None
    """Recovered qubit on modes (0, 1); ``None`` when uncorrectable."""
    loss_location: int | None
    correctable: bool
    lost_qubits: tuple[int, ...] = ()
    corrections_applied: tuple[str, ...] = ()


X_BASIS_ROTATION = -math.pi / 4


def detect_and_recover(block: EncodedBlock, seed: Seed = None) -> RecoveryResult:
    """Locate a lost photon with QND checks and recover the logical qubit.

    With the loss (or, absent loss, qubit 0) in one pair, the surviving
    member(s) of that pair are measured in the X basis. Outcome ``s = +/-1``
    leaves ``a|Phi+> + s b|Psi+>`` on the other pair, because the two Bell
    states differ only in the sign of their ``|-->`` component. A Z-basis count of
    that pair's first qubit then leaves the logical qubit on its second qubit,
    up to X (count 1) and Z (``s = -1``) corrections.
    """
    rng = make_rng(seed)
    state = block.state
    q = block.qubits
    lost = []
    for i, qi in enumerate(q):
        branch = sample_qnd(state, qi.rails, rng)
        state = branch.post_state
        if branch.label == QND_EMPTY:
            lost.append(i)
    if len(lost) > 1:
        return RecoveryResult(None, None, False, tuple(lost))
    location = lost[0] if lost else None
    pair = next(p for p in BLOCK_PAIRS if location in p) if lost else BLOCK_PAIRS[0]
    other = next(p for p in BLOCK_PAIRS if p != pair)
    x_measured = [i for i in pair if i != location]
    for i in x_measured:
        state = single_qubit_gate(state, q[i], X_BASIS_ROTATION)
    modes = [m for i in pair for m in q[i].rails] + list(q[other[0]].rails)
    result = sample_outcome(state, modes, rng)
    counts = dict(zip(modes, result.pattern.counts))
    # without loss both X outcomes agree; either one fixes the sign
    sign = -1 if counts[q[x_measured[0]].rails[1]] else 1
    out = result.post_state
    keep = DualRailQubit(0, 1)
    labels = []
    if counts[q[other[0]].rails[1]]:
        out = apply_pauli(out, keep, "X")
        labels.append("X")
    if sign < 0:
        out = apply_pauli(out, keep, "Z")
        labels.append("Z")
    return RecoveryResult(out, location, True, tuple(lost), tuple(labels))


def decode_block(block: EncodedBlock, seed: Seed = None) -> PureState:
    result = detect_and_recover(block, seed)
    if not result.correctable:
        raise FockError("block has lost photons beyond the code's reach")
    return result.state


def single_cycle_survival(per_cycle_loss: float) -> float:
    """Probability that at most one of the block's four photons is lost."""
    p = per_cycle_loss
    return (1 - p) ** 4 + 4 * p * (1 - p) ** 3


@dataclass
class MemoryReport:
    cycles: int
    per_cycle_loss: float
    trajectories: int
    mean_fidelity: list[float | None]
    min_fidelity: list[float | None]
    survival_fraction: list[float]
    loss_locations: dict[str, int]

    def rows(self) -> list[tuple[int, float | None, float]]:
        return [(c + 1, self.mean_fidelity[c], self.survival_fraction[c]) for c in range(self.cycles)]


def memory_cycle(
    logical: PureState, cycles: int, per_cycle_loss: float, seed: int = 0,
    trajectories: int = 1000, qubit: DualRailQubit = LOGICAL_QUBIT,
) -> MemoryReport:
    """Store a qubit in a loop of encode, lose, detect-and-recover, repeated ``cycles`` times.

    Each trajectory owns a generator spawned from ``seed``. A trajectory ends
    at the first cycle with an uncorrectable loss pattern.
    """
    if cycles < 1:
        raise FockError("cycles must be positive")
    if trajectories < 1:
        raise FockError("trajectories must be positive")
    target = logical_state([LOGICAL_QUBIT], {
        "0": logical_vector(logical, [qubit])[0], "1": logical_vector(logical, [qubit])[1]})
    channel = LossChannel(per_cycle_loss, tuple(range(8)))
    alive = [0] * cycles
    fid_sum = [0.0] * cycles
    fid_min = [math.inf] * cycles
    locations = {str(i): 0 for i in range(4)}
    locations["none"] = 0
    for rng in spawn_rngs(seed, trajectories):
        state = target
        for c in range(cycles):
            block = encode_block(state)
            lossy, _ = apply_loss(block.state, channel, rng)
            rec = detect_and_recover(replace(block, state=lossy), rng)
            if not rec.correctable:
                break
            state = rec.state
            f = fidelity(state, target)
            alive[c] += 1
            fid_sum[c] += f
            fid_min[c] = min(fid_min[c], f)
            locations["none" if rec.loss_location is None else str(rec.loss_location)] += 1
    return MemoryReport(
        cycles=cycles,
        per_cycle_loss=per_cycle_loss,
        trajectories=trajectories,
        mean_fidelity=[fid_sum[c] / alive[c] if alive[c] else None for c in range(cycles)],
        min_fidelity=[fid_min[c] if alive[c] else None for c in range(cycles)],
        survival_fraction=[alive[c] / trajectories for c in range(cycles)],
        loss_locations=locations,
    )

"""Measurement-induced photonic gates.

Dual-rail qubits hold one photon across two modes, logical 0 in ``mode_a`` and
logical 1 in ``mode_b``. Polarization qubits are the same thing with the two
modes read as the H and V polarizations of one spatial path.

Every heralded gate appends its ancilla modes after the input's modes, runs a
linear-optical network, and conditions on the herald. The ancilla modes are
removed again, so on success the output lives on the input's modes.
"""

from __future__ import annotations

import itertools
import math
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from .fock import (
    FockError,
    FockSpace,
    PureState,
    append_modes,
    make_basis_state,
    normalize,
    permute_modes,
    tensor,
)
from .interferometer import BeamSplitter, OpticalCircuit, PhaseShift, apply_element
from .measurement import (
    DetectionPattern,
    HeraldImpossibleError,
    Seed,
    make_rng,
    outcome_distribution,
    project,
)

LOGICAL_TOL = 1e-9


@dataclass(frozen=True)
class DualRailQubit:
    mode_a: int
    mode_b: int

    def __post_init__(self):
        if self.mode_a == self.mode_b:
            raise FockError(f"dual-rail qubit needs two distinct modes, got {self.mode_a} twice")

    @property
    def rails(self) -> tuple[int, int]:
        return (self.mode_a, self.mode_b)


@dataclass(frozen=True)
class PolarizationQubit:
    rail_h: int
    rail_v: int

    def __post_init__(self):
        if self.rail_h == self.rail_v:
            raise FockError(f"polarization qubit needs two distinct modes, got {self.rail_h} twice")

    @property
    def rails(self) -> tuple[int, int]:
        return (self.rail_h, self.rail_v)


Qubit = DualRailQubit | PolarizationQubit


@dataclass(frozen=True)
class HeraldedGateResult:
    success: bool
    herald_pattern: DetectionPattern | None
    success_probability: float
    """Total weight of the accepted herald set for this input."""
    output_state: PureState | None
    corrections_applied: tuple[str, ...] = ()
    branch_probability: float | None = None
    """Weight of this particular herald pattern, when it differs from the total."""
    output_qubits: tuple[Qubit, ...] = ()
    measured_value: str | None = None
    """Logical value revealed by a failed teleportation."""
    details: Mapping = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "success": self.success,
            "herald_pattern": None if self.herald_pattern is None else self.herald_pattern.to_dict(),
            "success_probability": self.success_probability,
            "branch_probability": self.branch_probability,
            "corrections_applied": list(self.corrections_applied),
            "measured_value": self.measured_value,
            "output_qubits": [list(q.rails) for q in self.output_qubits],
        }


# ---------------------------------------------------------------------------
# logical bookkeeping


def _rails(qubits: Sequence[Qubit]) -> list[int]:
    rails = [m for q in qubits for m in q.rails]
    if len(set(rails)) != len(rails):
        raise FockError(f"qubits share modes: {rails}")
    return rails


def logical_state(
    qubits: Sequence[Qubit],
    amplitudes: Mapping[str, complex],
    mode_count: int | None = None,
    photon_cutoff: int | None = None,
) -> PureState:
    """Normalized state with the given amplitudes on logical bitstrings.

    Modes not belonging to any qubit are left in vacuum.
    """
    rails = _rails(qubits)
    if mode_count is None:
        mode_count = max(rails) + 1
    space = FockSpace(mode_count, len(qubits) if photon_cutoff is None else photon_cutoff)
    terms = {}
    for bits, amp in amplitudes.items():
        if len(bits) != len(qubits) or set(bits) - {"0", "1"}:
            raise FockError(f"bad bitstring {bits!r} for {len(qubits)} qubits")
        occ = [0] * mode_count
        for q, b in zip(qubits, bits):
            occ[q.rails[int(b)]] = 1
        terms[tuple(occ)] = complex(amp)
    total = math.fsum(abs(a) ** 2 for a in terms.values())
    if total == 0:
        raise FockError("all logical amplitudes are zero")
    return PureState(space, {o: a / math.sqrt(total) for o, a in terms.items()})


def _bits_of(occ: Sequence[int], qubits: Sequence[Qubit]) -> str | None:
    bits = []
    for q in qubits:
        n0, n1 = occ[q.rails[0]], occ[q.rails[1]]
        if (n0, n1) == (1, 0):
            bits.append("0")
        elif (n0, n1) == (0, 1):
            bits.append("1")
        else:
            return None
    return "".join(bits)


def logical_readout(s: PureState, qubits: Sequence[Qubit]) -> tuple[dict[str, float], float]:
    """Probabilities of logical bitstrings and the weight outside the logical subspace.

    Both are relative to the state's norm^2. Other modes are summed over.
    """
    _rails(qubits)
    n2 = s.norm2()
    if n2 == 0:
        raise FockError("cannot read out the zero state")
    probs: dict[str, float] = {}
    leakage = 0.0
    for occ, v in s.amplitudes.items():
        bits = _bits_of(occ, qubits)
        w = abs(v) ** 2 / n2
        if bits is None:
            leakage += w
        else:
            probs[bits] = probs.get(bits, 0.0) + w
    return dict(sorted(probs.items())), leakage


def logical_vector(s: PureState, qubits: Sequence[Qubit], tol: float = LOGICAL_TOL) -> np.ndarray:
    """Unnormalized amplitudes over logical bitstrings, index ``int(bits, 2)``.

    Non-qubit modes must be in one common occupation (weights below ``tol``
    are ignored), otherwise the logical amplitudes are not well defined.
    """
    rails = set(_rails(qubits))
    rest = [k for k in range(s.mode_count) if k not in rails]
    vec = np.zeros(2 ** len(qubits), dtype=complex)
    env = None
    for occ, v in s.amplitudes.items():
        bits = _bits_of(occ, qubits)
        if bits is None:
            if abs(v) > tol:
                raise FockError(f"state leaks out of the logical subspace at {occ}")
            continue
        e = tuple(occ[k] for k in rest)
        if env is None:
            env = e
        elif e != env and abs(v) > tol:
            raise FockError("non-qubit modes are entangled with the logical state")
        vec[int(bits, 2)] += v
    return vec


def check_logical(s: PureState, qubits: Sequence[Qubit], tol: float = LOGICAL_TOL) -> None:
    _, leak = logical_readout(s, qubits)
    if leak > tol:
        raise FockError(f"input has weight {leak:.3g} outside the logical subspace")


def logical_matrix(
    branch: Callable[[PureState], PureState],
    qubits: Sequence[Qubit],
    mode_count: int | None = None,
    out_qubits: Sequence[Qubit] | None = None,
) -> np.ndarray:
    """Matrix of a (possibly heralded, unnormalized) map on the logical subspace.

    Column ``j`` holds the logical amplitudes of ``branch`` applied to basis
    state ``j``.
    """
    out_qubits = qubits if out_qubits is None else out_qubits
    k = len(qubits)
    cols = []
    for j in range(2 ** k):
        s = logical_state(qubits, {format(j, f"0{k}b"): 1.0}, mode_count)
        cols.append(logical_vector(branch(s), out_qubits))
    return np.array(cols).T


def phase_aligned_error(m: np.ndarray, target: np.ndarray) -> float:
    """Max entrywise error of ``m`` against ``target`` after fixing scale and global phase."""
    overlap = np.vdot(target, m)
    if overlap == 0:
        return float("inf")
    scale = overlap / np.vdot(target, target)
    return float(np.max(np.abs(m / scale - target)))


# ---------------------------------------------------------------------------
# single-qubit operations


def single_qubit_gate(s: PureState, q: DualRailQubit, theta: float, phi: float = 0.0) -> PureState:
    """Beam splitter between the two rails.

    In the logical basis this is ``[[cos t, -e^{-i phi} sin t], [e^{i phi} sin t, cos t]]``.
    """
    return apply_element(s, BeamSplitter(theta, phi, q.rails[0], q.rails[1]))


def pauli_elements(q: Qubit, label: str) -> tuple:
    """Optical elements realizing a Pauli correction; ``"XZ"`` applies X then Z."""
    zero, one = q.rails
    ops = {
        "X": (BeamSplitter(math.pi / 2, 0.0, zero, one), PhaseShift(math.pi, zero)),
        "Z": (PhaseShift(math.pi, one),),
    }
    out = ()
    for ch in label:
        if ch not in ops:
            raise FockError(f"unknown correction {label!r}")
        out += ops[ch]
    return out


def apply_pauli(s: PureState, q: Qubit, label: str) -> PureState:
    for e in pauli_elements(q, label):
        s = apply_element(s, e)
    return s


# ---------------------------------------------------------------------------
# nonlinear sign gate


@dataclass(frozen=True)
class NsParameters:
    """Three-splitter network on (signal, ancilla photon, ancilla vacuum).

    The signal first picks up ``signal_phase``, then splitters act on
    (signal, ancilla 1), (ancilla 1, ancilla 2) and (signal, ancilla 1).
    """

    theta_1: float
    theta_2: float
    theta_3: float
    phi_1: float = 0.0
    phi_2: float = 0.0
    phi_3: float = 0.0
    signal_phase: float = math.pi

    def elements(self, signal: int, anc_1: int, anc_2: int) -> tuple:
        return (
            PhaseShift(self.signal_phase, signal),
            BeamSplitter(self.theta_1, self.phi_1, signal, anc_1),
            BeamSplitter(self.theta_2, self.phi_2, anc_1, anc_2),
            BeamSplitter(self.theta_3, self.phi_3, signal, anc_1),
        )

    def circuit(self) -> OpticalCircuit:
        return OpticalCircuit(3, self.elements(0, 1, 2))


NS_HERALD = (1, 0)
NS_SUCCESS_PROBABILITY = 0.25

# Frozen output of solve_ns_parameters(); test_gates re-solves and checks residuals.
NS_PARAMETERS = NsParameters(
    theta_1=1.034354414349423,
    theta_2=-0.41723338061830606,
    theta_3=-2.107238573132605,
)


def ns_herald_amplitudes(params: NsParameters) -> np.ndarray:
    """Heralded amplitudes ``<n,1,0| U |n,1,0>`` for ``n = 0, 1, 2``."""
    circuit = params.circuit()
    out = []
    for n in range(3):
        s = make_basis_state(FockSpace(3, 3), (n, *NS_HERALD))
        out.append(circuit.apply(s).amplitude((n, *NS_HERALD)))
    return np.array(out)


def ns_residuals(params: NsParameters) -> np.ndarray:
    """Residuals of the three NS constraints: equal |0>,|1> amplitudes, flipped |2>, weight 1/4."""
    a0, a1, a2 = ns_herald_amplitudes(params)
    return np.array([abs(a1 - a0), abs(a2 + a0), abs(a0) ** 2 - NS_SUCCESS_PROBABILITY])


class NsSolveError(RuntimeError):
    pass


def solve_ns_parameters(
    x0: Sequence[float] = (1.0, -0.4, -2.1), tol: float = 1e-9
) -> NsParameters:
    """Find splitter angles for which the (1, 0) herald implements the NS map.

    Raises:
        NsSolveError: if any residual stays above ``tol``.
    """

    def fun(x):
        a0, a1, a2 = ns_herald_amplitudes(NsParameters(*x))
        d1, d2 = a1 - a0, a2 + a0
        return [d1.real, d1.imag, d2.real, d2.imag, abs(a0) ** 2 - NS_SUCCESS_PROBABILITY]

    sol = least_squares(fun, np.asarray(x0, dtype=float), xtol=1e-15, ftol=1e-15, gtol=1e-15)
    params = NsParameters(*map(float, sol.x))
    res = ns_residuals(params)
    if np.max(np.abs(res)) > tol:
        raise NsSolveError(f"NS solve did not converge, residuals {res.tolist()}")
    return params


def _check_signal(s: PureState, modes: Sequence[int]) -> None:
    for occ in s.amplitudes:
        for m in modes:
            if occ[m] > 2:
                raise FockError(f"NS gate input has {occ[m]} photons in mode {m}; at most 2 allowed")


def ns_branch(s: PureState, signal_mode: int, params: NsParameters = NS_PARAMETERS) -> PureState:
    """Unnormalized success branch of the NS gate, on the input's modes."""
    if not 0 <= signal_mode < s.mode_count:
        raise FockError(f"signal mode {signal_mode} out of range")
    _check_signal(s, [signal_mode])
    m = s.mode_count
    t = append_modes(s, (1, 0))
    for e in params.elements(signal_mode, m, m + 1):
        t = apply_element(t, e)
    branch = project(t, DetectionPattern((m, m + 1), NS_HERALD))
    return PureState._trusted(
        FockSpace(m, s.space.photon_cutoff), dict(branch.amplitudes), s.prune
    )


def _heralded(
    s: PureState, branch: PureState, pattern: DetectionPattern | None, **kw
) -> HeraldedGateResult:
    p = branch.norm2()
    if p == 0:
        raise HeraldImpossibleError("success herald has probability 0 for this input")
    return HeraldedGateResult(
        success=True,
        herald_pattern=pattern,
        success_probability=p / s.norm2(),
        output_state=normalize(branch)[0],
        **kw,
    )


def ns_gate(s: PureState, signal_mode: int, params: NsParameters = NS_PARAMETERS) -> HeraldedGateResult:
    """Heralded NS map ``a0|0> + a1|1> + a2|2>  ->  a0|0> + a1|1> - a2|2>`` on one mode."""
    branch = ns_branch(s, signal_mode, params)
    m = s.mode_count
    return _heralded(s, branch, DetectionPattern((m, m + 1), NS_HERALD))


# ---------------------------------------------------------------------------
# controlled sign


def conditional_sign_branch(
    s: PureState, mode_x: int, mode_y: int, params: NsParameters = NS_PARAMETERS
) -> PureState:
    """Two NS gates between 50:50 splitters: ``|1,1> -> -|1,1>`` on two modes.

    Input occupations of 0 or 1 photon per mode pick up no other phase. The
    branch weight is the product of the two NS herald weights.
    """
    hom = BeamSplitter(math.pi / 4, 0.0, mode_x, mode_y)
    for occ in s.amplitudes:
        if occ[mode_x] + occ[mode_y] > 2:
            raise FockError("conditional sign needs at most two photons on its modes")
    t = apply_element(s, hom)
    t = ns_branch(t, mode_x, params)
    t = ns_branch(t, mode_y, params)
    return apply_element(t, hom.inverse())


def csign_branch(
    s: PureState, qa: DualRailQubit, qb: DualRailQubit, params: NsParameters = NS_PARAMETERS
) -> PureState:
    _rails([qa, qb])
    return conditional_sign_branch(s, qa.mode_b, qb.mode_b, params)


def csign(
    s: PureState, qa: DualRailQubit, qb: DualRailQubit, params: NsParameters = NS_PARAMETERS
) -> HeraldedGateResult:
    """Heralded ``diag(1, 1, 1, -1)`` on two dual-rail qubits.

    The herald is the NS pattern (1, 0) on both ancilla pairs; its modes are
    numbered in the temporary space with both ancilla pairs appended.
    """
    check_logical(s, [qa, qb])
    m = s.mode_count
    pattern = DetectionPattern((m, m + 1, m + 2, m + 3), NS_HERALD * 2)
    return _heralded(s, csign_branch(s, qa, qb, params), pattern)


def cnot_via_csign_branch(
    s: PureState, control: DualRailQubit, target: DualRailQubit,
    params: NsParameters = NS_PARAMETERS,
) -> PureState:
    """CSIGN sandwiched between -pi/4 and +pi/4 rotations of the target (exact CNOT)."""
    s = single_qubit_gate(s, target, -math.pi / 4)
    s = csign_branch(s, control, target, params)
    return single_qubit_gate(s, target, math.pi / 4)


# ---------------------------------------------------------------------------
# polarization CNOT


def bell_pair(qa: PolarizationQubit, qb: PolarizationQubit, mode_count: int | None = None) -> PureState:
    """``(|HH> + |VV>)/sqrt(2)``."""
    return logical_state([qa, qb], {"00": 1.0, "11": 1.0}, mode_count)


def _swap(s: PureState, i: int, j: int) -> PureState:
    order = list(range(s.mode_count))
    order[i], order[j] = j, i
    return permute_modes(s, order)


def _cnot_network(s: PureState, control: PolarizationQubit, target: PolarizationQubit):
    """Run the two-PBS network; return the pre-detection state and the detector modes.

    Ancilla photons x (modes m, m+1) and y (m+2, m+3) start in a Bell pair.
    PBS1 joins control and x in the H/V basis; x is then rotated to the
    diagonal basis and counted at D1. PBS2 joins y and the target in the
    diagonal basis; y is counted at D2 in the H/V basis.
    """
    m = s.mode_count
    x, y = PolarizationQubit(m, m + 1), PolarizationQubit(m + 2, m + 3)
    anc = bell_pair(PolarizationQubit(0, 1), PolarizationQubit(2, 3))
    t = tensor(s, anc)
    hwp = math.pi / 4
    # PBS: H transmitted, V rails exchanged between the two paths
    t = _swap(t, control.rail_v, x.rail_v)
    t = apply_element(t, BeamSplitter(hwp, 0.0, *x.rails))
    t = apply_element(t, BeamSplitter(hwp, 0.0, *y.rails))
    t = apply_element(t, BeamSplitter(hwp, 0.0, *target.rails))
    t = _swap(t, y.rail_v, target.rail_v)
    t = apply_element(t, BeamSplitter(-hwp, 0.0, *y.rails))
    t = apply_element(t, BeamSplitter(-hwp, 0.0, *target.rails))
    return t, x.rails + y.rails


def _accepted(counts: Sequence[int]) -> bool:
    return sum(counts[:2]) == 1 and sum(counts[2:]) == 1


def _cnot_raw_branch(
    s: PureState, control: PolarizationQubit, target: PolarizationQubit, counts: Sequence[int]
) -> PureState:
    t, det = _cnot_network(s, control, target)
    branch = project(t, DetectionPattern(det, counts))
    return PureState._trusted(FockSpace(s.mode_count, s.space.photon_cutoff),
                              dict(branch.amplitudes), s.prune)


CNOT_MATRIX = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)

_PAULI = {
    "": np.eye(2),
    "X": np.array([[0, 1], [1, 0]]),
    "Z": np.diag([1, -1]),
    "XZ": np.array([[0, 1], [-1, 0]]),  # Z after X
}

# Herald (D1 H, D1 V, D2 H, D2 V) -> (control correction, target correction).
# Regenerate with derive_cnot_feed_forward(); test_gates checks they agree.
CNOT_FEED_FORWARD: dict[tuple[int, int, int, int], tuple[str, str]] = {
    (0, 1, 0, 1): ("", "X"),
    (0, 1, 1, 0): ("", ""),
    (1, 0, 0, 1): ("Z", "X"),
    (1, 0, 1, 0): ("Z", ""),
}


def derive_cnot_feed_forward(tol: float = LOGICAL_TOL) -> dict[tuple[int, ...], tuple[str, str]]:
    """Find, for every one-photon-per-detector herald, the Pauli pair that turns it into CNOT.

    Works by exact simulation of each herald branch on the four logical basis
    inputs. Heralds with no exact Pauli fix are left out.
    """
    control, target = PolarizationQubit(0, 1), PolarizationQubit(2, 3)
    table = {}
    heralds = [c for c in itertools.product(range(3), repeat=4) if _accepted(c)]
    for counts in heralds:
        try:
            k = logical_matrix(lambda st: _cnot_raw_branch(st, control, target, counts),
                               [control, target])
        except FockError:
            continue
        for pc, pt in itertools.product(_PAULI, repeat=2):
            fixed = np.kron(_PAULI[pc], _PAULI[pt]) @ k
            if phase_aligned_error(fixed, CNOT_MATRIX) < tol:
                table[counts] = (pc, pt)
                break
    return dict(sorted(table.items()))


def _polarization_inputs(s: PureState, control: PolarizationQubit, target: PolarizationQubit):
    _rails([control, target])
    check_logical(s, [control, target])


def cnot_polarization_branches(
    s: PureState, control: PolarizationQubit, target: PolarizationQubit
) -> list[HeraldedGateResult]:
    """Exact evaluation of every accepted herald, with feed-forward applied."""
    _polarization_inputs(s, control, target)
    t, det = _cnot_network(s, control, target)
    dist = outcome_distribution(t, det)
    total = sum(p for pat, p in dist if pat.counts in CNOT_FEED_FORWARD) / s.norm2()
    out = []
    for pattern, p in dist:
        if pattern.counts not in CNOT_FEED_FORWARD:
            continue
        out.append(_cnot_success(s, t, pattern, p, total, control, target))
    return out


def _cnot_success(s, t, pattern, p, total, control, target) -> HeraldedGateResult:
    branch = project(t, pattern)
    pc, pt = CNOT_FEED_FORWARD[pattern.counts]
    branch = apply_pauli(apply_pauli(branch, control, pc), target, pt)
    labels = tuple(f"{q}:{c}" for q, c in (("control", pc), ("target", pt)) if c)
    return HeraldedGateResult(
        success=True,
        herald_pattern=pattern,
        success_probability=total,
        output_state=normalize(branch)[0],
        corrections_applied=labels,
        branch_probability=p / s.norm2(),
        output_qubits=(control, target),
    )


def cnot_polarization(
    s: PureState, control: PolarizationQubit, target: PolarizationQubit, seed: Seed = None
) -> HeraldedGateResult:
    """Run the heralded polarization CNOT once, sampling the detector outcome.

    On an accepted herald the feed-forward corrections are applied and listed
    in ``corrections_applied``. On any other herald ``success`` is False and
    the uncorrected post-detection state is returned.
    """
    _polarization_inputs(s, control, target)
    rng = make_rng(seed)
    t, det = _cnot_network(s, control, target)
    dist = outcome_distribution(t, det)
    total = sum(p for pat, p in dist if pat.counts in CNOT_FEED_FORWARD) / s.norm2()
    weights = np.array([p for _, p in dist])
    idx = int(np.searchsorted(np.cumsum(weights), rng.random() * weights.sum(), side="right"))
    pattern, p = dist[min(idx, len(dist) - 1)]
    if pattern.counts in CNOT_FEED_FORWARD:
        return _cnot_success(s, t, pattern, p, total, control, target)
    branch = project(t, pattern)
    return HeraldedGateResult(
        success=False,
        herald_pattern=pattern,
        success_probability=total,
        output_state=normalize(branch)[0],
        branch_probability=p / s.norm2(),
    )

"""Photon counting, heralding and QND presence checks.

Counting is destructive: the measured modes are removed from the post-state and
the remaining modes keep their relative order. The QND presence check is the
exception and leaves every mode in place.

Probabilities reported for a branch are absolute weights, i.e. the squared norm
of the projected (unnormalized) branch. For normalized inputs they are the
usual Born probabilities.
"""

from __future__ import annotations

import math
from collections import defaultdict
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .fock import FockError, FockSpace, PureState, normalize

Seed = int | np.random.SeedSequence | np.random.Generator | None


class HeraldImpossibleError(FockError):
    """The requested detection pattern has zero probability."""


def make_rng(seed: Seed) -> np.random.Generator:
    """A PCG64 generator from an int, a ``SeedSequence`` or an existing generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))


def spawn_rngs(seed: int | np.random.SeedSequence, count: int) -> list[np.random.Generator]:
    """Independent child generators, one per trajectory."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return [np.random.Generator(np.random.PCG64(child)) for child in ss.spawn(count)]


@dataclass(frozen=True)
class DetectionPattern:
    measured_modes: tuple[int, ...]
    counts: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "measured_modes", tuple(int(m) for m in self.measured_modes))
        object.__setattr__(self, "counts", tuple(int(c) for c in self.counts))
        if len(self.measured_modes) != len(self.counts):
            raise FockError(
                f"pattern has {len(self.counts)} counts for {len(self.measured_modes)} modes"
            )
        if any(c < 0 for c in self.counts):
            raise FockError(f"negative photon count in {self.counts}")

    @property
    def total(self) -> int:
        return sum(self.counts)

    def to_dict(self) -> dict:
        return {"modes": list(self.measured_modes), "counts": list(self.counts)}


@dataclass(frozen=True)
class MeasurementResult:
    pattern: DetectionPattern
    probability: float
    post_state: PureState | None
    """Normalized state of the unmeasured modes; ``None`` when every mode was measured."""

    def to_dict(self) -> dict:
        return {
            "pattern": self.pattern.to_dict(),
            "probability": self.probability,
            "post_state": None if self.post_state is None else self.post_state.to_json(),
        }


def _check_measured(s: PureState, modes: Sequence[int]) -> tuple[int, ...]:
    modes = tuple(int(m) for m in modes)
    if len(set(modes)) != len(modes):
        raise FockError(f"measured modes {modes} are not distinct")
    for m in modes:
        if not 0 <= m < s.mode_count:
            raise FockError(f"mode {m} out of range for {s.mode_count} modes")
    return modes


def remaining_modes(mode_count: int, removed: Sequence[int]) -> list[int]:
    """Original indices of the modes that survive removal, in order."""
    removed = set(removed)
    return [k for k in range(mode_count) if k not in removed]


def reindex(mode: int, mode_count: int, removed: Sequence[int]) -> int:
    """New index of ``mode`` after ``removed`` modes are deleted."""
    if mode in set(removed):
        raise FockError(f"mode {mode} was removed")
    return remaining_modes(mode_count, removed).index(mode)


def project(s: PureState, pattern: DetectionPattern) -> PureState | None:
    """Unnormalized branch of ``s`` on the unmeasured modes for ``pattern``.

    Returns ``None`` only if every mode was measured; the branch weight is then
    lost, so callers needing it should use :func:`outcome_distribution`.
    """
    modes = _check_measured(s, pattern.measured_modes)
    keep = remaining_modes(s.mode_count, modes)
    if not keep:
        return None
    amps: dict = {}
    for occ, v in s.amplitudes.items():
        if all(occ[m] == c for m, c in zip(modes, pattern.counts)):
            amps[tuple(occ[k] for k in keep)] = v
    space = FockSpace(len(keep), s.space.photon_cutoff)
    return PureState._trusted(space, amps, s.prune)


def outcome_distribution(
    s: PureState, modes: Sequence[int]
) -> list[tuple[DetectionPattern, float]]:
    """All detection patterns on ``modes`` with non-zero weight.

    Patterns are sorted by total count then by counts, so the list order is
    deterministic. Weights sum to ``norm2(s)``.
    """
    if not s.amplitudes:
        raise FockError("cannot measure the zero state")
    modes = _check_measured(s, modes)
    weights: dict[tuple, list[float]] = defaultdict(list)
    for occ, v in s.amplitudes.items():
        weights[tuple(occ[m] for m in modes)].append(abs(v) ** 2)
    out = [(DetectionPattern(modes, counts), math.fsum(w)) for counts, w in weights.items()]
    out = [(p, w) for p, w in out if w > 0]
    out.sort(key=lambda pw: (pw[0].total, pw[0].counts))
    return out


def postselect(s: PureState, pattern: DetectionPattern) -> MeasurementResult:
    """Condition on ``pattern`` and renormalize the surviving modes.

    Raises:
        HeraldImpossibleError: if the pattern never occurs.
    """
    branch = project(s, pattern)
    if branch is None:
        weight = dict((p.counts, w) for p, w in outcome_distribution(s, pattern.measured_modes))
        p = weight.get(pattern.counts, 0.0)
        if p == 0:
            raise HeraldImpossibleError(f"pattern {pattern.counts} has probability 0")
        return MeasurementResult(pattern, p, None)
    p = branch.norm2()
    if p == 0:
        raise HeraldImpossibleError(
            f"pattern {pattern.counts} on modes {pattern.measured_modes} has probability 0"
        )
    return MeasurementResult(pattern, p, normalize(branch)[0])


def _draw(dist: list[tuple[DetectionPattern, float]], rng: np.random.Generator) -> DetectionPattern:
    total = math.fsum(w for _, w in dist)
    u = rng.random() * total
    acc = 0.0
    for pattern, w in dist:
        acc += w
        if u < acc:
            return pattern
    return dist[-1][0]


def sample_outcome(s: PureState, modes: Sequence[int], seed: Seed) -> MeasurementResult:
    """Draw one detection pattern with Born probabilities and return its branch."""
    rng = make_rng(seed)
    pattern = _draw(outcome_distribution(s, modes), rng)
    return postselect(s, pattern)


@dataclass(frozen=True)
class DetectorModel:
    """Number-resolving detector with finite efficiency.

    ``max_resolved_count=None`` means unlimited resolution.
    """

    efficiency: float = 1.0
    max_resolved_count: int | None = None

    def __post_init__(self):
        if not 0.0 <= self.efficiency <= 1.0:
            raise FockError(f"efficiency must lie in [0, 1], got {self.efficiency}")
        if self.max_resolved_count is not None and self.max_resolved_count < 0:
            raise FockError("max_resolved_count must be non-negative")

    def reported(self, true_count: int, rng: np.random.Generator) -> tuple[int, float]:
        """Reported count and the probability of that thinning outcome."""
        kept = int(rng.binomial(true_count, self.efficiency)) if true_count else 0
        p = math.comb(true_count, kept) * self.efficiency ** kept * (
            1 - self.efficiency) ** (true_count - kept)
        if self.max_resolved_count is not None:
            kept = min(kept, self.max_resolved_count)
        return kept, p


def detect_with_model(
    s: PureState, modes: Sequence[int], model: DetectorModel, seed: Seed
) -> MeasurementResult:
    """Sample a detection through an imperfect detector.

    The true pattern is drawn first, exactly as in :func:`sample_outcome` with
    the same seed. Each photon then survives independently with probability
    ``efficiency`` and counts saturate at ``max_resolved_count``. The returned
    pattern holds the reported counts, ``post_state`` is the branch of the true
    pattern, and ``probability`` is the joint weight of the true pattern and the
    sampled thinning.
    """
    rng = make_rng(seed)
    true = _draw(outcome_distribution(s, modes), rng)
    result = postselect(s, true)
    counts, p = [], result.probability
    for c in true.counts:
        k, pk = model.reported(c, rng)
        counts.append(k)
        p *= pk
    return MeasurementResult(DetectionPattern(true.measured_modes, counts), p, result.post_state)


QND_EMPTY = "0"
QND_OCCUPIED = ">=1"


@dataclass(frozen=True)
class QndBranch:
    label: str
    probability: float
    post_state: PureState


def qnd_photon_presence(s: PureState, rail_modes: Sequence[int]) -> list[QndBranch]:
    """Ideal non-demolition check for photon presence on a group of rails.

    Projects onto "no photon in ``rail_modes``" and "at least one photon" without
    touching any mode. Only branches with non-zero weight are returned.
    """
    if not s.amplitudes:
        raise FockError("cannot measure the zero state")
    rails = _check_measured(s, rail_modes)
    empty, occupied = {}, {}
    for occ, v in s.amplitudes.items():
        (occupied if any(occ[m] for m in rails) else empty)[occ] = v
    out = []
    for label, amps in ((QND_EMPTY, empty), (QND_OCCUPIED, occupied)):
        branch = PureState._trusted(s.space, amps, s.prune)
        p = branch.norm2()
        if p > 0:
            out.append(QndBranch(label, p, normalize(branch)[0]))
    return out


def sample_qnd(s: PureState, rail_modes: Sequence[int], seed: Seed) -> QndBranch:
    rng = make_rng(seed)
    branches = qnd_photon_presence(s, rail_modes)
    if len(branches) == 1:
        return branches[0]
    u = rng.random() * math.fsum(b.probability for b in branches)
    return branches[0] if u < branches[0].probability else branches[1]

"""Sparse Fock-space states over a fixed number of optical modes.

States are stored as a mapping from occupation tuples to complex amplitudes.
Heralded branches are represented by subnormalized states whose squared norm
is the branch probability, so conditional amplitudes compose without carrying
a separate probability around.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Iterator, Mapping, Sequence
from dataclasses import dataclass
from functools import cache
from types import MappingProxyType

import numpy as np

DEFAULT_PRUNE = 1e-14
NORM_SLACK = 1e-9

Occupation = tuple[int, ...]


class FockError(ValueError):
    """Raised for malformed occupations, spaces or states."""


def compositions(total: int, parts: int) -> Iterator[Occupation]:
    """Yield every occupation of ``parts`` modes holding exactly ``total`` photons.

    Ordering is reverse-lexicographic, so ``(total, 0, ...)`` comes first.
    """
    if parts == 0:
        if total == 0:
            yield ()
        return
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in compositions(total - first, parts - 1):
            yield (first, *rest)


@cache
def _basis(mode_count: int, photon_cutoff: int) -> tuple[Occupation, ...]:
    return tuple(
        occ for n in range(photon_cutoff + 1) for occ in compositions(n, mode_count)
    )


@cache
def _index(mode_count: int, photon_cutoff: int) -> dict[Occupation, int]:
    return {occ: i for i, occ in enumerate(_basis(mode_count, photon_cutoff))}


@dataclass(frozen=True)
class FockSpace:
    """Truncated Fock space of ``mode_count`` modes and at most ``photon_cutoff`` photons."""

    mode_count: int
    photon_cutoff: int

    def __post_init__(self):
        if int(self.mode_count) != self.mode_count or self.mode_count < 1:
            raise FockError(f"mode_count must be a positive integer, got {self.mode_count!r}")
        if int(self.photon_cutoff) != self.photon_cutoff or self.photon_cutoff < 0:
            raise FockError(
                f"photon_cutoff must be a non-negative integer, got {self.photon_cutoff!r}"
            )

    @property
    def dim(self) -> int:
        return math.comb(self.mode_count + self.photon_cutoff, self.photon_cutoff)

    def basis(self) -> tuple[Occupation, ...]:
        """All occupations, ordered by total photon number then reverse-lexicographically."""
        return _basis(self.mode_count, self.photon_cutoff)

    def index(self, occ: Sequence[int]) -> int:
        return _index(self.mode_count, self.photon_cutoff)[self.validate(occ)]

    def occupation(self, index: int) -> Occupation:
        if not 0 <= index < self.dim:
            raise FockError(f"basis index {index} out of range for dimension {self.dim}")
        return self.basis()[index]

    def validate(self, occ: Sequence[int]) -> Occupation:
        """Return ``occ`` as a tuple, raising :class:`FockError` if it does not fit."""
        occ = tuple(int(n) for n in occ)
        if len(occ) != self.mode_count:
            raise FockError(
                f"occupation {occ} has {len(occ)} modes, space has {self.mode_count}"
            )
        if any(n < 0 for n in occ):
            raise FockError(f"occupation {occ} has a negative photon count")
        if sum(occ) > self.photon_cutoff:
            raise FockError(
                f"occupation {occ} holds {sum(occ)} photons, cutoff is {self.photon_cutoff}"
            )
        return occ


class PureState:
    """Immutable sparse state vector.

    Args:
        space: Fock space the state lives in.
        amplitudes: mapping from occupation to complex amplitude. Missing
            occupations have amplitude zero.
        prune: amplitudes with magnitude below this are dropped.
    """

    __slots__ = ("space", "_amps", "prune")

    def __init__(
        self,
        space: FockSpace,
        amplitudes: Mapping[Sequence[int], complex],
        prune: float = DEFAULT_PRUNE,
    ):
        amps = {}
        for occ, amp in amplitudes.items():
            amp = complex(amp)
            if abs(amp) < prune:
                continue
            amps[space.validate(occ)] = amp
        self.space = space
        self.prune = prune
        self._amps = amps
        n2 = self.norm2()
        if n2 > 1 + NORM_SLACK:
            raise FockError(f"state norm^2 {n2!r} exceeds 1")

    @classmethod
    def _trusted(cls, space: FockSpace, amps: dict, prune: float = DEFAULT_PRUNE) -> PureState:
        # Internal constructor: keys are already valid tuples for ``space``.
        self = object.__new__(cls)
        self.space = space
        self.prune = prune
        self._amps = {k: v for k, v in amps.items() if abs(v) >= prune}
        return self

    @property
    def amplitudes(self) -> Mapping[Occupation, complex]:
        return MappingProxyType(self._amps)

    @property
    def mode_count(self) -> int:
        return self.space.mode_count

    def amplitude(self, occ: Sequence[int]) -> complex:
        return self._amps.get(tuple(occ), 0j)

    def support(self) -> list[Occupation]:
        """Occupations with non-zero amplitude, in basis order."""
        return sorted(self._amps, key=lambda o: (sum(o), tuple(-n for n in o)))

    def norm2(self) -> float:
        return math.fsum(abs(a) ** 2 for a in self._amps.values())

    def photon_numbers(self) -> set[int]:
        return {sum(occ) for occ in self._amps}

    def scaled(self, factor: complex) -> PureState:
        return PureState._trusted(
            self.space, {k: v * factor for k, v in self._amps.items()}, self.prune
        )

    def to_dense(self) -> np.ndarray:
        vec = np.zeros(self.space.dim, dtype=complex)
        for occ, amp in self._amps.items():
            vec[self.space.index(occ)] = amp
        return vec

    @classmethod
    def from_dense(cls, space: FockSpace, vec: np.ndarray, prune: float = DEFAULT_PRUNE) -> PureState:
        vec = np.asarray(vec, dtype=complex)
        if vec.shape != (space.dim,):
            raise FockError(f"dense vector has shape {vec.shape}, expected ({space.dim},)")
        return cls(space, dict(zip(space.basis(), vec)), prune)

    def to_json(self) -> list:
        """Serialize as a list of ``[occupation, re, im]`` in basis order."""
        return [[list(occ), self._amps[occ].real, self._amps[occ].imag] for occ in self.support()]

    @classmethod
    def from_json(cls, space: FockSpace, data: Iterable) -> PureState:
        return cls(space, {tuple(occ): complex(re, im) for occ, re, im in data})

    def __eq__(self, other):
        if not isinstance(other, PureState):
            return NotImplemented
        return self.space == other.space and self._amps == other._amps

    def __hash__(self):
        return hash((self.space, frozenset(self._amps.items())))

    def __repr__(self):
        terms = " + ".join(f"({a:.6g})|{','.join(map(str, o))}>" for o, a in
                           ((o, self._amps[o]) for o in self.support()[:6]))
        more = " + ..." if len(self._amps) > 6 else ""
        return f"PureState[{self.mode_count} modes]({terms or '0'}{more})"


def make_basis_state(space: FockSpace, occ: Sequence[int]) -> PureState:
    return PureState(space, {space.validate(occ): 1.0})


def vacuum(space: FockSpace) -> PureState:
    return make_basis_state(space, (0,) * space.mode_count)


def superpose(space: FockSpace, terms: Mapping[Sequence[int], complex]) -> PureState:
    """Build a normalized state from unnormalized amplitudes."""
    total = math.fsum(abs(complex(a)) ** 2 for a in terms.values())
    if total == 0:
        raise FockError("cannot normalize an all-zero superposition")
    scale = 1 / math.sqrt(total)
    return PureState(space, {occ: complex(a) * scale for occ, a in terms.items()})


def tensor(a: PureState, b: PureState, photon_cutoff: int | None = None) -> PureState:
    """Tensor product, with ``b``'s modes appended after ``a``'s.

    The default cutoff is the sum of the two cutoffs. A smaller explicit cutoff
    that cannot hold the combined support raises :class:`FockError`.
    """
    if photon_cutoff is None:
        photon_cutoff = a.space.photon_cutoff + b.space.photon_cutoff
    space = FockSpace(a.mode_count + b.mode_count, photon_cutoff)
    amps = {}
    for oa, va in a._amps.items():
        for ob, vb in b._amps.items():
            occ = oa + ob
            if sum(occ) > photon_cutoff:
                raise FockError(
                    f"tensor product holds {sum(occ)} photons, cutoff is {photon_cutoff}"
                )
            amps[occ] = va * vb
    return PureState._trusted(space, amps, min(a.prune, b.prune))


def append_modes(s: PureState, occ: Sequence[int]) -> PureState:
    """Append ancilla modes prepared in the basis state ``occ``."""
    occ = tuple(occ)
    return tensor(s, make_basis_state(FockSpace(len(occ), sum(occ)), occ))


def _check_same_space(a: PureState, b: PureState) -> None:
    if a.mode_count != b.mode_count:
        raise FockError(
            f"states live on different mode counts ({a.mode_count} vs {b.mode_count})"
        )


def inner_product(a: PureState, b: PureState) -> complex:
    """``<a|b>``, conjugate-linear in ``a``.

    Only the mode count has to match; the cutoffs may differ.
    """
    _check_same_space(a, b)
    small, large = (a._amps, b._amps) if len(a._amps) <= len(b._amps) else (b._amps, a._amps)
    total = 0j
    for occ in small:
        if occ in large:
            total += a._amps[occ].conjugate() * b._amps[occ]
    return total


def normalize(s: PureState) -> tuple[PureState, float]:
    """Rescale to unit norm. Returns the state and its original norm^2."""
    n2 = s.norm2()
    if n2 == 0:
        raise FockError("cannot normalize the zero state")
    return s.scaled(1 / math.sqrt(n2)), n2


def fidelity(a: PureState, b: PureState) -> float:
    """Overlap ``|<a|b>|^2`` of the two states after normalization."""
    _check_same_space(a, b)
    na, nb = a.norm2(), b.norm2()
    if na == 0 or nb == 0:
        raise FockError("fidelity is undefined for the zero state")
    return min(1.0, abs(inner_product(a, b)) ** 2 / (na * nb))


def add(a: PureState, b: PureState) -> PureState:
    """Amplitude-wise sum of two states on the same modes."""
    _check_same_space(a, b)
    amps = dict(a._amps)
    for occ, v in b._amps.items():
        amps[occ] = amps.get(occ, 0j) + v
    cutoff = max(a.space.photon_cutoff, b.space.photon_cutoff)
    return PureState(FockSpace(a.mode_count, cutoff), amps, min(a.prune, b.prune))


def permute_modes(s: PureState, order: Sequence[int]) -> PureState:
    """Return the state whose mode ``i`` is mode ``order[i]`` of ``s``."""
    order = tuple(order)
    if sorted(order) != list(range(s.mode_count)):
        raise FockError(f"{order} is not a permutation of {s.mode_count} modes")
    return PureState._trusted(
        s.space, {tuple(occ[i] for i in order): v for occ, v in s._amps.items()}, s.prune
    )


def random_state(
    space: FockSpace, rng: np.random.Generator, photons: int | None = None
) -> PureState:
    """Haar-like random normalized state, optionally restricted to one photon sector."""
    occs = [o for o in space.basis() if photons is None or sum(o) == photons]
    vec = rng.normal(size=len(occs)) + 1j * rng.normal(size=len(occs))
    vec /= np.linalg.norm(vec)
    return PureState(space, dict(zip(occs, vec)))

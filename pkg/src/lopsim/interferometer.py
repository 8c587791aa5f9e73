"""Passive linear optics acting on Fock states.

Mode matrices act on creation operators column-wise: element ``k`` sends
``a_k^dagger`` to ``sum_l U[l, k] a_l^dagger``. A circuit applying ``U1`` then
``U2`` therefore has mode matrix ``U2 @ U1``.

Beam splitter convention (angles in radians)::

    a_i^dagger -> cos(theta) a_i^dagger + e^{i phi} sin(theta) a_j^dagger
    a_j^dagger -> -e^{-i phi} sin(theta) a_i^dagger + cos(theta) a_j^dagger

so ``theta = pi/4`` is a 50:50 splitter and ``theta = 0`` the identity.

Two independent evaluation paths are provided: :func:`apply_element` folds
two-mode Fock matrices one element at a time, while :func:`apply_mode_unitary`
computes every output amplitude as a matrix permanent.
"""

from __future__ import annotations

import itertools
import json
import math
from collections import defaultdict
from collections.abc import Sequence
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .fock import FockError, FockSpace, PureState, compositions

UNITARY_TOL = 1e-10


@dataclass(frozen=True)
class BeamSplitter:
    theta: float
    phi: float
    mode_i: int
    mode_j: int

    def __post_init__(self):
        if self.mode_i == self.mode_j:
            raise FockError(f"beam splitter needs two distinct modes, got {self.mode_i} twice")
        if min(self.mode_i, self.mode_j) < 0:
            raise FockError("mode indices must be non-negative")

    @property
    def modes(self) -> tuple[int, int]:
        return (self.mode_i, self.mode_j)

    def matrix(self) -> np.ndarray:
        return beamsplitter_unitary(self.theta, self.phi)

    def inverse(self) -> BeamSplitter:
        return BeamSplitter(-self.theta, self.phi, self.mode_i, self.mode_j)

    def to_dict(self) -> dict:
        return {"kind": "beamsplitter", "modes": [self.mode_i, self.mode_j],
                "theta": self.theta, "phi": self.phi}


@dataclass(frozen=True)
class PhaseShift:
    phi: float
    mode: int

    def __post_init__(self):
        if self.mode < 0:
            raise FockError("mode indices must be non-negative")

    @property
    def modes(self) -> tuple[int]:
        return (self.mode,)

    def matrix(self) -> np.ndarray:
        return np.array([[np.exp(1j * self.phi)]])

    def inverse(self) -> PhaseShift:
        return PhaseShift(-self.phi, self.mode)

    def to_dict(self) -> dict:
        return {"kind": "phaseshift", "modes": [self.mode], "phi": self.phi}


Element = BeamSplitter | PhaseShift


def element_from_dict(d: dict) -> Element:
    kind = d.get("kind")
    if kind == "beamsplitter":
        i, j = d["modes"]
        return BeamSplitter(float(d["theta"]), float(d.get("phi", 0.0)), int(i), int(j))
    if kind == "phaseshift":
        (k,) = d["modes"]
        return PhaseShift(float(d["phi"]), int(k))
    raise FockError(f"unknown element kind {kind!r}")


def beamsplitter_unitary(theta: float, phi: float = 0.0) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array(
        [[c, -np.exp(-1j * phi) * s],
         [np.exp(1j * phi) * s, c]],
        dtype=complex,
    )


def check_unitary(u: np.ndarray, tol: float = UNITARY_TOL) -> np.ndarray:
    u = np.asarray(u, dtype=complex)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise FockError(f"mode matrix must be square, got shape {u.shape}")
    err = np.max(np.abs(u @ u.conj().T - np.eye(u.shape[0])), initial=0.0)
    if err > tol:
        raise FockError(f"matrix is not unitary (max |UU^dagger - I| = {err:.3g})")
    return u


def embed(element: Element, mode_count: int) -> np.ndarray:
    """The element's matrix embedded in the ``mode_count``-mode identity."""
    _check_modes(element.modes, mode_count)
    u = np.eye(mode_count, dtype=complex)
    idx = np.array(element.modes)
    u[np.ix_(idx, idx)] = element.matrix()
    return u


def _check_modes(modes: Sequence[int], mode_count: int) -> None:
    for k in modes:
        if not 0 <= k < mode_count:
            raise FockError(f"mode {k} out of range for {mode_count} modes")


@dataclass(frozen=True)
class OpticalCircuit:
    mode_count: int
    elements: tuple[Element, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple(self.elements))
        for e in self.elements:
            _check_modes(e.modes, self.mode_count)

    def then(self, *elements: Element) -> OpticalCircuit:
        return OpticalCircuit(self.mode_count, self.elements + elements)

    def inverse(self) -> OpticalCircuit:
        return OpticalCircuit(self.mode_count, tuple(e.inverse() for e in reversed(self.elements)))

    def mode_matrix(self) -> np.ndarray:
        return circuit_mode_matrix(self)

    def apply(self, s: PureState) -> PureState:
        """Sequential two-mode evaluation."""
        for e in self.elements:
            s = apply_element(s, e)
        return s

    def to_json(self) -> str:
        return json.dumps({"mode_count": self.mode_count,
                           "elements": [e.to_dict() for e in self.elements]})

    @classmethod
    def from_json(cls, text: str) -> OpticalCircuit:
        data = json.loads(text)
        return cls(int(data["mode_count"]), tuple(element_from_dict(d) for d in data["elements"]))


def circuit_mode_matrix(c: OpticalCircuit) -> np.ndarray:
    u = np.eye(c.mode_count, dtype=complex)
    for e in c.elements:
        u = embed(e, c.mode_count) @ u
    return u


@lru_cache(maxsize=4096)
def two_mode_fock_matrix(theta: float, phi: float, photons: int) -> np.ndarray:
    """Beam splitter action on the ``photons``-photon sector of two modes.

    Entry ``[p, q]`` is the amplitude of ``|p, N-p>`` given input ``|q, N-q>``,
    obtained by expanding the transformed creation operators binomially.
    """
    c, s = math.cos(theta), math.sin(theta)
    ei = complex(math.cos(phi), math.sin(phi))
    u_ii, u_ji = c, ei * s
    u_ij, u_jj = -s / ei, c
    n = photons
    fact = [math.factorial(k) for k in range(n + 1)]
    out = np.zeros((n + 1, n + 1), dtype=complex)
    for ni in range(n + 1):
        nj = n - ni
        norm_in = math.sqrt(fact[ni] * fact[nj])
        for p in range(ni + 1):
            # a_i^dagger^ni -> choose p factors landing in mode i
            t1 = math.comb(ni, p) * u_ii ** p * u_ji ** (ni - p)
            for q in range(nj + 1):
                t2 = math.comb(nj, q) * u_ij ** q * u_jj ** (nj - q)
                k = p + q
                out[k, ni] += t1 * t2 * math.sqrt(fact[k] * fact[n - k]) / norm_in
    out.setflags(write=False)
    return out


def apply_element(s: PureState, e: Element) -> PureState:
    """Apply one element using its exact two-mode (or one-mode) Fock action."""
    _check_modes(e.modes, s.mode_count)
    amps: dict = defaultdict(complex)
    if isinstance(e, PhaseShift):
        k = e.mode
        for occ, v in s.amplitudes.items():
            amps[occ] = v * complex(math.cos(e.phi * occ[k]), math.sin(e.phi * occ[k]))
        return PureState._trusted(s.space, dict(amps), s.prune)
    i, j = e.mode_i, e.mode_j
    for occ, v in s.amplitudes.items():
        n = occ[i] + occ[j]
        if n == 0:
            amps[occ] += v
            continue
        col = two_mode_fock_matrix(e.theta, e.phi, n)[:, occ[i]]
        base = list(occ)
        for p in range(n + 1):
            a = col[p]
            if a == 0:
                continue
            base[i], base[j] = p, n - p
            amps[tuple(base)] += a * v
    return PureState._trusted(s.space, dict(amps), s.prune)


def permanent(m: np.ndarray) -> complex:
    """Exact permanent by Ryser's formula with Gray-code subset ordering.

    Runs in ``O(2^n n)``. The empty matrix has permanent 1.
    """
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise FockError(f"permanent needs a square matrix, got shape {m.shape}")
    n = m.shape[0]
    if n == 0:
        return 1 + 0j
    if n == 1:
        return complex(m[0, 0])
    if n == 2:
        return complex(m[0, 0] * m[1, 1] + m[0, 1] * m[1, 0])
    cols = [list(map(complex, m[:, j])) for j in range(n)]
    row_sums = [0j] * n
    total = 0j
    gray = 0
    for k in range(1, 2 ** n):
        # flip the lowest set bit of k in the Gray code
        j = (k & -k).bit_length() - 1
        gray ^= 1 << j
        col = cols[j]
        if gray >> j & 1:
            for r in range(n):
                row_sums[r] += col[r]
        else:
            for r in range(n):
                row_sums[r] -= col[r]
        prod = 1 + 0j
        for r in row_sums:
            prod *= r
        # subset size parity: |S| has the parity of popcount(gray)
        if (n - gray.bit_count()) & 1:
            total -= prod
        else:
            total += prod
    return total


def _repeat_indices(occ: Sequence[int]) -> list[int]:
    return [k for k, n in enumerate(occ) for _ in range(n)]


def transition_amplitude(u: np.ndarray, occ_in: Sequence[int], occ_out: Sequence[int]) -> complex:
    """``<out| U |in>`` through the permanent of the repeated submatrix."""
    if sum(occ_in) != sum(occ_out):
        return 0j
    rows = _repeat_indices(occ_out)
    cols = _repeat_indices(occ_in)
    norm = math.prod(math.factorial(n) for n in occ_in) * math.prod(
        math.factorial(n) for n in occ_out)
    return permanent(u[np.ix_(rows, cols)]) / math.sqrt(norm)


def apply_mode_unitary(
    s: PureState, u: np.ndarray, modes: Sequence[int] | None = None
) -> PureState:
    """Apply a mode unitary through permanents.

    Args:
        s: input state.
        u: ``k x k`` unitary.
        modes: the ``k`` modes ``u`` acts on, in matrix order. Defaults to all
            modes, in which case ``u`` must match the mode count.
    """
    u = check_unitary(u)
    if modes is None:
        if u.shape[0] != s.mode_count:
            raise FockError(
                f"unitary dimension {u.shape[0]} does not match {s.mode_count} modes"
            )
        modes = tuple(range(s.mode_count))
    modes = tuple(modes)
    if len(modes) != u.shape[0] or len(set(modes)) != len(modes):
        raise FockError(f"modes {modes} do not match unitary dimension {u.shape[0]}")
    _check_modes(modes, s.mode_count)

    cache: dict[tuple, list[tuple[tuple, complex]]] = {}
    amps: dict = defaultdict(complex)
    for occ, v in s.amplitudes.items():
        sub_in = tuple(occ[k] for k in modes)
        row = cache.get(sub_in)
        if row is None:
            row = []
            for sub_out in compositions(sum(sub_in), len(modes)):
                a = transition_amplitude(u, sub_in, sub_out)
                if a != 0:
                    row.append((sub_out, a))
            cache[sub_in] = row
        base = list(occ)
        for sub_out, a in row:
            for k, n in zip(modes, sub_out):
                base[k] = n
            amps[tuple(base)] += a * v
    return PureState._trusted(s.space, dict(amps), s.prune)


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR of a complex Gaussian matrix."""
    z = (rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_circuit(mode_count: int, depth: int, rng: np.random.Generator) -> OpticalCircuit:
    """Random sequence of beam splitters and phase shifters."""
    elements: list[Element] = []
    for _ in range(depth):
        if mode_count > 1 and rng.random() < 0.7:
            i, j = rng.choice(mode_count, size=2, replace=False)
            elements.append(BeamSplitter(float(rng.uniform(-np.pi, np.pi)),
                                         float(rng.uniform(-np.pi, np.pi)), int(i), int(j)))
        else:
            elements.append(PhaseShift(float(rng.uniform(-np.pi, np.pi)),
                                       int(rng.integers(mode_count))))
    return OpticalCircuit(mode_count, tuple(elements))


def permanent_naive(m: np.ndarray) -> complex:
    """Permanent as a sum over all permutations; reference oracle for small matrices."""
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise FockError(f"permanent needs a square matrix, got shape {m.shape}")
    n = m.shape[0]
    return complex(sum(
        math.prod(m[i, p[i]] for i in range(n)) for p in itertools.permutations(range(n))
    ))

"""Fock-space algebra for a few photons spread over a handful of modes.

Basis kets are occupation tuples ``(n_0, ..., n_{M-1})`` ordered
lexicographically descending, so for two photons in two modes the order is
``|2,0>, |1,1>, |0,2>``.

Mode transforms follow the column convention: an input creation operator is
substituted as ``a_in_i^dag -> sum_o U[o, i] a_out_o^dag``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .exceptions import IndexOutOfRange, NonUnitaryInput

UNITARY_ATOL = 1e-10


@lru_cache(maxsize=None)
def _compositions(modes: int, photons: int) -> tuple[tuple[int, ...], ...]:
    if modes == 1:
        return ((photons,),)
    out = []
    for first in range(photons, -1, -1):
        for rest in _compositions(modes - 1, photons - first):
            out.append((first,) + rest)
    return tuple(out)


def basis_states(mode_count: int, photon_number: int) -> list[tuple[int, ...]]:
    """All occupation tuples of ``photon_number`` photons in ``mode_count`` modes.

    >>> basis_states(2, 2)
    [(2, 0), (1, 1), (0, 2)]
    """
    if mode_count < 1 or photon_number < 0:
        raise ValueError("need mode_count >= 1 and photon_number >= 0")
    return list(_compositions(mode_count, photon_number))


@lru_cache(maxsize=None)
def _index(mode_count: int, photon_number: int) -> dict[tuple[int, ...], int]:
    return {s: k for k, s in enumerate(_compositions(mode_count, photon_number))}


def state_index(occupations: Sequence[int]) -> int:
    occ = tuple(int(n) for n in occupations)
    return _index(len(occ), sum(occ))[occ]


@dataclass(frozen=True)
class FockVector:
    """State vector over the canonical basis of ``basis_states(mode_count, photon_number)``."""

    amplitudes: np.ndarray
    mode_count: int
    photon_number: int

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        dim = len(_compositions(self.mode_count, self.photon_number))
        if amps.shape != (dim,):
            raise ValueError(f"expected {dim} amplitudes, got shape {amps.shape}")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def from_dict(cls, amplitudes: dict, mode_count: int) -> "FockVector":
        """Build from ``{occupation tuple: amplitude}``."""
        photons = {sum(k) for k in amplitudes}
        if len(photons) != 1:
            raise ValueError("all kets must carry the same photon number")
        n = photons.pop()
        vec = np.zeros(len(_compositions(mode_count, n)), dtype=complex)
        for occ, amp in amplitudes.items():
            if len(occ) != mode_count:
                raise ValueError(f"ket {occ} does not have {mode_count} modes")
            vec[state_index(occ)] += amp
        return cls(vec, mode_count, n)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def density(self) -> "FockDensity":
        a = self.amplitudes
        return FockDensity(np.outer(a, a.conj()), self.mode_count, self.photon_number)


@dataclass(frozen=True)
class FockDensity:
    matrix: np.ndarray
    mode_count: int
    photon_number: int

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=complex)
        dim = len(_compositions(self.mode_count, self.photon_number))
        if mat.shape != (dim, dim):
            raise ValueError(f"expected a {dim}x{dim} matrix, got {mat.shape}")
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)

    def evolve(self, lifted: np.ndarray) -> "FockDensity":
        return FockDensity(lifted @ self.matrix @ lifted.conj().T, self.mode_count, self.photon_number)


def permanent(a: np.ndarray) -> complex:
    """Permanent by direct expansion over permutations; exact, meant for n <= 6."""
    a = np.asarray(a)
    n = a.shape[0]
    if n == 0:
        return 1.0 + 0j
    total = 0j
    rows = range(n)
    for perm in itertools.permutations(range(n)):
        total += np.prod(a[rows, perm])
    return complex(total)


def check_unitary(u: np.ndarray, atol: float = UNITARY_ATOL) -> np.ndarray:
    u = np.asarray(u, dtype=complex)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise NonUnitaryInput(f"mode transform must be square, got shape {u.shape}")
    err = np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0])))
    if err > atol:
        raise NonUnitaryInput(f"matrix is not unitary (max deviation {err:.3g})")
    return u


def _repeat_index(occ: tuple[int, ...]) -> list[int]:
    return [mode for mode, n in enumerate(occ) for _ in range(n)]


def lift_unitary(u, photon_number: int) -> np.ndarray:
    """Matrix of the mode transform ``u`` acting on the ``photon_number``-photon space.

    Entry ``<m|U_F|n>`` is ``Per(U[m, n]) / sqrt(prod m_i! prod n_j!)`` where
    ``U[m, n]`` repeats row ``o`` ``m_o`` times and column ``i`` ``n_i`` times.
    ``u`` may be a raw array or anything exposing a ``matrix`` attribute.
    """
    u = check_unitary(getattr(u, "matrix", u))
    if photon_number < 1:
        raise ValueError("photon_number must be >= 1")
    basis = _compositions(u.shape[0], photon_number)
    idx = [_repeat_index(s) for s in basis]
    norms = [math.prod(math.factorial(n) for n in s) for s in basis]
    dim = len(basis)
    out = np.empty((dim, dim), dtype=complex)
    for r in range(dim):
        for c in range(dim):
            sub = u[np.ix_(idx[r], idx[c])]
            out[r, c] = permanent(sub) / math.sqrt(norms[r] * norms[c])
    return out


def _annihilate(occ: tuple[int, ...], modes: Sequence[int]) -> tuple[float, tuple[int, ...] | None]:
    # applies a_{modes[0]} first, then a_{modes[1]}, ...
    coeff = 1.0
    cur = list(occ)
    for m in modes:
        if cur[m] == 0:
            return 0.0, None
        coeff *= math.sqrt(cur[m])
        cur[m] -= 1
    return coeff, tuple(cur)


def normally_ordered_operator(
    mode_count: int,
    photon_number: int,
    create_modes: Sequence[int],
    annihilate_modes: Sequence[int],
) -> np.ndarray:
    """Matrix of ``a+_{i1}...a+_{ik} a_{jk}...a_{j1}`` restricted to fixed photon number.

    Only the photon-number-conserving case (equal operator counts) is
    supported, which is all that correlation rates need.
    """
    create_modes = list(create_modes)
    annihilate_modes = list(annihilate_modes)
    for m in create_modes + annihilate_modes:
        if not 0 <= m < mode_count:
            raise IndexOutOfRange(f"mode index {m} outside 0..{mode_count - 1}")
    if len(create_modes) != len(annihilate_modes):
        raise ValueError("create and annihilate lists must have equal length")
    basis = _compositions(mode_count, photon_number)
    dim = len(basis)
    # <m| A^dag B |n> = <A m | B n>, with A = a_{ik}...a_{i1}
    left = [_annihilate(s, create_modes) for s in basis]
    right = [_annihilate(s, annihilate_modes) for s in basis]
    out = np.zeros((dim, dim))
    for r, (cl, sl) in enumerate(left):
        if sl is None:
            continue
        for c, (cr, sr) in enumerate(right):
            if sr == sl:
                out[r, c] = cl * cr
    return out


def normally_ordered_expectation(rho: FockDensity, create_modes, annihilate_modes) -> complex:
    """``Tr[rho a+_{i1}...a+_{ik} a_{jk}...a_{j1}]``."""
    op = normally_ordered_operator(rho.mode_count, rho.photon_number, create_modes, annihilate_modes)
    return complex(np.trace(rho.matrix @ op))

"""Two-photon two-path density matrices and a few reference states.

``PathDensityMatrix`` lives in the basis ``|2,0>, |1,1>, |0,2>``.
``VisDensityMatrix`` adds the antisymmetric one-photon-per-path state of two
distinguishable photons and keeps it block-diagonal: the 4x4 matrix is over
``|2,0>, psi+, |0,2>, psi-``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PATH_BASIS = ((2, 0), (1, 1), (0, 2))
HERMITIAN_ATOL = 1e-10


@dataclass(frozen=True)
class PathDensityMatrix:
    matrix: np.ndarray

    def __post_init__(self):
        mat = np.array(self.matrix, dtype=complex)
        if mat.shape != (3, 3):
            raise ValueError(f"path density matrix must be 3x3, got {mat.shape}")
        if np.max(np.abs(mat - mat.conj().T)) > HERMITIAN_ATOL:
            raise ValueError("path density matrix is not Hermitian")
        mat = 0.5 * (mat + mat.conj().T)
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)

    @classmethod
    def from_ket(cls, ket) -> "PathDensityMatrix":
        ket = np.asarray(ket, dtype=complex)
        return cls(np.outer(ket, ket.conj()))

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)

    def is_physical(self, atol: float = 1e-9) -> bool:
        return abs(self.trace - 1.0) <= atol and self.eigenvalues().min() >= -atol

    def normalized(self) -> "PathDensityMatrix":
        return PathDensityMatrix(self.matrix / self.trace)

    def to_vis(self) -> "VisDensityMatrix":
        """Embedding with the |1,1> component read as psi+ and no psi- weight."""
        return VisDensityMatrix(self.matrix, 0.0)


@dataclass(frozen=True)
class VisDensityMatrix:
    sym_block: np.ndarray
    antisym_pop: float

    def __post_init__(self):
        sym = np.array(self.sym_block, dtype=complex)
        if sym.shape != (3, 3):
            raise ValueError(f"symmetric block must be 3x3, got {sym.shape}")
        if np.max(np.abs(sym - sym.conj().T)) > HERMITIAN_ATOL:
            raise ValueError("symmetric block is not Hermitian")
        sym = 0.5 * (sym + sym.conj().T)
        sym.setflags(write=False)
        object.__setattr__(self, "sym_block", sym)
        object.__setattr__(self, "antisym_pop", float(self.antisym_pop))

    @property
    def matrix(self) -> np.ndarray:
        out = np.zeros((4, 4), dtype=complex)
        out[:3, :3] = self.sym_block
        out[3, 3] = self.antisym_pop
        return out

    @property
    def trace(self) -> float:
        return float(np.trace(self.sym_block).real) + self.antisym_pop

    def is_physical(self, atol: float = 1e-9) -> bool:
        return (
            abs(self.trace - 1.0) <= atol
            and np.linalg.eigvalsh(self.sym_block).min() >= -atol
            and -atol <= self.antisym_pop <= 1.0 + atol
        )

    def collapse(self) -> PathDensityMatrix:
        """Path-only view: psi+ and psi- both show up as |1,1> population."""
        mat = np.array(self.sym_block)
        mat[1, 1] += self.antisym_pop
        return PathDensityMatrix(mat)


def noon_ket(sign: int = -1) -> np.ndarray:
    """``(|2,0> + sign |0,2>) / sqrt(2)``."""
    return np.array([1.0, 0.0, sign], dtype=complex) / np.sqrt(2.0)


PSI_2002 = noon_ket(-1)


def noon_state(sign: int = -1) -> PathDensityMatrix:
    return PathDensityMatrix.from_ket(noon_ket(sign))


def mixed_noon() -> PathDensityMatrix:
    """Incoherent 50/50 mixture of |2,0> and |0,2>."""
    return PathDensityMatrix(np.diag([0.5, 0.0, 0.5]))


def maximally_mixed() -> PathDensityMatrix:
    return PathDensityMatrix(np.eye(3) / 3.0)


def tilted_noon(theta: float, chi: float = np.pi / 4) -> PathDensityMatrix:
    """``cos(theta)/sqrt2 |2,0> + sin(theta) e^{i chi} |1,1> - cos(theta)/sqrt2 |0,2>``."""
    c = np.cos(theta) / np.sqrt(2.0)
    ket = np.array([c, np.sin(theta) * np.exp(1j * chi), -c])
    return PathDensityMatrix.from_ket(ket)


FIXTURES = {
    "ideal": noon_state,
    "mixed": mixed_noon,
    "dashed-theta=0.2": lambda: tilted_noon(0.2),
}


def fixture(name: str) -> PathDensityMatrix:
    try:
        return FIXTURES[name]()
    except KeyError:
        raise KeyError(f"unknown state fixture {name!r}; choose from {sorted(FIXTURES)}") from None


def random_density(rng, rank: int = 3) -> PathDensityMatrix:
    """Ginibre-distributed 3x3 density matrix of the given rank."""
    g = rng.standard_normal((3, rank)) + 1j * rng.standard_normal((3, rank))
    rho = g @ g.conj().T
    return PathDensityMatrix(rho / np.trace(rho).real)

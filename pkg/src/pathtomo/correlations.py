"""Forward model from a two-photon path state to detector rates.

Every rate is linear in the input density matrix, so each one is represented
by a Hermitian observable ``W`` with ``rate = Tr[rho W]``. Paths 0 and 1 are
detected directly (no analysis stage); paths 3, 4 and 5 are the outputs of
the analysis interferometer. Auto-correlations ``R_ii`` are measured behind a
balanced tap splitter, which contributes a factor 1/2.

Observables of the analysis stage depend on ``phi`` as trigonometric
polynomials of degree at most two, so they are cached as five Fourier
harmonics per configuration and evaluated at any phase in closed form.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterable, Sequence

import numpy as np

from .exceptions import DivisionByZeroSingles, UnknownLabel
from .fock import basis_states, lift_unitary, normally_ordered_operator, state_index
from .optics import OUTPUT_LABELS, SetupConfig, build_analysis_setup
from .states import PathDensityMatrix, VisDensityMatrix

DIRECT_LABELS = {"path0": 0, "path1": 1}
STAGE_LABELS = OUTPUT_LABELS

# rate kinds in record files and the detector pair behind each
KIND_PAIRS = {
    "R00": ("path0", "path0"),
    "R01": ("path0", "path1"),
    "R11": ("path1", "path1"),
    "R33": ("path3", "path3"),
    "R34": ("path3", "path4"),
    "R35": ("path3", "path5"),
    "R45": ("path4", "path5"),
}
STATIC_KINDS = ("R00", "R01", "R11")
PHASE_KINDS = ("R33", "R34", "R35", "R45")
# ordering of the minimal complete set
COMP_LAYOUT = (
    ("R00", None), ("R01", None), ("R11", None),
    ("R33", 0), ("R34", 0), ("R45", 0),
    ("R33", 1), ("R34", 1), ("R45", 1),
)

NEGATIVE_CLAMP = 1e-12
SINGLES_FLOOR = 1e-12
HARMONICS = np.arange(-2, 3)


def _stage(i: str, j: str) -> str:
    if i in DIRECT_LABELS and j in DIRECT_LABELS:
        return "direct"
    if i in STAGE_LABELS and j in STAGE_LABELS:
        return "analysis"
    for lab in (i, j):
        if lab not in DIRECT_LABELS and lab not in STAGE_LABELS:
            raise UnknownLabel(f"unknown detector label {lab!r}")
    raise ValueError(f"{i} and {j} are not detected in the same configuration")


def _detector_operator(mode_count: int, i: int, j: int | None) -> np.ndarray:
    # j None -> singles; i == j -> auto with the tap factor
    if j is None:
        return normally_ordered_operator(mode_count, 2, [i], [i])
    op = normally_ordered_operator(mode_count, 2, [i, j], [j, i])
    return 0.5 * op if i == j else op


@lru_cache(maxsize=None)
def _stage_embedding() -> np.ndarray:
    # |2,0>, |1,1>, |0,2> on path0/path1 with vacuum everywhere else
    cols = [state_index(occ + (0,) * 4) for occ in [(2, 0), (1, 1), (0, 2)]]
    dim = len(basis_states(6, 2))
    emb = np.zeros((dim, 3))
    emb[cols, range(3)] = 1.0
    return emb


def _path_observable(cfg: SetupConfig, phi: float, i: str, j: str | None) -> np.ndarray:
    stage = _stage(i, i if j is None else j)
    if stage == "direct":
        return _detector_operator(2, DIRECT_LABELS[i], None if j is None else DIRECT_LABELS[j]).astype(complex)
    u = lift_unitary(build_analysis_setup(cfg, phi), 2)
    op = _detector_operator(6, STAGE_LABELS[i], None if j is None else STAGE_LABELS[j])
    emb = _stage_embedding()
    w = emb.T @ u.conj().T @ op @ u @ emb
    return 0.5 * (w + w.conj().T)


def fourier_harmonics(func: Callable[[float], np.ndarray]) -> np.ndarray:
    """Harmonics ``k = -2..2`` of a matrix-valued trig polynomial of degree <= 2."""
    phis = 2 * np.pi * np.arange(5) / 5
    samples = np.stack([func(p) for p in phis])
    phase = np.exp(-1j * np.outer(HARMONICS, phis))
    return np.einsum("ks,s...->k...", phase, samples) / 5


def evaluate_harmonics(harmonics: np.ndarray, phis) -> np.ndarray:
    phis = np.atleast_1d(np.asarray(phis, dtype=float))
    phase = np.exp(1j * np.outer(phis, HARMONICS))
    out = np.einsum("pk,k...->p...", phase, harmonics)
    return 0.5 * (out + np.swapaxes(out, -1, -2).conj())


@lru_cache(maxsize=4096)
def _path_harmonics(cfg: SetupConfig, i: str, j: str | None) -> np.ndarray:
    return fourier_harmonics(lambda p: _path_observable(cfg, p, i, j))


def rate_observables(cfg: SetupConfig, kind: str, phis, part: str = "coincidence") -> np.ndarray:
    """Stack of 3x3 observables for ``kind`` at each phase.

    ``part`` is ``"coincidence"`` (auto rates include the tap factor),
    ``"singles_a"`` or ``"singles_b"`` for the two detectors of the pair.
    """
    a, b = KIND_PAIRS[kind]
    if part == "coincidence":
        h = _path_harmonics(cfg, a, b)
    elif part == "singles_a":
        h = _path_harmonics(cfg, a, None)
    elif part == "singles_b":
        h = _path_harmonics(cfg, b, None)
    else:
        raise ValueError(f"unknown part {part!r}")
    return evaluate_harmonics(h, phis)


def _matrix(rho) -> np.ndarray:
    if isinstance(rho, VisDensityMatrix):
        raise TypeError("use distinguishability.predict_rate_vis for a VisDensityMatrix")
    return np.asarray(getattr(rho, "matrix", rho), dtype=complex)


def _expect(rho, w: np.ndarray) -> float:
    value = float(np.real(np.trace(_matrix(rho) @ w)))
    if value < 0:
        if value < -1e-9:
            raise ValueError(f"negative rate {value:.3g}: input state is not physical")
        value = 0.0
    return value


def coincidence_rate(rho_in, cfg: SetupConfig, phi: float, i: str, j: str) -> float:
    """``Tr[rho_out a+_i a+_j a_j a_i]`` for two different detectors."""
    if i == j:
        raise ValueError("coincidence_rate needs two different detectors; use auto_rate")
    _stage(i, j)
    return _expect(rho_in, _path_harmonics_eval(cfg, phi, i, j))


def auto_rate(rho_in, cfg: SetupConfig, phi: float, i: str) -> float:
    """Half of ``Tr[rho_out a+_i a+_i a_i a_i]``, the two-detector rate behind a 50/50 tap."""
    _stage(i, i)
    return _expect(rho_in, _path_harmonics_eval(cfg, phi, i, i))


def singles_rate(rho_in, cfg: SetupConfig, phi: float, j: str) -> float:
    _stage(j, j)
    return _expect(rho_in, _path_harmonics_eval(cfg, phi, j, None))


def _path_harmonics_eval(cfg, phi, i, j):
    return evaluate_harmonics(_path_harmonics(cfg, i, j), phi)[0]


def normalized_rate(rho_in, cfg: SetupConfig, phi: float, i: str, j: str) -> float:
    """Coincidences over the product of singles, as given by side-peak normalization."""
    si = singles_rate(rho_in, cfg, phi, i)
    sj = singles_rate(rho_in, cfg, phi, j)
    if min(si, sj) < SINGLES_FLOOR:
        raise DivisionByZeroSingles(f"singles rate vanishes on {i if si < sj else j}")
    if i == j:
        return auto_rate(rho_in, cfg, phi, i) / (0.5 * si * sj)
    return coincidence_rate(rho_in, cfg, phi, i, j) / (si * sj)


def kind_rate(rho_in, cfg: SetupConfig, kind: str, phi: float | None, normalized: bool = False) -> float:
    a, b = KIND_PAIRS[kind]
    phi = 0.0 if phi is None else phi
    if normalized:
        return normalized_rate(rho_in, cfg, phi, a, b)
    if a == b:
        return auto_rate(rho_in, cfg, phi, a)
    return coincidence_rate(rho_in, cfg, phi, a, b)


def predict_R_comp(rho_in, cfg: SetupConfig, phi1: float, phi2: float) -> np.ndarray:
    """The nine rates of the minimal complete set, in its fixed order."""
    phis = (phi1, phi2)
    return np.array([
        kind_rate(rho_in, cfg, kind, None if slot is None else phis[slot])
        for kind, slot in COMP_LAYOUT
    ])


@dataclass(frozen=True)
class RatePrediction:
    pair: tuple[str, str]
    phase: float | None
    value: float

    def __post_init__(self):
        if not np.isfinite(self.value) or self.value < 0:
            raise ValueError(f"rate must be finite and non-negative, got {self.value}")


def rate_curves(
    rho_in,
    cfg: SetupConfig,
    phis: Sequence[float],
    kinds: Iterable[str] = tuple(KIND_PAIRS),
    normalized: bool = False,
) -> dict[str, np.ndarray]:
    """Rates of each kind over a phase sweep (static kinds repeat their value)."""
    rho = _matrix(rho_in)
    phis = np.asarray(phis, dtype=float)
    out = {}
    for kind in kinds:
        vals = np.real(np.einsum("ij,pji->p", rho, rate_observables(cfg, kind, phis)))
        if normalized:
            sa = np.real(np.einsum("ij,pji->p", rho, rate_observables(cfg, kind, phis, "singles_a")))
            sb = np.real(np.einsum("ij,pji->p", rho, rate_observables(cfg, kind, phis, "singles_b")))
            denom = sa * sb * (0.5 if KIND_PAIRS[kind][0] == KIND_PAIRS[kind][1] else 1.0)
            if np.any(denom < SINGLES_FLOOR):
                raise DivisionByZeroSingles(f"singles rate vanishes for {kind}")
            vals = vals / denom
        out[kind] = np.where((vals < 0) & (vals > -NEGATIVE_CLAMP), 0.0, vals)
    return out


def predict(rho_in, cfg: SetupConfig, kind: str, phi: float | None = None, normalized: bool = False) -> RatePrediction:
    value = kind_rate(rho_in, cfg, kind, phi, normalized)
    return RatePrediction(KIND_PAIRS[kind], None if kind in STATIC_KINDS else phi, value)

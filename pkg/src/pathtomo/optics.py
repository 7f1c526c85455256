"""Mode transforms for beam splitters, phase shifters and losses.

Losses are beam splitters that couple a mode to a fresh vacuum ancilla, so
every compiled network stays unitary. A beam splitter of reflectivity ``R``
acts on its two modes as the real orthogonal matrix
``[[sqrt(T), sqrt(R)], [sqrt(R), -sqrt(T)]]``.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .exceptions import DuplicateAncilla, UnknownMode
from .fock import FockVector, check_unitary, lift_unitary
from .states import PathDensityMatrix

PATH_MODES = ("path0", "path1", "path2")
LOSS_MODES = ("loss0", "loss1", "loss2")
# after the analysis stage, the three path positions carry output paths 3, 4, 5
OUTPUT_LABELS = {"path3": 0, "path4": 1, "path5": 2}


@dataclass(frozen=True)
class ModeTransform:
    matrix: np.ndarray
    mode_labels: tuple[str, ...]

    def __post_init__(self):
        mat = check_unitary(self.matrix)
        labels = tuple(self.mode_labels)
        if len(labels) != mat.shape[0]:
            raise ValueError(f"{len(labels)} labels for a {mat.shape[0]}-mode transform")
        if len(set(labels)) != len(labels):
            raise ValueError(f"mode labels are not unique: {labels}")
        mat = mat.copy()
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)
        object.__setattr__(self, "mode_labels", labels)

    def __matmul__(self, other: "ModeTransform") -> "ModeTransform":
        if self.mode_labels != other.mode_labels:
            raise ValueError("cannot multiply transforms over different modes")
        return ModeTransform(self.matrix @ other.matrix, self.mode_labels)

    def index(self, label: str) -> int:
        try:
            return self.mode_labels.index(label)
        except ValueError:
            raise UnknownMode(label) from None


@dataclass(frozen=True)
class Element:
    """One optical element. ``kind`` is ``beam_splitter``, ``phase_shifter`` or ``loss``.

    ``parameter`` is the reflectivity, the phase in radians, or the
    transmission efficiency respectively. A loss element may name its vacuum
    ancilla; otherwise :func:`compose` assigns one.
    """

    kind: str
    target_modes: tuple[str, ...]
    parameter: float
    ancilla: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "target_modes", tuple(self.target_modes))
        wanted = {"beam_splitter": 2, "phase_shifter": 1, "loss": 1}
        if self.kind not in wanted:
            raise ValueError(f"unknown element kind {self.kind!r}")
        if len(self.target_modes) != wanted[self.kind]:
            raise ValueError(f"{self.kind} needs {wanted[self.kind]} target mode(s)")
        if self.kind == "beam_splitter" and not 0.0 <= self.parameter <= 1.0:
            raise ValueError(f"reflectivity {self.parameter} outside [0, 1]")
        if self.kind == "loss" and not 0.0 <= self.parameter <= 1.0:
            raise ValueError(f"efficiency {self.parameter} outside [0, 1]")


def splitter_matrix(reflectivity: float) -> np.ndarray:
    r = np.sqrt(reflectivity)
    t = np.sqrt(1.0 - reflectivity)
    return np.array([[t, r], [r, -t]], dtype=complex)


def beam_splitter(a: str, b: str, reflectivity: float) -> Element:
    return Element("beam_splitter", (a, b), reflectivity)


def phase_shifter(mode: str, phi: float) -> Element:
    return Element("phase_shifter", (mode,), phi)


def loss(mode: str, efficiency: float, ancilla: str | None = None) -> Element:
    return Element("loss", (mode,), efficiency, ancilla)


def element_transform(element: Element, all_modes: Sequence[str]) -> ModeTransform:
    """Transform of a single element over ``all_modes``.

    For a loss element the ancilla is appended to the returned mode labels.
    """
    labels = list(all_modes)
    for m in element.target_modes:
        if m not in labels:
            raise UnknownMode(m)
    if element.kind == "loss":
        anc = element.ancilla or f"{element.target_modes[0]}_vac"
        if anc in labels:
            raise DuplicateAncilla(anc)
        labels.append(anc)
    u = np.eye(len(labels), dtype=complex)
    if element.kind == "beam_splitter":
        i, j = (labels.index(m) for m in element.target_modes)
        u[np.ix_([i, j], [i, j])] = splitter_matrix(element.parameter)
    elif element.kind == "phase_shifter":
        i = labels.index(element.target_modes[0])
        u[i, i] = np.exp(1j * element.parameter)
    else:
        i = labels.index(element.target_modes[0])
        u[np.ix_([i, -1], [i, -1])] = splitter_matrix(1.0 - element.parameter)
    return ModeTransform(u, tuple(labels))


def _pad(u: np.ndarray, size: int) -> np.ndarray:
    out = np.eye(size, dtype=complex)
    out[: u.shape[0], : u.shape[1]] = u
    return out


def compose(elements: Sequence[Element], base_modes: Sequence[str]) -> ModeTransform:
    """Product of the element transforms, later elements multiplying on the left.

    Loss ancillas are appended after ``base_modes`` in declaration order.
    """
    labels = list(base_modes)
    total = np.eye(len(labels), dtype=complex)
    for k, el in enumerate(elements):
        if el.kind == "loss" and el.ancilla is None:
            el = Element(el.kind, el.target_modes, el.parameter, f"anc{k}")
        step = element_transform(el, labels)
        if len(step.mode_labels) > len(labels):
            labels = list(step.mode_labels)
            total = _pad(total, len(labels))
        total = step.matrix @ total
    return ModeTransform(total, tuple(labels))


@dataclass(frozen=True)
class SetupConfig:
    """Parameters of the HOM source splitter and the analysis interferometer.

    ``eta0``, ``eta1`` and ``eta2`` are the transmissions of paths 0, 1 and 5.
    ``phase_arm`` selects where the drifting phase sits: ``"upper"`` is the
    free-space arm between BS1 and BS2, ``"lower"`` is path 0.
    """

    hom_reflectivity: float = 0.5
    bs1_reflectivity: float = 0.5
    bs2_reflectivity: float = 0.5
    eta0: float = 1.0
    eta1: float = 1.0
    eta2: float = 1.0
    phase_arm: str = "upper"

    _json_keys = {
        "homReflectivity": "hom_reflectivity",
        "bs1Reflectivity": "bs1_reflectivity",
        "bs2Reflectivity": "bs2_reflectivity",
        "eta0": "eta0",
        "eta1": "eta1",
        "eta2": "eta2",
        "phaseArm": "phase_arm",
    }

    def __post_init__(self):
        for name in ("hom_reflectivity", "bs1_reflectivity", "bs2_reflectivity"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ValueError(f"{name}={v} must lie in (0, 1)")
        for name in ("eta0", "eta1", "eta2"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise ValueError(f"{name}={v} must lie in (0, 1]")
        if self.phase_arm not in ("upper", "lower"):
            raise ValueError(f"phase_arm must be 'upper' or 'lower', got {self.phase_arm!r}")

    @classmethod
    def from_dict(cls, data: dict) -> "SetupConfig":
        unknown = set(data) - set(cls._json_keys)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**{cls._json_keys[k]: v for k, v in data.items()})

    def to_dict(self) -> dict:
        values = asdict(self)
        return {k: values[attr] for k, attr in self._json_keys.items()}

    @classmethod
    def from_json(cls, text: str) -> "SetupConfig":
        return cls.from_dict(json.loads(text))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def analysis_elements(cfg: SetupConfig, phi: float) -> list[Element]:
    p0, p1, p2 = PATH_MODES
    arm = p1 if cfg.phase_arm == "upper" else p0
    return [
        loss(p0, cfg.eta0, LOSS_MODES[0]),
        loss(p1, cfg.eta1, LOSS_MODES[1]),
        beam_splitter(p1, p2, cfg.bs1_reflectivity),
        loss(p2, cfg.eta2, LOSS_MODES[2]),
        phase_shifter(arm, phi),
        beam_splitter(p0, p1, cfg.bs2_reflectivity),
    ]


def build_analysis_setup(cfg: SetupConfig, phi: float) -> ModeTransform:
    """Compiled transform of the tomography interferometer at phase ``phi``.

    Modes are ``path0, path1, path2, loss0, loss1, loss2``. After the
    transform, positions 0, 1 and 2 hold output paths 3, 4 and 5.
    """
    return compose(analysis_elements(cfg, phi), PATH_MODES)


def build_hom_source(hom_reflectivity: float) -> PathDensityMatrix:
    """Two single photons, one per input, after the HOM splitter."""
    if not 0.0 < hom_reflectivity < 1.0:
        raise ValueError("hom_reflectivity must lie in (0, 1)")
    u = lift_unitary(splitter_matrix(hom_reflectivity), 2)
    psi = u @ FockVector.from_dict({(1, 1): 1.0}, 2).amplitudes
    return PathDensityMatrix(np.outer(psi, psi.conj()))

"""Synthetic acquisition campaigns.

The analysis interferometer is left free-running: its phase performs a
Gaussian random walk whose diffusion makes the mean first passage of 2 pi
take ``drift_seconds``. Every ``probe_seconds`` the phase is read from the
single-photon intensity on path 3 with one HOM input blocked. That reading
only gives ``cos(phi)``, so in ``"experimental"`` mode phases are folded to
``[0, pi]`` before binning; ``"truth"`` mode bins the true phase over
``[0, 2 pi)``.

Counts are Poisson. Each record divides the zero-delay peak by the mean of
``side_peaks`` side peaks, whose expectation is the product of singles.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .correlations import KIND_PAIRS, PHASE_KINDS, STATIC_KINDS
from .distinguishability import vis_observable, _as_vis_matrix
from .exceptions import CalibrationRange, EmptyBin
from .optics import SetupConfig, build_analysis_setup, splitter_matrix
from .records import MeasurementRecord
from .validation import check_config, check_random_state

log = logging.getLogger(__name__)

TWO_PI = 2 * np.pi


@dataclass(frozen=True)
class ExperimentPlan:
    duration_seconds: float = 36_000.0
    probe_seconds: float = 10.0
    drift_seconds: float = 600.0
    diffusion: float | None = None  # rad^2/s; None derives it from drift_seconds
    pulse_rate_hz: float = 82e6
    flux_per_pulse: float = 1e-7
    static_seconds: float = 1800.0
    bin_count: int = 20
    side_peaks: int = 4
    phase_mode: str = "experimental"
    initial_phase: float | None = None
    seed: int | None = 0

    def __post_init__(self):
        for name in ("duration_seconds", "probe_seconds", "drift_seconds", "pulse_rate_hz",
                     "flux_per_pulse", "static_seconds"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.diffusion is not None and self.diffusion < 0:
            raise ValueError("diffusion must be non-negative")
        if self.bin_count < 2:
            raise ValueError("bin_count must be at least 2")
        if self.side_peaks < 1:
            raise ValueError("side_peaks must be at least 1")
        if self.phase_mode not in ("experimental", "truth"):
            raise ValueError(f"phase_mode must be 'experimental' or 'truth', got {self.phase_mode!r}")

    @property
    def diffusion_rate(self) -> float:
        """Phase variance per second.

        For a walk with variance ``D t``, the mean exit time from
        ``(-2 pi, 2 pi)`` is ``(2 pi)^2 / D``.
        """
        if self.diffusion is not None:
            return self.diffusion
        return TWO_PI**2 / self.drift_seconds

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentPlan":
        names = {f for f in cls.__dataclass_fields__}
        camel = {_camel(f): f for f in names}
        kwargs = {}
        for k, v in data.items():
            key = camel.get(k, k)
            if key not in names:
                raise ValueError(f"unknown plan key {k!r}")
            kwargs[key] = v
        return cls(**kwargs)

    def to_dict(self) -> dict:
        return {_camel(k): v for k, v in asdict(self).items()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _camel(name: str) -> str:
    head, *rest = name.split("_")
    return head + "".join(w.title() for w in rest)


@dataclass(frozen=True)
class PhaseTrace:
    times: np.ndarray
    phases: np.ndarray  # unwrapped
    step_seconds: float

    @property
    def duration(self) -> float:
        return len(self.times) * self.step_seconds


def generate_phase_trace(plan: ExperimentPlan) -> PhaseTrace:
    """Seeded random walk of the interferometer phase, one sample per probe."""
    rng = np.random.default_rng(plan.seed)
    n = int(round(plan.duration_seconds / plan.probe_seconds))
    start = rng.uniform(0, TWO_PI) if plan.initial_phase is None else plan.initial_phase
    steps = rng.normal(0.0, math.sqrt(plan.diffusion_rate * plan.probe_seconds), n - 1)
    phases = start + np.concatenate([[0.0], np.cumsum(steps)])
    return PhaseTrace(np.arange(n) * plan.probe_seconds, phases, plan.probe_seconds)


def shutter_intensity(cfg: SetupConfig, phi) -> np.ndarray:
    """Single-photon detection probability on path 3 with the second HOM input blocked."""
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    photon = splitter_matrix(cfg.hom_reflectivity)[:, 0]  # one photon on HOM input 0
    out = []
    for p in phi:
        u = build_analysis_setup(cfg, p).matrix
        out.append(abs(u[0, :2] @ photon) ** 2)
    return np.array(out)


def estimate_phase_from_shutter(intensity, i_min: float, i_max: float, tolerance: float = 0.05):
    """Phase in ``[0, pi]`` from an intensity between its calibrated extremes.

    Readings up to ``tolerance * (i_max - i_min)`` outside the range are
    clipped; anything further raises :class:`CalibrationRange`.
    """
    if not i_min < i_max:
        raise ValueError("need i_min < i_max")
    val = np.asarray(intensity, dtype=float)
    pad = tolerance * (i_max - i_min)
    if np.any(val < i_min - pad) or np.any(val > i_max + pad):
        raise CalibrationRange("intensity outside the calibrated range")
    c = np.clip(2.0 * (val - i_min) / (i_max - i_min) - 1.0, -1.0, 1.0)
    out = np.arccos(c)
    return float(out) if out.ndim == 0 else out


def fold_phase(phi):
    """Map phases onto ``[0, pi]`` as seen by a ``cos(phi)`` readout."""
    w = np.mod(phi, TWO_PI)
    return np.where(w > np.pi, TWO_PI - w, w)


@dataclass(frozen=True)
class PhaseHistogram:
    edges: np.ndarray
    seconds: np.ndarray

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    @property
    def width(self) -> float:
        return float(self.edges[1] - self.edges[0])


def bin_indices(phases, bin_count: int, mode: str = "experimental"):
    span = np.pi if mode == "experimental" else TWO_PI
    folded = fold_phase(phases) if mode == "experimental" else np.mod(phases, TWO_PI)
    idx = np.minimum((folded / span * bin_count).astype(int), bin_count - 1)
    return idx, np.linspace(0.0, span, bin_count + 1)


def bin_phases(trace: PhaseTrace, bin_count: int, mode: str = "experimental") -> PhaseHistogram:
    """Acquisition seconds per phase bin; sums to the trace duration."""
    if bin_count < 2:
        raise ValueError("bin_count must be at least 2")
    idx, edges = bin_indices(trace.phases, bin_count, mode)
    seconds = np.bincount(idx, minlength=bin_count) * trace.step_seconds
    return PhaseHistogram(edges, seconds.astype(float))


def draw_normalized(center_mean, side_mean, side_peaks: int, rng):
    """Poisson draw of one zero-delay peak and ``side_peaks`` side peaks.

    Returns ``(normalized rate, sigma)``; sigma propagates the Poisson error
    of both, using one count in place of an empty centre peak.
    """
    center = rng.poisson(center_mean)
    sides = rng.poisson(side_mean, size=side_peaks)
    total = sides.sum()
    if total == 0:
        return None
    m = total / side_peaks
    rate = center / m
    sigma = math.sqrt(max(center, 1) + center**2 / total) / m
    return float(rate), float(sigma)


def _rates(rho4: np.ndarray, cfg, kind: str, phis) -> tuple[np.ndarray, np.ndarray]:
    a, b = KIND_PAIRS[kind]
    phis = np.atleast_1d(np.asarray(phis, dtype=float))
    tr = lambda w: np.real(np.einsum("ij,...ji->...", rho4, w))  # noqa: E731
    coinc = tr(vis_observable(cfg, phis, a, b))
    denom = tr(vis_observable(cfg, phis, a, None)) * tr(vis_observable(cfg, phis, b, None))
    if a == b:
        denom = 0.5 * denom
    return np.clip(coinc, 0.0, None), np.clip(denom, 0.0, None)


def sample_records(rho_true, cfg, kinds: Sequence[str], phases, expected_counts: float,
                   side_peaks: int = 4, random_state=None) -> list[MeasurementRecord]:
    """Noisy records at fixed phases; ``expected_counts`` is the mean of each side peak."""
    rng = check_random_state(random_state)
    cfg = check_config(cfg)
    rho4 = _as_vis_matrix(rho_true)
    out = []
    for kind, phi in zip(kinds, phases):
        p = None if kind in STATIC_KINDS or phi is None or np.isnan(phi) else float(phi)
        coinc, denom = _rates(rho4, cfg, kind, 0.0 if p is None else p)
        scale = expected_counts / denom[0]
        drawn = draw_normalized(scale * coinc[0], expected_counts, side_peaks, rng)
        if drawn is None:
            raise EmptyBin(f"no side-peak counts for {kind}")
        out.append(MeasurementRecord(kind, p, drawn[0], drawn[1], 1.0))
    return out


@dataclass
class Campaign:
    records: list[MeasurementRecord]
    trace: PhaseTrace
    histogram: PhaseHistogram
    measured_phases: np.ndarray
    skipped_bins: list[int] = field(default_factory=list)


def run_campaign(rho_true, cfg, plan: ExperimentPlan) -> Campaign:
    """Full synthetic acquisition: phase drift, shutter readout, binning, counting."""
    cfg = check_config(cfg)
    rho4 = _as_vis_matrix(rho_true)
    rng = np.random.default_rng(None if plan.seed is None else [plan.seed, 1])
    trace = generate_phase_trace(plan)
    true_phase = np.mod(trace.phases, TWO_PI)
    if plan.phase_mode == "experimental":
        grid = np.linspace(0, TWO_PI, 64, endpoint=False)
        ref = shutter_intensity(cfg, grid)
        measured = estimate_phase_from_shutter(shutter_intensity(cfg, true_phase), ref.min(), ref.max())
    else:
        measured = true_phase
    idx, edges = bin_indices(measured, plan.bin_count, plan.phase_mode)
    hist = PhaseHistogram(edges, np.bincount(idx, minlength=plan.bin_count) * float(trace.step_seconds))
    pulses_per_sample = plan.flux_per_pulse * plan.pulse_rate_hz * trace.step_seconds

    records = []
    skipped = [int(b) for b in np.flatnonzero(hist.seconds == 0)]
    for b in skipped:
        log.info("phase bin %d has no acquisition time; skipped", b)
    for kind in PHASE_KINDS:
        coinc, denom = _rates(rho4, cfg, kind, true_phase)
        center_mean = np.bincount(idx, coinc, minlength=plan.bin_count) * pulses_per_sample
        side_mean = np.bincount(idx, denom, minlength=plan.bin_count) * pulses_per_sample
        for b in range(plan.bin_count):
            if hist.seconds[b] == 0:
                continue
            drawn = draw_normalized(center_mean[b], side_mean[b], plan.side_peaks, rng)
            if drawn is None:
                log.info("no side-peak counts for %s in bin %d; skipped", kind, b)
                continue
            records.append(MeasurementRecord(kind, float(hist.centers[b]), drawn[0], drawn[1], float(hist.seconds[b])))

    static_pulses = plan.flux_per_pulse * plan.pulse_rate_hz * plan.static_seconds
    for kind in STATIC_KINDS:
        coinc, denom = _rates(rho4, cfg, kind, 0.0)
        drawn = draw_normalized(static_pulses * coinc[0], static_pulses * denom[0], plan.side_peaks, rng)
        if drawn is None:
            raise EmptyBin(f"no side-peak counts for {kind}")
        records.append(MeasurementRecord(kind, None, drawn[0], drawn[1], plan.static_seconds))
    return Campaign(records, trace, hist, measured, skipped)


def sample_campaign(rho_true, cfg, plan: ExperimentPlan) -> list[MeasurementRecord]:
    return run_campaign(rho_true, cfg, plan).records


def noiseless_records(rho_true, cfg, kinds: Sequence[str], phases, sigma: float = 1.0,
                      normalized: bool = True) -> list[MeasurementRecord]:
    """Exact rates at the given phases, all with the same ``sigma``.

    With ``normalized=False`` the rate field holds the raw coincidence
    probability per pair, for fits run with ``rates="raw"``.
    """
    cfg = check_config(cfg)
    rho4 = _as_vis_matrix(rho_true)
    out = []
    for kind, phi in zip(kinds, phases):
        p = None if kind in STATIC_KINDS or phi is None or np.isnan(phi) else float(phi)
        coinc, denom = _rates(rho4, cfg, kind, 0.0 if p is None else p)
        if not normalized:
            out.append(MeasurementRecord(kind, p, float(coinc[0]), sigma, 1.0))
            continue
        if denom[0] <= 0:
            raise EmptyBin(f"no singles for {kind} at phase {p}")
        out.append(MeasurementRecord(kind, p, float(coinc[0] / denom[0]), sigma, 1.0))
    return out


def campaign_layout(bin_count: int = 20, kinds: Sequence[str] = PHASE_KINDS) -> tuple[list[str], list]:
    """Kinds and phases of a full binned campaign over ``[0, pi]``: every phase kind in every bin, then the static kinds."""
    centers = (np.arange(bin_count) + 0.5) * np.pi / bin_count
    ks = [k for k in kinds for _ in centers] + list(STATIC_KINDS)
    ps = [float(c) for _ in kinds for c in centers] + [None] * len(STATIC_KINDS)
    return ks, ps

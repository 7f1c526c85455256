"""Input checking shared by the estimators."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .correlations import KIND_PAIRS, STATIC_KINDS
from .optics import SetupConfig
from .records import MeasurementRecord


@dataclass(frozen=True)
class RecordArrays:
    """Column view of a record set; static kinds carry ``nan`` phases."""

    kinds: np.ndarray
    phases: np.ndarray
    values: np.ndarray
    sigmas: np.ndarray
    weights: np.ndarray

    def __len__(self):
        return len(self.kinds)

    def subset(self, idx) -> "RecordArrays":
        idx = np.asarray(idx)
        return RecordArrays(self.kinds[idx], self.phases[idx], self.values[idx], self.sigmas[idx], self.weights[idx])

    def to_records(self) -> list[MeasurementRecord]:
        return [
            MeasurementRecord(str(k), None if np.isnan(p) else float(p), float(v), float(s), float(w))
            for k, p, v, s, w in zip(self.kinds, self.phases, self.values, self.sigmas, self.weights)
        ]


def check_records(X, require_sigma: bool = True) -> RecordArrays:
    """Accept a list of :class:`MeasurementRecord`, a ``RecordArrays`` or a
    DataFrame with the CSV column names, and return validated columns."""
    if isinstance(X, RecordArrays):
        arrays = X
    elif hasattr(X, "columns"):
        df = X
        phases = np.asarray(df["phaseBinCenter"], dtype=float)
        weights = np.asarray(df["acquisitionWeight"], dtype=float) if "acquisitionWeight" in df else np.ones(len(df))
        arrays = RecordArrays(
            np.asarray(df["pairKind"], dtype=str), phases,
            np.asarray(df["normalizedRate"], dtype=float),
            np.asarray(df["sigma"], dtype=float), weights,
        )
    else:
        recs = list(X)
        if not all(isinstance(r, MeasurementRecord) for r in recs):
            raise TypeError("expected MeasurementRecord objects, a RecordArrays or a DataFrame")
        arrays = RecordArrays(
            np.array([r.pair_kind for r in recs], dtype=str),
            np.array([np.nan if r.phase_bin_center is None else r.phase_bin_center for r in recs], dtype=float),
            np.array([r.normalized_rate for r in recs], dtype=float),
            np.array([r.sigma for r in recs], dtype=float),
            np.array([r.acquisition_weight for r in recs], dtype=float),
        )
    if len(arrays) == 0:
        raise ValueError("no records given")
    unknown = set(arrays.kinds) - set(KIND_PAIRS)
    if unknown:
        raise ValueError(f"unknown pair kinds {sorted(unknown)}")
    static = np.isin(arrays.kinds, STATIC_KINDS)
    if np.any(~static & ~np.isfinite(arrays.phases)):
        raise ValueError("phase-dependent records need a finite phase")
    if not np.all(np.isfinite(arrays.values)):
        raise ValueError("rates must be finite")
    if require_sigma and not np.all(arrays.sigmas > 0):
        raise ValueError("every sigma must be positive")
    # static kinds ignore any phase they were given
    phases = np.where(static, np.nan, arrays.phases)
    return RecordArrays(arrays.kinds, phases, arrays.values, arrays.sigmas, arrays.weights)


def check_config(config) -> SetupConfig:
    if config is None:
        return SetupConfig()
    if isinstance(config, SetupConfig):
        return config
    if isinstance(config, dict):
        return SetupConfig.from_dict(config)
    raise TypeError(f"cannot interpret {type(config).__name__} as a SetupConfig")


def check_rates_mode(rates: str) -> str:
    if rates not in ("normalized", "raw"):
        raise ValueError(f"rates must be 'normalized' or 'raw', got {rates!r}")
    return rates


def check_random_state(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)

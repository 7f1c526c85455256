"""Measurement records and their CSV file format.

One row per measured rate::

    pairKind,phaseBinCenter,normalizedRate,sigma,acquisitionWeight
    R01,,0.0213,0.0041,600.0
    R34,0.0785398163397448,1.732,0.061,1830.0

Phases are in radians; the phase field is empty for R00, R01 and R11.
Lines starting with ``#`` are comments (used to point at the run manifest).
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from .correlations import KIND_PAIRS, STATIC_KINDS

CSV_FIELDS = ("pairKind", "phaseBinCenter", "normalizedRate", "sigma", "acquisitionWeight")


@dataclass(frozen=True)
class MeasurementRecord:
    pair_kind: str
    phase_bin_center: float | None
    normalized_rate: float
    sigma: float
    acquisition_weight: float = 1.0

    def __post_init__(self):
        if self.pair_kind not in KIND_PAIRS:
            raise ValueError(f"unknown pair kind {self.pair_kind!r}")
        if self.pair_kind in STATIC_KINDS:
            if self.phase_bin_center is not None:
                raise ValueError(f"{self.pair_kind} is phase independent and takes no phase")
        elif self.phase_bin_center is None or not math.isfinite(self.phase_bin_center):
            raise ValueError(f"{self.pair_kind} needs a finite phase")
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if not self.acquisition_weight > 0:
            raise ValueError(f"acquisition weight must be positive, got {self.acquisition_weight}")
        if not math.isfinite(self.normalized_rate):
            raise ValueError("rate must be finite")


def _fmt(x: float | None) -> str:
    return "" if x is None else repr(float(x))


def dump_records(records: Iterable[MeasurementRecord], comment: str | None = None) -> str:
    buf = io.StringIO()
    if comment:
        for line in comment.splitlines():
            buf.write(f"# {line}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_FIELDS)
    for r in records:
        writer.writerow([
            r.pair_kind,
            _fmt(r.phase_bin_center),
            _fmt(r.normalized_rate),
            _fmt(r.sigma),
            _fmt(r.acquisition_weight),
        ])
    return buf.getvalue()


def write_records(path, records: Iterable[MeasurementRecord], comment: str | None = None) -> None:
    Path(path).write_text(dump_records(records, comment))


def parse_records(text: str) -> list[MeasurementRecord]:
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    reader = csv.DictReader(lines)
    missing = set(CSV_FIELDS) - set(reader.fieldnames or ())
    if missing:
        raise ValueError(f"record file is missing columns {sorted(missing)}")
    out = []
    for row in reader:
        phase = row["phaseBinCenter"].strip()
        weight = row["acquisitionWeight"].strip()
        out.append(MeasurementRecord(
            pair_kind=row["pairKind"].strip(),
            phase_bin_center=float(phase) if phase else None,
            normalized_rate=float(row["normalizedRate"]),
            sigma=float(row["sigma"]),
            acquisition_weight=float(weight) if weight else 1.0,
        ))
    return out


def read_records(path) -> list[MeasurementRecord]:
    return parse_records(Path(path).read_text())

"""Inclinometer readings, stationary noise profile and angle-to-arc conversion."""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass
from typing import Iterable, Sequence

from boomtrack._io import atomic_write_text
from boomtrack.displacement import DisplacementSample

# legacy conversion chain: feet of arc per degree at an 18.2 m boom, then feet -> mm
PAPER_FT_PER_DEG = 1.046
MM_PER_FT = 304.8


class ReadingFormatError(ValueError):
    def __init__(self, message: str, row: int | None = None):
        self.row = row
        super().__init__(f"row {row}: {message}" if row is not None else message)


@dataclass(frozen=True)
class InclinometerReading:
    t: float
    angle: float  # degrees
    angle2: float | None = None


@dataclass(frozen=True)
class NoiseProfile:
    min_deflection: float
    max_deflection: float
    trial_count: int = 1
    trial_duration: float = 0.0

    def __post_init__(self) -> None:
        if self.min_deflection > self.max_deflection:
            raise ValueError("min_deflection must not exceed max_deflection")
        if self.trial_count < 1:
            raise ValueError("trial_count must be >= 1")


# the stationary fluctuation band reported for the field sensor
PAPER_NOISE = NoiseProfile(-0.07, -0.03, trial_count=10, trial_duration=10.0)


def load_readings(path: str | os.PathLike) -> list[InclinometerReading]:
    """Parse ``t_s,angle_deg[,angle2_deg]``; rows are returned sorted by time."""
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ReadingFormatError("empty readings file")
        cols = [h.strip() for h in header]
        if cols[:2] != ["t_s", "angle_deg"] or (len(cols) > 2 and cols[2] != "angle2_deg") or len(cols) > 3:
            raise ReadingFormatError(f"expected header t_s,angle_deg[,angle2_deg], got {','.join(cols)}", 1)
        out = []
        for row_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(cols):
                raise ReadingFormatError(f"expected {len(cols)} fields, got {len(row)}", row_no)
            try:
                vals = [float(c) for c in row]
            except ValueError:
                raise ReadingFormatError(f"non-numeric field in {row!r}", row_no) from None
            if not all(math.isfinite(v) for v in vals) or vals[0] < 0:
                raise ReadingFormatError(f"invalid values {row!r}", row_no)
            out.append(InclinometerReading(vals[0], vals[1], vals[2] if len(vals) > 2 else None))
    return sorted(out, key=lambda r: r.t)


def dumps_readings(readings: Iterable[InclinometerReading]) -> str:
    readings = list(readings)
    dual = any(r.angle2 is not None for r in readings)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t_s", "angle_deg", "angle2_deg"] if dual else ["t_s", "angle_deg"])
    for r in readings:
        row = [f"{r.t:.6f}", f"{r.angle:.6f}"]
        if dual:
            row.append(f"{r.angle2:.6f}" if r.angle2 is not None else "nan")
        w.writerow(row)
    return buf.getvalue()


def save_readings(readings: Iterable[InclinometerReading], path: str | os.PathLike) -> None:
    atomic_write_text(path, dumps_readings(readings))


def characterize_noise(
    trials: Sequence[Sequence[InclinometerReading]],
    reference: float | None = None,
    axis: int = 1,
) -> NoiseProfile:
    """Deflection band over stationary trials.

    Deflection is measured from ``reference`` (the known resting angle) when
    given, otherwise from each trial's own mean.
    """
    if not trials:
        raise ValueError("at least one trial is required")
    lo, hi = math.inf, -math.inf
    durations = []
    for i, trial in enumerate(trials):
        if not trial:
            raise ValueError(f"trial {i} is empty")
        angles = [_axis(r, axis) for r in trial]
        ref = sum(angles) / len(angles) if reference is None else reference
        for a in angles:
            lo = min(lo, a - ref)
            hi = max(hi, a - ref)
        durations.append(trial[-1].t - trial[0].t)
    return NoiseProfile(lo, hi, len(trials), max(durations))


def _axis(r: InclinometerReading, axis: int) -> float:
    if axis == 1:
        return r.angle
    if axis == 2:
        if r.angle2 is None:
            raise ValueError("reading has no second axis")
        return r.angle2
    raise ValueError(f"axis must be 1 or 2, got {axis}")


def angle_to_arc(angle_deg: float, radius_m: float) -> float:
    """Arc length in meters swept by ``angle_deg`` at ``radius_m``."""
    if not radius_m > 0:
        raise ValueError(f"radius must be positive, got {radius_m}")
    return math.radians(angle_deg) * radius_m


def angle_to_arc_paper_mm(angle_deg: float) -> float:
    """Legacy chain ``(angle * 1.046) * 304.8`` in millimeters; hard-wired to an 18.2 m boom."""
    return (angle_deg * PAPER_FT_PER_DEG) * MM_PER_FT


def angle_to_arc_paper(angle_deg: float) -> float:
    return angle_to_arc_paper_mm(angle_deg) / 1000.0


def readings_to_displacement(
    rs: Sequence[InclinometerReading],
    radius_m: float,
    *,
    paper_compat: bool = False,
    axis: int = 1,
) -> list[DisplacementSample]:
    """Vertical arc displacement relative to the first reading."""
    if not rs:
        raise ValueError("no readings to convert")
    a0 = _axis(rs[0], axis)
    out = []
    for r in rs:
        delta = _axis(r, axis) - a0
        arc = angle_to_arc_paper(delta) if paper_compat else angle_to_arc(delta, radius_m)
        out.append(DisplacementSample(r.t, 0.0, arc + 0.0, "inclinometer"))
    return out

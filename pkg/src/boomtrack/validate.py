"""Align vision and sensor displacement streams and score their agreement."""

from __future__ import annotations

import io
import math
import os
from dataclasses import dataclass, field
from typing import Sequence

from boomtrack._io import atomic_write_text
from boomtrack.displacement import DisplacementSample, displacement_magnitude

DEFAULT_TOLERANCE = 0.026  # meters
DEFAULT_MAX_LAG = 0.15  # one 10 Hz sensor period plus jitter allowance
_EPS = 1e-9  # timestamps that agree to this are simultaneous


@dataclass(frozen=True)
class AlignedPair:
    t_frame: float
    vision: DisplacementSample
    sensor: DisplacementSample

    @property
    def lag(self) -> float:
        return max(0.0, self.t_frame - self.sensor.t)


@dataclass(frozen=True)
class Alignment:
    pairs: tuple[AlignedPair, ...]
    dropped: tuple[float, ...]  # vision timestamps without a usable sensor sample


def align(vision: Sequence[DisplacementSample], sensor: Sequence[DisplacementSample], max_lag: float = DEFAULT_MAX_LAG) -> Alignment:
    """Pair each vision sample with the latest sensor sample at or before it (zero-order hold)."""
    if not vision or not sensor:
        raise ValueError("align needs non-empty vision and sensor streams")
    pairs, dropped = [], []
    j = -1
    for v in vision:
        while j + 1 < len(sensor) and sensor[j + 1].t <= v.t + _EPS:
            j += 1
        if j < 0 or v.t - sensor[j].t > max_lag + _EPS:
            dropped.append(v.t)
            continue
        pairs.append(AlignedPair(v.t, v, sensor[j]))
    return Alignment(tuple(pairs), tuple(dropped))


@dataclass(frozen=True)
class ValidationReport:
    pairs: tuple[AlignedPair, ...]
    errors: tuple[float, ...]
    magnitude_errors: tuple[float, ...]
    max_error: float
    rmse: float
    mean_error: float
    tolerance: float
    passed: bool
    gap_count: int = 0
    dropped_count: int = 0
    use_magnitude: bool = False
    notes: tuple[str, ...] = field(default=())

    @property
    def max_magnitude_error(self) -> float:
        return max(self.magnitude_errors) if self.magnitude_errors else math.nan


def compare(
    pairs: Sequence[AlignedPair],
    tolerance: float = DEFAULT_TOLERANCE,
    *,
    use_magnitude: bool = False,
    gap_count: int = 0,
    dropped_count: int = 0,
) -> ValidationReport:
    """Absolute per-pair error (vertical by default) and pass/fail against ``tolerance``."""
    if not pairs:
        raise ValueError("compare needs at least one aligned pair")
    if not tolerance > 0:
        raise ValueError("tolerance must be positive")
    vert = tuple(abs(p.vision.dy - p.sensor.dy) for p in pairs)
    mag = tuple(abs(displacement_magnitude(p.vision) - displacement_magnitude(p.sensor)) for p in pairs)
    errs = mag if use_magnitude else vert
    max_e = max(errs)
    # keep mean <= rmse <= max exact despite rounding
    mean_e = min(math.fsum(errs) / len(errs), max_e)
    rmse = math.sqrt(math.fsum(e * e for e in errs) / len(errs))
    rmse = min(max(rmse, mean_e), max_e)
    return ValidationReport(
        tuple(pairs), vert, mag, max_e, rmse, mean_e, tolerance, max_e < tolerance,
        gap_count, dropped_count, use_magnitude,
    )


def empty_report(tolerance: float, gap_count: int, dropped_count: int = 0, note: str = "") -> ValidationReport:
    """Report for runs where nothing could be paired; always a failure."""
    return ValidationReport(
        (), (), (), math.nan, math.nan, math.nan, tolerance, False, gap_count, dropped_count,
        notes=(note,) if note else (),
    )


def manual_check(marked_start: float, marked_end: float, vision_estimate: float) -> float:
    """Error of a vision estimate against a tape-measured start/end displacement."""
    return abs((marked_end - marked_start) - vision_estimate)


def count_gaps(frame_times: Sequence[float], vision: Sequence[DisplacementSample]) -> int:
    """Frames in the timeline that produced no vision sample."""
    seen = sorted(v.t for v in vision)
    gaps = 0
    j = 0
    for t in sorted(frame_times):
        while j < len(seen) and seen[j] < t - 1e-6:
            j += 1
        if j < len(seen) and abs(seen[j] - t) <= 1e-6:
            continue
        gaps += 1
    return gaps


REPORT_HEADER = "t_s,vision_dy_m,sensor_dy_m,abs_error_m,vision_mag_m,sensor_mag_m,abs_mag_error_m"


def _fmt(v: float) -> str:
    return "nan" if math.isnan(v) else f"{v:.6f}"


def dumps_report(r: ValidationReport) -> str:
    buf = io.StringIO()
    buf.write(REPORT_HEADER + "\n")
    for p, e, me in zip(r.pairs, r.errors, r.magnitude_errors):
        buf.write(
            f"{p.t_frame:.6f},{p.vision.dy:.6f},{p.sensor.dy:.6f},{e:.6f},"
            f"{displacement_magnitude(p.vision):.6f},{displacement_magnitude(p.sensor):.6f},{me:.6f}\n"
        )
    buf.write("\n")
    footer = [
        ("metric", "magnitude" if r.use_magnitude else "vertical"),
        ("pairs", str(len(r.pairs))),
        ("gap_count", str(r.gap_count)),
        ("dropped_count", str(r.dropped_count)),
        ("max_error_m", _fmt(r.max_error)),
        ("rmse_m", _fmt(r.rmse)),
        ("mean_error_m", _fmt(r.mean_error)),
        ("max_mag_error_m", _fmt(r.max_magnitude_error)),
        ("tolerance_m", _fmt(r.tolerance)),
        ("pass", "true" if r.passed else "false"),
    ]
    buf.writelines(f"{k}={v}\n" for k, v in footer)
    return buf.getvalue()


def save_report(r: ValidationReport, path: str | os.PathLike) -> None:
    atomic_write_text(path, dumps_report(r))


def parse_report_footer(text: str) -> dict[str, str]:
    out = {}
    for line in text.splitlines():
        key, sep, value = line.partition("=")
        if sep and "," not in line:
            out[key.strip()] = value.strip()
    return out

"""Pixel-to-metric calibration and reference-anchored displacement.

Sign convention: image +x maps to +dx; image +y points down, so dy is the
negated row offset and positive dy means the target moved physically up.
"""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass
from typing import Iterable, Sequence

from boomtrack._io import atomic_write_text
from boomtrack.detections import DetectionStream

SOURCES = ("vision", "inclinometer", "sim-truth")
DISPLACEMENT_HEADER = ("t_s", "dx_m", "dy_m", "source", "mag_m")


class EmptyStreamError(ValueError):
    pass


def derive_pixel_pitch(frame_width_m: float, frame_width_px: float) -> float:
    """Meters covered by one pixel: measured frame width over its pixel count."""
    if frame_width_m <= 0 or frame_width_px <= 0:
        raise ValueError("frame width in meters and pixels must both be positive")
    return frame_width_m / frame_width_px


@dataclass(frozen=True)
class CalibrationProfile:
    pixel_pitch: float
    depth: float = 18.2
    frame_width_px: int = 1920
    frame_height_px: int = 1200

    def __post_init__(self) -> None:
        if not (self.pixel_pitch > 0 and math.isfinite(self.pixel_pitch)):
            raise ValueError(f"pixel_pitch must be positive, got {self.pixel_pitch}")
        if not self.depth > 0:
            raise ValueError(f"depth must be positive, got {self.depth}")
        if self.frame_width_px <= 0 or self.frame_height_px <= 0:
            raise ValueError("frame dimensions must be positive")

    @property
    def frame_width_m(self) -> float:
        return self.pixel_pitch * self.frame_width_px

    @classmethod
    def from_frame_width(cls, frame_width_m: float, frame_width_px: int, **kw) -> "CalibrationProfile":
        return cls(derive_pixel_pitch(frame_width_m, frame_width_px), frame_width_px=frame_width_px, **kw)


@dataclass(frozen=True)
class DisplacementSample:
    t: float
    dx: float
    dy: float
    source: str = "vision"

    def __post_init__(self) -> None:
        if not all(math.isfinite(v) for v in (self.t, self.dx, self.dy)):
            raise ValueError("displacement sample values must be finite")
        if self.t < 0:
            raise ValueError(f"t must be non-negative, got {self.t}")
        if self.source not in SOURCES:
            raise ValueError(f"unknown source {self.source!r}")


@dataclass(frozen=True)
class ReferenceAnchor:
    cx0: float
    cy0: float
    t0: float


def anchor_reference(s: DetectionStream) -> ReferenceAnchor:
    if not s.records:
        raise EmptyStreamError("no accepted detections to anchor the reference point")
    first = s.records[0]
    return ReferenceAnchor(first.cx, first.cy, first.t)


def displacement(s: DetectionStream, a: ReferenceAnchor, c: CalibrationProfile) -> list[DisplacementSample]:
    p = c.pixel_pitch
    return [
        DisplacementSample(d.t, (d.cx - a.cx0) * p, -(d.cy - a.cy0) * p + 0.0, "vision")
        for d in s.records
    ]


def displacement_magnitude(d: DisplacementSample) -> float:
    return math.hypot(d.dx, d.dy)


# ---------------------------------------------------------------------------
# CSV: t_s,dx_m,dy_m,source[,mag_m]
# ---------------------------------------------------------------------------


def dumps_displacements(samples: Iterable[DisplacementSample]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(DISPLACEMENT_HEADER)
    for s in samples:
        w.writerow([f"{s.t:.6f}", f"{s.dx:.6f}", f"{s.dy:.6f}", s.source, f"{displacement_magnitude(s):.6f}"])
    return buf.getvalue()


def save_displacements(samples: Iterable[DisplacementSample], path: str | os.PathLike) -> None:
    atomic_write_text(path, dumps_displacements(samples))


def load_displacements(path: str | os.PathLike) -> list[DisplacementSample]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {"t_s", "dx_m", "dy_m"} - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        out = []
        for row_no, row in enumerate(reader, start=2):
            try:
                out.append(
                    DisplacementSample(
                        float(row["t_s"]), float(row["dx_m"]), float(row["dy_m"]), row.get("source") or "vision"
                    )
                )
            except (TypeError, ValueError) as exc:
                raise ValueError(f"{path}: row {row_no}: {exc}") from None
    return sorted(out, key=lambda s: s.t)


def scale_samples(samples: Sequence[DisplacementSample], factor: float) -> list[DisplacementSample]:
    return [DisplacementSample(s.t, s.dx * factor, s.dy * factor, s.source) for s in samples]

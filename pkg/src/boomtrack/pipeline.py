"""Glue between the stages: image folders to detections, detections to displacement."""

from __future__ import annotations

import csv
import os
from pathlib import Path

from boomtrack.detections import Detection, DetectionStream, best_per_frame
from boomtrack.displacement import (
    CalibrationProfile,
    DisplacementSample,
    EmptyStreamError,
    anchor_reference,
    displacement,
)
from boomtrack.fiducial.detect import DEFAULT_PARAMS, DetectorParams, detect_markers
from boomtrack.fiducial.dictionary import MarkerDictionary
from boomtrack.frames import Frame, load_image, read_sidecar_timestamp

IMAGE_SUFFIXES = (".pgm", ".ppm")


def list_images(images_dir: str | os.PathLike) -> list[Path]:
    root = Path(images_dir)
    if not root.is_dir():
        raise NotADirectoryError(f"not an image directory: {root}")
    return sorted(p for p in root.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)


def frame_detections(
    f: Frame,
    d: MarkerDictionary,
    params: DetectorParams = DEFAULT_PARAMS,
    marker_id: int | None = None,
    image: str | None = None,
) -> list[Detection]:
    """Decoded markers as detection records.

    Objectness is 1 for any decoded marker; class probability drops by the
    fraction of bits that needed correcting.
    """
    out = []
    nbits = d.grid * d.grid
    for obs in detect_markers(f, d, params):
        if marker_id is not None and obs.id != marker_id:
            continue
        _, _, w, h = obs.bbox()
        cx, cy = obs.center
        out.append(
            Detection(
                f.timestamp, round(float(cx), 6), round(float(cy), 6), round(w, 6), round(h, 6),
                1.0, 1.0 - obs.hamming_corrections / nbits,
                image=image, extra={"marker_id": obs.id},
            )
        )
    return out


def detect_directory(
    images_dir: str | os.PathLike,
    d: MarkerDictionary,
    params: DetectorParams = DEFAULT_PARAMS,
    marker_id: int | None = None,
) -> tuple[list[Detection], int]:
    """Detections for every image in the folder, plus the number of images read."""
    paths = list_images(images_dir)
    dets: list[Detection] = []
    for p in paths:
        dets.extend(frame_detections(load_image(p), d, params, marker_id, image=p.name))
    dets.sort(key=lambda x: (x.t, x.image or ""))
    return dets, len(paths)


def quantify(stream: DetectionStream, calib: CalibrationProfile, min_confidence: float = 0.5) -> list[DisplacementSample]:
    """Per-frame best detection, anchored at the first one, scaled to meters.

    Raises :class:`EmptyStreamError` when no detection clears ``min_confidence``.
    """
    best = best_per_frame(stream, min_confidence)
    anchor = anchor_reference(best)
    return displacement(best, anchor, calib)


def frame_timeline(path: str | os.PathLike) -> list[float]:
    """Frame timestamps from an image folder (sidecars) or a CSV whose first column is ``t_s``."""
    p = Path(path)
    if p.is_dir():
        times = []
        for img in list_images(p):
            t = read_sidecar_timestamp(img)
            times.append(0.0 if t is None else t)
        return sorted(times)
    with open(p, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0].strip() != "t_s":
            raise ValueError(f"{p}: first column must be t_s")
        return sorted(float(row[0]) for row in reader if row and row[0].strip())


__all__ = [
    "EmptyStreamError",
    "detect_directory",
    "frame_detections",
    "frame_timeline",
    "list_images",
    "quantify",
]

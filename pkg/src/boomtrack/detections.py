"""Uniform detection records: confidence composition, IoU, NMS and JSONL I/O.

The JSONL record is the only contract with external neural inference::

    {"t": 0.2, "cx": 960.5, "cy": 600.0, "w": 40, "h": 40,
     "objectness": 0.97, "class_prob": 0.99, "class_id": 0}

A ``confidence`` (or ``conf``) key is honoured when objectness/class
probability are absent. An optional ``image`` key names the source image for
evaluation; unknown keys are preserved in ``extra``.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

from boomtrack._io import atomic_write_text

_CONF_TOL = 1e-9


class DetectionFormatError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


def compose_confidence(objectness: float, class_prob: float) -> float:
    for name, v in (("objectness", objectness), ("class_prob", class_prob)):
        if not (0.0 <= v <= 1.0):
            raise ValueError(f"{name} must lie in [0, 1], got {v}")
    return objectness * class_prob


@dataclass(frozen=True)
class Detection:
    t: float
    cx: float
    cy: float
    w: float
    h: float
    objectness: float = 1.0
    class_prob: float = 1.0
    confidence: float = -1.0  # recomputed when left at the sentinel
    class_id: int = 0
    image: str | None = None
    extra: dict[str, Any] = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self) -> None:
        for name in ("t", "cx", "cy", "w", "h"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"box dimensions must be positive, got {self.w}x{self.h}")
        product = compose_confidence(self.objectness, self.class_prob)
        if self.confidence == -1.0:
            object.__setattr__(self, "confidence", product)
        elif abs(self.confidence - product) > _CONF_TOL:
            raise ValueError(f"confidence {self.confidence} != objectness x class_prob = {product}")

    @property
    def box(self) -> tuple[float, float, float, float]:
        return (self.cx, self.cy, self.w, self.h)

    def clamped(self, width: int, height: int) -> "Detection":
        """Clip the box to ``[0, width] x [0, height]``."""
        x0 = min(max(self.cx - self.w / 2, 0.0), width)
        x1 = min(max(self.cx + self.w / 2, 0.0), width)
        y0 = min(max(self.cy - self.h / 2, 0.0), height)
        y1 = min(max(self.cy + self.h / 2, 0.0), height)
        if x1 <= x0 or y1 <= y0:
            raise ValueError("box lies entirely outside the frame")
        return Detection(
            self.t, (x0 + x1) / 2, (y0 + y1) / 2, x1 - x0, y1 - y0,
            self.objectness, self.class_prob, self.confidence, self.class_id, self.image, dict(self.extra),
        )

    def to_record(self) -> dict[str, Any]:
        rec: dict[str, Any] = {}
        if self.image is not None:
            rec["image"] = self.image
        rec.update(
            t=self.t, cx=self.cx, cy=self.cy, w=self.w, h=self.h,
            objectness=self.objectness, class_prob=self.class_prob, class_id=self.class_id,
        )
        rec.update(self.extra)
        return rec


@dataclass(frozen=True)
class DetectionStream:
    records: tuple[Detection, ...]
    frame_geometry: tuple[int, int] | None = None  # (width, height)

    def __post_init__(self) -> None:
        recs = tuple(self.records)
        if any(b.t < a.t for a, b in zip(recs, recs[1:])):
            raise ValueError("records must be sorted by t")
        object.__setattr__(self, "records", recs)

    @classmethod
    def from_unsorted(cls, dets: Iterable[Detection], frame_geometry: tuple[int, int] | None = None) -> "DetectionStream":
        return cls(tuple(sorted(dets, key=lambda d: d.t)), frame_geometry)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)


Box = tuple[float, float, float, float]  # (cx, cy, w, h)


def iou(a: Box, b: Box) -> float:
    """Intersection over union of two center-format boxes."""
    if a[2] <= 0 or a[3] <= 0 or b[2] <= 0 or b[3] <= 0:
        raise ValueError("box dimensions must be positive")
    if tuple(a) == tuple(b):
        return 1.0
    ix = min(a[0] + a[2] / 2, b[0] + b[2] / 2) - max(a[0] - a[2] / 2, b[0] - b[2] / 2)
    iy = min(a[1] + a[3] / 2, b[1] + b[3] / 2) - max(a[1] - a[3] / 2, b[1] - b[3] / 2)
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    union = a[2] * a[3] + b[2] * b[3] - inter
    # rounding must not make distinct boxes look identical
    return min(math.nextafter(1.0, 0.0), inter / union)


def rank_key(d: Detection) -> tuple[float, float, float]:
    """Sort key: confidence descending, ties by smaller cx then smaller cy."""
    return (-d.confidence, d.cx, d.cy)


def nms(dets: Sequence[Detection], iou_threshold: float) -> list[Detection]:
    """Greedy class-agnostic non-maximum suppression."""
    kept: list[Detection] = []
    for d in sorted(dets, key=rank_key):
        if all(iou(d.box, k.box) < iou_threshold for k in kept):
            kept.append(d)
    return kept


def best_per_frame(s: DetectionStream, min_confidence: float = 0.5) -> DetectionStream:
    """Highest-confidence detection per timestamp; frames with none above the bar drop out."""
    best: dict[float, Detection] = {}
    for d in s.records:
        if d.confidence < min_confidence:
            continue
        cur = best.get(d.t)
        if cur is None or rank_key(d) < rank_key(cur):
            best[d.t] = d
    return DetectionStream(tuple(best[t] for t in sorted(best)), s.frame_geometry)


# ---------------------------------------------------------------------------
# JSONL
# ---------------------------------------------------------------------------

_REQUIRED = ("cx", "cy", "w", "h")


def _number(rec: dict, key: str, lineno: int) -> float:
    v = rec[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise DetectionFormatError(f"{key!r} must be a number, got {v!r}", lineno)
    return float(v)


def parse_record(rec: Any, lineno: int, default_t: float | None = None) -> Detection:
    if not isinstance(rec, dict):
        raise DetectionFormatError("expected a JSON object", lineno)
    for key in _REQUIRED:
        if key not in rec:
            raise DetectionFormatError(f"missing field {key!r}", lineno)
    if "t" in rec:
        t = _number(rec, "t", lineno)
    elif default_t is not None:
        t = default_t
    elif "image" in rec:
        t = 0.0  # evaluation records are keyed by image, not time
    else:
        raise DetectionFormatError("missing field 't'", lineno)
    if not (math.isfinite(t) and t >= 0):
        raise DetectionFormatError(f"t must be a non-negative number, got {t}", lineno)
    probs = {}
    for key in ("objectness", "class_prob", "confidence", "conf"):
        if key in rec:
            v = _number(rec, key, lineno)
            if not 0.0 <= v <= 1.0:
                raise DetectionFormatError(f"{key} {v} outside [0, 1]", lineno)
            probs[key] = v
    if "objectness" in probs and "class_prob" in probs:
        obj, cls = probs["objectness"], probs["class_prob"]
    else:
        conf = probs.get("confidence", probs.get("conf"))
        if conf is None:
            obj, cls = probs.get("objectness", 1.0), probs.get("class_prob", 1.0)
        else:
            obj, cls = conf, 1.0
    class_id = rec.get("class_id", 0)
    if isinstance(class_id, bool) or not isinstance(class_id, int):
        raise DetectionFormatError(f"class_id must be an integer, got {class_id!r}", lineno)
    image = rec.get("image")
    known = {"t", "cx", "cy", "w", "h", "objectness", "class_prob", "confidence", "conf", "class_id", "image"}
    extra = {k: v for k, v in rec.items() if k not in known}
    try:
        return Detection(
            t, _number(rec, "cx", lineno), _number(rec, "cy", lineno),
            _number(rec, "w", lineno), _number(rec, "h", lineno),
            obj, cls, class_id=class_id, image=None if image is None else str(image), extra=extra,
        )
    except ValueError as exc:
        raise DetectionFormatError(str(exc), lineno) from None


def read_jsonl(path: str | os.PathLike) -> list[tuple[int, Any]]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                out.append((lineno, json.loads(line)))
            except json.JSONDecodeError as exc:
                raise DetectionFormatError(f"invalid JSON: {exc.msg}", lineno) from None
    return out


def load_detections(path: str | os.PathLike, frame_geometry: tuple[int, int] | None = None) -> DetectionStream:
    dets = [parse_record(rec, lineno) for lineno, rec in read_jsonl(path)]
    return DetectionStream.from_unsorted(dets, frame_geometry)


def dumps_detections(dets: Iterable[Detection]) -> str:
    return "".join(json.dumps(d.to_record()) + "\n" for d in dets)


def save_detections(dets: Iterable[Detection], path: str | os.PathLike) -> None:
    atomic_write_text(path, dumps_detections(dets))


def load_ground_truth(path: str | os.PathLike) -> dict[str, list[Box]]:
    """Ground-truth JSONL ``{"image": id, "cx", "cy", "w", "h"}`` grouped per image."""
    gt: dict[str, list[Box]] = {}
    for lineno, rec in read_jsonl(path):
        if not isinstance(rec, dict) or "image" not in rec:
            raise DetectionFormatError("ground-truth record needs an 'image' field", lineno)
        box = tuple(_number(rec, k, lineno) if k in rec else None for k in _REQUIRED)
        if None in box:
            raise DetectionFormatError("ground-truth record needs cx, cy, w, h", lineno)
        if box[2] <= 0 or box[3] <= 0:
            raise DetectionFormatError("ground-truth box dimensions must be positive", lineno)
        gt.setdefault(str(rec["image"]), []).append(box)  # type: ignore[arg-type]
    return gt


def image_key(d: Detection) -> str:
    """Image identity for evaluation: the ``image`` field, else the timestamp."""
    return d.image if d.image is not None else repr(d.t)

"""Single-class detection evaluation: matching, precision/recall, AP and mAP@t.

AP uses all-points interpolation: the precision at recall ``r`` is the maximum
precision reached at any recall ``>= r``, integrated over recall.
"""

from __future__ import annotations

import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass

import numpy as np

from boomtrack.detections import Box, Detection, iou, rank_key

DEFAULT_IOU_THRESHOLDS = (0.5, 0.9)


class NoGroundTruthError(ValueError):
    """Recall is undefined without ground-truth instances."""


@dataclass(frozen=True)
class EvalConfig:
    iou_thresholds: tuple[float, ...] = DEFAULT_IOU_THRESHOLDS

    def __post_init__(self) -> None:
        ts = tuple(float(t) for t in self.iou_thresholds)
        if not ts:
            raise ValueError("at least one IoU threshold is required")
        if any(not 0.0 < t <= 1.0 for t in ts):
            raise ValueError(f"IoU thresholds must lie in (0, 1], got {ts}")
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError(f"IoU thresholds must be strictly ascending, got {ts}")
        object.__setattr__(self, "iou_thresholds", ts)


@dataclass(frozen=True)
class MatchResult:
    labeled: tuple[tuple[Detection, bool], ...]  # in rank order
    n_gt: int

    @property
    def tp(self) -> int:
        return sum(1 for _, ok in self.labeled if ok)

    @property
    def fp(self) -> int:
        return sum(1 for _, ok in self.labeled if not ok)

    @property
    def fn(self) -> int:
        return self.n_gt - self.tp


def match_image(dets: Sequence[Detection], gts: Sequence[Box], iou_t: float) -> list[tuple[Detection, bool]]:
    """Greedy matching within one image.

    In rank order each detection takes the still-unmatched ground truth with
    the highest IoU, provided that IoU reaches ``iou_t``.
    """
    used = [False] * len(gts)
    out = []
    for d in sorted(dets, key=rank_key):
        best, best_iou = -1, -1.0
        for j, g in enumerate(gts):
            if used[j]:
                continue
            v = iou(d.box, g)
            if v >= iou_t and v > best_iou:
                best, best_iou = j, v
        if best >= 0:
            used[best] = True
        out.append((d, best >= 0))
    return out


def match_detections(
    dets: Mapping[str, Sequence[Detection]],
    gt: Mapping[str, Sequence[Box]],
    iou_t: float,
) -> MatchResult:
    labeled: list[tuple[Detection, bool]] = []
    for image in sorted(set(dets) | set(gt)):
        labeled.extend(match_image(dets.get(image, ()), gt.get(image, ()), iou_t))
    labeled.sort(key=lambda p: rank_key(p[0]))
    return MatchResult(tuple(labeled), sum(len(v) for v in gt.values()))


def precision_recall_curve(labels: Sequence[bool], total_gt: int) -> list[tuple[float, float]]:
    """``(precision, recall)`` after each ranked detection."""
    if total_gt <= 0:
        raise NoGroundTruthError("recall is undefined with zero ground-truth boxes")
    tp = fp = 0
    curve = []
    for ok in labels:
        if ok:
            tp += 1
        else:
            fp += 1
        curve.append((tp / (tp + fp), tp / total_gt))
    return curve


def average_precision(curve: Sequence[tuple[float, float]]) -> float:
    if not curve:
        return 0.0
    prec = np.array([p for p, _ in curve], dtype=float)
    rec = np.array([r for _, r in curve], dtype=float)
    mrec = np.concatenate([[0.0], rec, [1.0]])
    mpre = np.concatenate([[0.0], prec, [0.0]])
    mpre = np.maximum.accumulate(mpre[::-1])[::-1]
    step = np.nonzero(mrec[1:] != mrec[:-1])[0]
    return float(np.sum((mrec[step + 1] - mrec[step]) * mpre[step + 1]))


@dataclass(frozen=True)
class ThresholdMetrics:
    iou_threshold: float
    ap: float
    precision: float
    recall: float
    tp: int
    fp: int
    fn: int


def evaluate(
    dets: Mapping[str, Sequence[Detection]],
    gt: Mapping[str, Sequence[Box]],
    cfg: EvalConfig = EvalConfig(),
) -> list[ThresholdMetrics]:
    out = []
    for t in cfg.iou_thresholds:
        m = match_detections(dets, gt, t)
        curve = precision_recall_curve([ok for _, ok in m.labeled], m.n_gt)
        precision, recall = curve[-1] if curve else (0.0, 0.0)
        out.append(ThresholdMetrics(t, average_precision(curve), precision, recall, m.tp, m.fp, m.fn))
    return out


def map_at(
    dets: Mapping[str, Sequence[Detection]],
    gt: Mapping[str, Sequence[Box]],
    cfg: EvalConfig = EvalConfig(),
) -> dict[float, float]:
    """AP per IoU threshold; with a single class mAP@t is AP@t."""
    return {m.iou_threshold: m.ap for m in evaluate(dets, gt, cfg)}


def split_dataset(items: Sequence, ratios: tuple[float, float, float] = (0.74, 0.14, 0.12), seed: int = 0):
    """Seeded shuffle into disjoint (train, test, valid) lists.

    Test and validation sizes are floored; the remainder goes to train.
    """
    if len(ratios) != 3 or any(r < 0 for r in ratios):
        raise ValueError(f"expected three non-negative ratios, got {ratios}")
    if not math.isclose(sum(ratios), 1.0, abs_tol=1e-9):
        raise ValueError(f"ratios must sum to 1, got {sum(ratios)}")
    n = len(items)
    n_test = math.floor(n * ratios[1] + 1e-9)
    n_valid = math.floor(n * ratios[2] + 1e-9)
    order = np.random.default_rng(seed).permutation(n)
    shuffled = [items[i] for i in order]
    n_train = n - n_test - n_valid
    return shuffled[:n_train], shuffled[n_train : n_train + n_test], shuffled[n_train + n_test :]

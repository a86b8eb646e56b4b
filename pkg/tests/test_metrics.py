import itertools
from fractions import Fraction

import numpy as np
import pytest
from scipy.optimize import linear_sum_assignment

from boomtrack.detections import Detection, iou, nms, rank_key
from boomtrack.metrics import (
    EvalConfig,
    NoGroundTruthError,
    average_precision,
    evaluate,
    map_at,
    match_image,
    precision_recall_curve,
    split_dataset,
)


def ap_oracle(labels, total_gt):
    """Exact all-points AP: step integral of the best precision at or beyond each recall level."""
    tp = fp = 0
    pts = []
    for ok in labels:
        tp += ok
        fp += not ok
        pts.append((Fraction(tp, tp + fp), Fraction(tp, total_gt)))
    ap, prev_r = Fraction(0), Fraction(0)
    for r in sorted({r for _, r in pts}):
        p = max(p for p, rr in pts if rr >= r)
        ap += (r - prev_r) * p
        prev_r = r
    return ap


def nms_oracle(dets, thr):
    """The unique subset that is internally non-suppressing and suppresses everything else."""
    ranked = sorted(dets, key=rank_key)
    found = []
    for mask in itertools.product([0, 1], repeat=len(ranked)):
        keep = [d for d, m in zip(ranked, mask) if m]
        ok = True
        for i, d in enumerate(ranked):
            above = [k for k in keep if ranked.index(k) < i]
            hit = any(iou(d.box, k.box) >= thr for k in above)
            if (d in keep) == hit:
                ok = False
                break
        if ok:
            found.append(keep)
    assert len(found) == 1
    return found[0]


def test_pr_curve_frozen():
    curve = precision_recall_curve([True, False, True], 2)
    assert curve == [(1.0, 0.5), (0.5, 0.5), (pytest.approx(2 / 3), 1.0)]
    assert average_precision(curve) == pytest.approx(5 / 6)
    assert ap_oracle([True, False, True], 2) == Fraction(5, 6)


def test_pr_no_ground_truth():
    with pytest.raises(NoGroundTruthError):
        precision_recall_curve([True], 0)


def test_ap_empty_and_perfect():
    assert average_precision([]) == 0.0
    assert average_precision(precision_recall_curve([True] * 4, 4)) == 1.0


def test_ap_against_fraction_oracle():
    rng = np.random.default_rng(0)
    for _ in range(400):
        n = int(rng.integers(1, 12))
        labels = [bool(x) for x in rng.integers(0, 2, n)]
        total = sum(labels) + int(rng.integers(0, 4))
        if total == 0:
            continue
        got = average_precision(precision_recall_curve(labels, total))
        assert got == pytest.approx(float(ap_oracle(labels, total)), abs=1e-12)


def test_single_detection_iou_06():
    # 10x10 gt, detection shifted so IoU = 0.6: overlap width w with 10*w/(200 - 10*w) = 0.6 -> w = 7.5
    gt = {"img": [(5.0, 5.0, 10.0, 10.0)]}
    det = Detection(0, 7.5, 5.0, 10.0, 10.0, 0.9, image="img")
    assert iou(det.box, gt["img"][0]) == pytest.approx(0.6)
    aps = map_at({"img": [det]}, gt, EvalConfig((0.5, 0.9)))
    assert aps == {0.5: 1.0, 0.9: 0.0}


def test_threshold_inclusive():
    gt = [(5.0, 5.0, 10.0, 10.0)]
    det = Detection(0, 7.5, 5.0, 10.0, 10.0)
    assert match_image([det], gt, 0.6)[0][1]


def test_duplicate_detection_is_fp():
    gt = {"a": [(5.0, 5.0, 10.0, 10.0)]}
    d1 = Detection(0, 5, 5, 10, 10, 0.9, image="a")
    d2 = Detection(0, 5.5, 5, 10, 10, 0.8, image="a")
    m = evaluate({"a": [d1, d2]}, gt)[0]
    assert (m.tp, m.fp, m.fn) == (1, 1, 0)


def test_greedy_matching_bounded_by_optimal():
    rng = np.random.default_rng(3)
    for _ in range(200):
        gts = [tuple(rng.uniform(0, 30, 2)) + (8.0, 8.0) for _ in range(int(rng.integers(1, 5)))]
        dets = [Detection(0, *rng.uniform(0, 30, 2), 8.0, 8.0, float(rng.uniform(0.1, 1))) for _ in range(int(rng.integers(0, 6)))]
        res = match_image(dets, gts, 0.3)
        tp = sum(ok for _, ok in res)
        if dets:
            ok_mat = np.array([[iou(d.box, g) >= 0.3 for g in gts] for d in dets], float)
            r, c = linear_sum_assignment(-ok_mat)
            assert tp <= ok_mat[r, c].sum()
        assert tp <= len(gts)


def test_nms_against_subset_oracle():
    rng = np.random.default_rng(7)
    for _ in range(150):
        n = int(rng.integers(1, 8))
        dets = [Detection(0, *rng.uniform(0, 20, 2), *rng.uniform(4, 10, 2), float(rng.uniform(0, 1))) for _ in range(n)]
        assert nms(dets, 0.4) == nms_oracle(dets, 0.4)


def test_eval_config_validation():
    with pytest.raises(ValueError):
        EvalConfig((0.9, 0.5))
    with pytest.raises(ValueError):
        EvalConfig((0.0,))
    assert EvalConfig().iou_thresholds == (0.5, 0.9)


def test_split_sizes_and_disjoint():
    items = list(range(100))
    train, test, valid = split_dataset(items, seed=4)
    assert (len(train), len(test), len(valid)) == (74, 14, 12)
    assert sorted(train + test + valid) == items
    assert split_dataset(items, seed=4) == (train, test, valid)
    with pytest.raises(ValueError):
        split_dataset(items, (0.5, 0.2, 0.2))

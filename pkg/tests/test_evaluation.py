import math

import numpy as np
import pytest

from maskfuse.evaluation import (
    ConfusionMatrix,
    ManifestError,
    ManifestRecord,
    accumulate,
    fg_iou,
    load_manifest,
    load_report,
    metrics_block,
    miou,
    per_class_iou,
    round_metric,
    write_manifest,
    write_per_class_csv,
    write_report,
)
from maskfuse.raster import BinaryMask, LabelMap, iou


def lm(plane, m):
    return LabelMap.from_array(np.array(plane), class_count=m)


# ---------------------------------------------------------------------------
# confusion matrix
# ---------------------------------------------------------------------------

def test_accumulate_hand_case():
    cm = accumulate(ConfusionMatrix.zeros(2), lm([[0, 1]], 2), lm([[1, 1]], 2))
    assert cm.counts[0][1] == 1
    assert cm.counts[1][1] == 1
    assert cm.counts.sum() == 2


def test_accumulate_returns_new_matrix():
    cm0 = ConfusionMatrix.zeros(2)
    cm1 = accumulate(cm0, lm([[1]], 2), lm([[1]], 2))
    assert cm0.counts.sum() == 0
    assert cm1.counts.sum() == 1
    with pytest.raises(ValueError):
        cm0.counts[0, 0] = 5  # frozen


def test_accumulate_perfect_prediction_is_diagonal():
    rng = np.random.default_rng(51)
    labels = rng.integers(0, 4, size=(20, 20))
    cm = accumulate(ConfusionMatrix.zeros(4), lm(labels, 4), lm(labels, 4))
    assert np.array_equal(cm.counts, np.diag(np.bincount(labels.reshape(-1), minlength=4)))


def test_accumulate_is_additive():
    rng = np.random.default_rng(52)
    a_gt, a_pr = rng.integers(0, 3, (2, 8, 8))
    b_gt, b_pr = rng.integers(0, 3, (2, 8, 8))
    both = accumulate(
        accumulate(ConfusionMatrix.zeros(3), lm(a_gt, 3), lm(a_pr, 3)), lm(b_gt, 3), lm(b_pr, 3)
    )
    merged = accumulate(ConfusionMatrix.zeros(3), lm(a_gt, 3), lm(a_pr, 3)) + accumulate(
        ConfusionMatrix.zeros(3), lm(b_gt, 3), lm(b_pr, 3)
    )
    assert np.array_equal(both.counts, merged.counts)


def test_accumulate_validation():
    with pytest.raises(ValueError):
        accumulate(ConfusionMatrix.zeros(2), lm([[0]], 2), lm([[0, 0]], 2))
    with pytest.raises(ValueError):
        accumulate(ConfusionMatrix.zeros(2), lm([[0]], 3), lm([[0]], 3))


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------

def test_miou_perfect_and_half():
    perfect = ConfusionMatrix(class_count=2, counts=np.array([[5, 0], [0, 7]]))
    assert miou(perfect) == 1.0
    # class 1: TP 4, FN 2, FP 2 -> IoU 0.5; class 0: TP 10, FN 2, FP 2 -> 10/14
    cm = ConfusionMatrix(class_count=2, counts=np.array([[10, 2], [2, 4]]))
    assert per_class_iou(cm)[1] == pytest.approx(0.5)
    assert miou(cm) == pytest.approx((10 / 14 + 0.5) / 2)


def test_miou_excludes_absent_classes():
    # class 2 never appears in gt or prediction
    counts = np.zeros((3, 3), dtype=np.int64)
    counts[0, 0] = 5
    counts[1, 1] = 3
    cm = ConfusionMatrix(class_count=3, counts=counts)
    assert math.isnan(per_class_iou(cm)[2])
    assert miou(cm) == 1.0


def test_miou_of_empty_matrix_is_nan():
    assert math.isnan(miou(ConfusionMatrix.zeros(3)))


def test_fg_iou_matches_binary_mask_iou():
    rng = np.random.default_rng(53)
    for _ in range(50):
        a = rng.random((9, 9)) < rng.random()
        b = rng.random((9, 9)) < rng.random()
        cm = accumulate(
            ConfusionMatrix.zeros(2),
            LabelMap.from_mask(BinaryMask.from_array(a)),
            LabelMap.from_mask(BinaryMask.from_array(b)),
        )
        want = iou(BinaryMask.from_array(a), BinaryMask.from_array(b))
        assert abs(fg_iou(cm, 1) - want) <= 1e-12


def test_fg_iou_absent_class_is_one():
    assert fg_iou(ConfusionMatrix.zeros(2), 1) == 1.0
    with pytest.raises(ValueError):
        fg_iou(ConfusionMatrix.zeros(2), 2)


def test_round_metric():
    assert round_metric(0.123456) == 0.1235
    assert round_metric(float("nan")) is None
    assert round_metric(None) is None


# ---------------------------------------------------------------------------
# manifests
# ---------------------------------------------------------------------------

def test_manifest_round_trip(tmp_path):
    records = [
        ManifestRecord(image="a.png", gt_mask="a_gt.png", task="ovss", classes="cls.txt"),
        ManifestRecord(image="b.png", gt_mask="b_gt.png", task="refer", question="the dog", group="g1"),
    ]
    path = tmp_path / "m.jsonl"
    write_manifest(records, path)
    assert load_manifest(path) == records


def test_manifest_empty_file(tmp_path):
    path = tmp_path / "m.jsonl"
    path.write_text("")
    assert load_manifest(path) == []


def test_manifest_errors_name_the_line(tmp_path):
    path = tmp_path / "m.jsonl"
    good = '{"image": "a.png", "gt_mask": "g.png", "task": "refer", "question": "q"}'
    path.write_text(good + "\nnot json\n")
    with pytest.raises(ManifestError, match=r"m\.jsonl:2"):
        load_manifest(path)


def test_manifest_requires_task_fields(tmp_path):
    path = tmp_path / "m.jsonl"
    path.write_text('{"image": "a.png", "gt_mask": "g.png", "task": "ovss"}\n')
    with pytest.raises(ManifestError, match="classes"):
        load_manifest(path)
    path.write_text('{"image": "a.png", "gt_mask": "g.png", "task": "refer"}\n')
    with pytest.raises(ManifestError, match="question"):
        load_manifest(path)
    path.write_text('{"image": "a.png", "gt_mask": "g.png", "task": "banana"}\n')
    with pytest.raises(ManifestError, match="banana"):
        load_manifest(path)
    path.write_text('{"image": "a.png", "task": "refer", "question": "q"}\n')
    with pytest.raises(ManifestError, match="gt_mask"):
        load_manifest(path)


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

def test_metrics_block_and_report_round_trip(tmp_path):
    cm = accumulate(ConfusionMatrix.zeros(2), lm([[0, 1]], 2), lm([[1, 1]], 2))
    block = metrics_block(cm, ["background", "thing"])
    assert block["fg_iou"] == 0.5
    assert block["per_class_iou"]["background"] == 0.0
    assert block["pixel_count"] == 2
    report = {"dataset": "demo", "metrics": block}
    path = tmp_path / "report.json"
    write_report(report, path)
    assert load_report(path) == report


def test_metrics_block_maps_nan_to_null():
    block = metrics_block(ConfusionMatrix.zeros(3), ["a", "b", "c"])
    assert block["miou"] is None
    assert block["per_class_iou"]["c"] is None


def test_per_class_csv(tmp_path):
    cm = accumulate(ConfusionMatrix.zeros(2), lm([[0, 1]], 2), lm([[1, 1]], 2))
    path = tmp_path / "per_class.csv"
    write_per_class_csv(cm, ["background", "thing"], path)
    rows = path.read_text().strip().splitlines()
    assert rows[0] == "class_index,class_name,iou"
    assert rows[1] == "0,background,0.0"
    assert rows[2] == "1,thing,0.5"

"""Confusion-matrix metrics, run manifests, and report files.

Confusion rows index the ground-truth class, columns the predicted class.
Mean IoU averages over the classes present in either the ground truth or the
prediction; classes absent from both are excluded from the mean.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .raster import LabelMap, _freeze


class ManifestError(ValueError):
    """A manifest file that cannot be used; message carries path and line."""


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """Immutable per-class pixel counts; ``counts[g][p]`` = gt class g predicted as p."""

    class_count: int
    counts: np.ndarray

    def __post_init__(self):
        if self.class_count < 1:
            raise ValueError("class_count must be at least 1")
        counts = np.ascontiguousarray(self.counts, dtype=np.int64)
        if counts.shape != (self.class_count, self.class_count):
            raise ValueError(
                f"expected counts of shape {(self.class_count, self.class_count)}, got {counts.shape}"
            )
        if counts.min(initial=0) < 0:
            raise ValueError("counts must be non-negative")
        object.__setattr__(self, "counts", _freeze(counts))

    @classmethod
    def zeros(cls, class_count: int) -> "ConfusionMatrix":
        return cls(class_count=class_count, counts=np.zeros((class_count, class_count), dtype=np.int64))

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        if not isinstance(other, ConfusionMatrix):
            return NotImplemented
        if other.class_count != self.class_count:
            raise ValueError("cannot merge confusion matrices over different class counts")
        return ConfusionMatrix(class_count=self.class_count, counts=self.counts + other.counts)


def accumulate(cm: ConfusionMatrix, gt: LabelMap, pred: LabelMap) -> ConfusionMatrix:
    """A new matrix with one count added per pixel; the input matrix is unchanged."""
    if gt.width != pred.width or gt.height != pred.height:
        raise ValueError(
            f"accumulate: dimensions differ ({gt.width}x{gt.height} vs {pred.width}x{pred.height})"
        )
    m = cm.class_count
    if gt.class_count != m or pred.class_count != m:
        raise ValueError("accumulate: label maps must use the matrix's class count")
    flat = gt.labels.reshape(-1) * m + pred.labels.reshape(-1)
    add = np.bincount(flat, minlength=m * m).reshape(m, m)
    return ConfusionMatrix(class_count=m, counts=cm.counts + add)


def per_class_iou(cm: ConfusionMatrix) -> np.ndarray:
    """IoU per class; NaN for classes absent from both gt and prediction."""
    diag = np.diag(cm.counts).astype(np.float64)
    rows = cm.counts.sum(axis=1).astype(np.float64)
    cols = cm.counts.sum(axis=0).astype(np.float64)
    denom = rows + cols - diag
    out = np.full(cm.class_count, np.nan)
    present = denom > 0
    out[present] = diag[present] / denom[present]
    return out


def miou(cm: ConfusionMatrix) -> float:
    """Mean IoU over present classes; NaN when no class is present at all."""
    ious = per_class_iou(cm)
    if np.all(np.isnan(ious)):
        return float("nan")
    return float(np.nanmean(ious))


def fg_iou(cm: ConfusionMatrix, foreground_index: int = 1) -> float:
    """IoU of one foreground class; 1.0 when the class is absent from both sides."""
    if not 0 <= foreground_index < cm.class_count:
        raise ValueError(f"foreground index {foreground_index} outside [0, {cm.class_count})")
    d = float(cm.counts[foreground_index, foreground_index])
    row = float(cm.counts[foreground_index].sum())
    col = float(cm.counts[:, foreground_index].sum())
    denom = row + col - d
    if denom == 0:
        return 1.0
    return d / denom


# ---------------------------------------------------------------------------
# manifests
# ---------------------------------------------------------------------------

TASKS = ("ovss", "refer", "reason")


@dataclass(frozen=True)
class ManifestRecord:
    image: str
    gt_mask: str
    task: str
    classes: str | None = None
    question: str | None = None
    group: str | None = None


def load_manifest(path) -> list[ManifestRecord]:
    """Read a JSONL manifest; every fault names the file and line number.

    Each line is an object with ``image``, ``gt_mask`` and ``task``
    (``ovss`` | ``refer`` | ``reason``).  ``ovss`` records must carry a
    ``classes`` path; ``refer`` and ``reason`` records must carry a
    ``question``.  ``group`` marks records whose predictions are vote-merged.
    """
    records: list[ManifestRecord] = []
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ManifestError(f"{path}:{lineno}: not valid JSON ({exc})") from exc
        if not isinstance(obj, dict):
            raise ManifestError(f"{path}:{lineno}: record is not an object")
        for key in ("image", "gt_mask", "task"):
            if not isinstance(obj.get(key), str) or not obj.get(key):
                raise ManifestError(f"{path}:{lineno}: missing or empty {key!r}")
        task = obj["task"]
        if task not in TASKS:
            raise ManifestError(f"{path}:{lineno}: unknown task {task!r}; expected one of {TASKS}")
        for key in ("classes", "question", "group"):
            if key in obj and obj[key] is not None and not isinstance(obj[key], str):
                raise ManifestError(f"{path}:{lineno}: {key!r} must be a string")
        if task == "ovss" and not obj.get("classes"):
            raise ManifestError(f"{path}:{lineno}: ovss records need a 'classes' path")
        if task in ("refer", "reason") and not obj.get("question"):
            raise ManifestError(f"{path}:{lineno}: {task} records need a 'question'")
        records.append(
            ManifestRecord(
                image=obj["image"],
                gt_mask=obj["gt_mask"],
                task=task,
                classes=obj.get("classes"),
                question=obj.get("question"),
                group=obj.get("group"),
            )
        )
    return records


def write_manifest(records: Sequence[ManifestRecord], path) -> None:
    lines = []
    for r in records:
        obj = {"image": r.image, "gt_mask": r.gt_mask, "task": r.task}
        if r.classes is not None:
            obj["classes"] = r.classes
        if r.question is not None:
            obj["question"] = r.question
        if r.group is not None:
            obj["group"] = r.group
        lines.append(json.dumps(obj, sort_keys=True))
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

def round_metric(value: float | None, places: int = 4) -> float | None:
    """Round for reporting; NaN (metric undefined) becomes None."""
    if value is None:
        return None
    value = float(value)
    if math.isnan(value):
        return None
    return round(value, places)


def metrics_block(cm: ConfusionMatrix, class_names: Sequence[str] | None = None) -> dict:
    """The per-run metrics dictionary: mean IoU, per-class IoU, foreground IoU when binary."""
    ious = per_class_iou(cm)
    names = list(class_names) if class_names else [f"class-{i}" for i in range(cm.class_count)]
    if len(names) != cm.class_count:
        raise ValueError(f"expected {cm.class_count} class names, got {len(names)}")
    block = {
        "miou": round_metric(miou(cm)),
        "per_class_iou": {names[i]: round_metric(float(v)) for i, v in enumerate(ious)},
        "pixel_count": int(cm.counts.sum()),
    }
    if cm.class_count == 2:
        block["fg_iou"] = round_metric(fg_iou(cm, 1))
    return block


def write_report(report: dict, path) -> None:
    Path(path).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_report(path) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: not a valid report ({exc})") from exc


def write_per_class_csv(cm: ConfusionMatrix, class_names: Sequence[str], path) -> None:
    """One CSV row per class: index, name, iou (empty when undefined)."""
    ious = per_class_iou(cm)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["class_index", "class_name", "iou"])
        for i, name in enumerate(class_names):
            v = round_metric(float(ious[i]))
            writer.writerow([i, name, "" if v is None else v])

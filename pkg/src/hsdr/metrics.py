"""Confusion matrix, overall/average accuracy and weak-class bookkeeping."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import EmptyInput, LabelOutOfRange, LengthMismatch
from .hsio import LabelRaster

WEAK_CLASS_THRESHOLD = 0.01


@dataclass(eq=False)
class EvalReport:
    """Test-set scores of one run; classes are numbered 1..N, arrays are 0-based.

    ``per_class_accuracy`` holds NaN for classes with no test samples; those
    are listed in ``absent_classes`` and left out of the average accuracy.
    """

    confusion: np.ndarray
    overall_accuracy: float
    average_accuracy: float
    per_class_accuracy: np.ndarray
    absent_classes: list
    weak_class_ids: list = field(default_factory=list)
    method: Optional[str] = None
    metadata: dict = field(default_factory=dict)

    @property
    def n_classes(self) -> int:
        return self.confusion.shape[0]

    @property
    def n_test(self) -> np.ndarray:
        return self.confusion.sum(axis=1)

    def accuracy_of(self, class_id: int) -> Optional[float]:
        value = self.per_class_accuracy[class_id - 1]
        return None if np.isnan(value) else float(value)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "n_classes": self.n_classes,
            "n_test": int(self.confusion.sum()),
            "overall_accuracy": self.overall_accuracy,
            "average_accuracy": self.average_accuracy,
            "per_class_accuracy": [self.accuracy_of(c) for c in range(1, self.n_classes + 1)],
            "absent_classes": list(self.absent_classes),
            "weak_class_ids": list(self.weak_class_ids),
            "confusion": self.confusion.tolist(),
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "EvalReport":
        acc = np.array([np.nan if a is None else a for a in doc["per_class_accuracy"]], dtype=float)
        return cls(
            confusion=np.asarray(doc["confusion"], dtype=np.int64),
            overall_accuracy=doc["overall_accuracy"],
            average_accuracy=doc["average_accuracy"],
            per_class_accuracy=acc,
            absent_classes=list(doc["absent_classes"]),
            weak_class_ids=list(doc.get("weak_class_ids", [])),
            method=doc.get("method"),
            metadata=doc.get("metadata", {}),
        )


def confusion_matrix(true_labels, predicted, n_classes: int) -> np.ndarray:
    t = np.asarray(true_labels, dtype=np.int64)
    p = np.asarray(predicted, dtype=np.int64)
    if t.shape != p.shape or t.ndim != 1:
        raise LengthMismatch(f"true {t.shape} vs predicted {p.shape}")
    for name, v in (("true", t), ("predicted", p)):
        if v.size and (v.min() < 1 or v.max() > n_classes):
            raise LabelOutOfRange(f"{name} labels outside 1..{n_classes}")
    flat = (t - 1) * n_classes + (p - 1)
    return np.bincount(flat, minlength=n_classes * n_classes).reshape(n_classes, n_classes)


def evaluate(true_labels, predicted, n_classes: int, method: Optional[str] = None,
             metadata: Optional[dict] = None) -> EvalReport:
    """Score predictions against ground truth.

    OA is trace / total. AA is the mean per-class accuracy over the classes
    that actually occur in ``true_labels``.
    """
    cm = confusion_matrix(true_labels, predicted, n_classes)
    total = int(cm.sum())
    if total == 0:
        raise EmptyInput("no test samples")
    rows = cm.sum(axis=1)
    present = rows > 0
    per_class = np.full(n_classes, np.nan)
    per_class[present] = np.diag(cm)[present] / rows[present]
    return EvalReport(
        confusion=cm,
        overall_accuracy=float(np.trace(cm) / total),
        average_accuracy=float(per_class[present].mean()),
        per_class_accuracy=per_class,
        absent_classes=[int(c) + 1 for c in np.flatnonzero(~present)],
        method=method,
        metadata=dict(metadata or {}),
    )


def weak_classes(raster: LabelRaster, threshold_fraction: float = WEAK_CLASS_THRESHOLD) -> list:
    """Classes holding less than ``threshold_fraction`` of all labeled pixels, ascending."""
    if not 0.0 < threshold_fraction < 1.0:
        raise ValueError(f"threshold_fraction must be in (0, 1), got {threshold_fraction}")
    counts = raster.class_counts()
    total = counts.sum()
    if total == 0:
        return []
    return [int(c) + 1 for c in np.flatnonzero(counts / total < threshold_fraction)]


def write_report_json(report: EvalReport, path) -> None:
    with open(path, "w") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_report_json(path) -> EvalReport:
    with open(path) as fh:
        return EvalReport.from_dict(json.load(fh))


def write_report_csv(report: EvalReport, path, class_names: Optional[Sequence[str]] = None) -> None:
    """Per-class table: class_id,name,n_test,accuracy (empty accuracy for absent classes)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["class_id", "name", "n_test", "accuracy"])
        for c in range(1, report.n_classes + 1):
            name = class_names[c - 1] if class_names and c <= len(class_names) else f"class_{c}"
            acc = report.accuracy_of(c)
            writer.writerow([c, name, int(report.n_test[c - 1]), "" if acc is None else repr(acc)])

"""Accuracy and per-class F1 over the four rumor labels."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .data.events import LABELS


class MetricsError(ValueError):
    pass


def confusion_matrix(preds: Sequence[int], labels: Sequence[int], n_classes: int = len(LABELS)) -> np.ndarray:
    """Rows are true labels, columns predicted labels."""
    if len(preds) != len(labels):
        raise MetricsError(f"{len(preds)} predictions but {len(labels)} labels")
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (np.asarray(labels, dtype=np.int64), np.asarray(preds, dtype=np.int64)), 1)
    return cm


def accuracy(cm: np.ndarray) -> float:
    total = int(cm.sum())
    if total == 0:
        raise MetricsError("accuracy of an empty confusion matrix is undefined")
    return float(np.trace(cm)) / total


def f1_per_class(cm: np.ndarray, cls: int) -> float:
    """Harmonic mean of precision and recall; 0 whenever either is undefined or both are 0."""
    if not 0 <= cls < cm.shape[0]:
        raise MetricsError(f"class index {cls} out of range")
    tp = int(cm[cls, cls])
    fp = int(cm[:, cls].sum()) - tp
    fn = int(cm[cls, :].sum()) - tp
    if tp + fp == 0 or tp + fn == 0:
        return 0.0
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


@dataclass
class MetricsReport:
    accuracy: float
    f1: dict[str, float]
    support: dict[str, int]
    confusion: np.ndarray

    def to_json(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "f1": dict(self.f1),
            "support": dict(self.support),
            "confusion": self.confusion.tolist(),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)

    def table_row(self, name: str, width: int = 12) -> str:
        cells = [f"{self.accuracy:.4f}"] + [f"{self.f1[lab]:.4f}" for lab in LABELS]
        return f"{name:<{width}}" + "".join(f"{c:>9}" for c in cells)


def table_header(width: int = 12) -> str:
    cols = ["Acc"] + [f"{lab}-F1" for lab in LABELS]
    return f"{'Method':<{width}}" + "".join(f"{c:>9}" for c in cols)


def format_table(rows: Sequence[tuple[str, MetricsReport]]) -> str:
    """Plain-text table with columns Acc, NR-F1, FR-F1, TR-F1, UR-F1."""
    width = max([12] + [len(name) + 2 for name, _ in rows])
    header = table_header(width)
    lines = [header, "-" * len(header)]
    lines += [report.table_row(name, width) for name, report in rows]
    return "\n".join(lines) + "\n"


def build_report(preds: Sequence[int], labels: Sequence[int]) -> MetricsReport:
    if len(preds) != len(labels):
        raise MetricsError(f"{len(preds)} predictions but {len(labels)} labels")
    if not preds:
        raise MetricsError("cannot report on zero predictions")
    cm = confusion_matrix(preds, labels)
    return MetricsReport(
        accuracy=accuracy(cm),
        f1={lab: f1_per_class(cm, i) for i, lab in enumerate(LABELS)},
        support={lab: int(cm[i].sum()) for i, lab in enumerate(LABELS)},
        confusion=cm,
    )

"""Evaluation arithmetic: accuracy, regression errors, confusion tables.

All functions are pure and operate on plain sequences or numpy arrays;
rendering helpers produce CSV and aligned-text tables.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Sequence

import numpy as np


class MetricsError(ValueError):
    pass


def multiclass_accuracy(preds: Sequence, labels: Sequence) -> float:
    """Fraction of positions where preds equals labels."""
    if len(preds) != len(labels):
        raise MetricsError(f"length mismatch: {len(preds)} preds vs {len(labels)} labels")
    if len(preds) == 0:
        raise MetricsError("empty input")
    correct = sum(1 for p, y in zip(preds, labels) if p == y)
    return correct / len(preds)


def mse(preds: Sequence[float], targets: Sequence[float]) -> float:
    """Mean squared error, (1/n) * sum((y - yhat)^2)."""
    p, t = _paired_arrays(preds, targets)
    return float(np.mean((t - p) ** 2))


def mae(preds: Sequence[float], targets: Sequence[float]) -> float:
    """Mean absolute error, (1/n) * sum(|y - yhat|)."""
    p, t = _paired_arrays(preds, targets)
    return float(np.mean(np.abs(t - p)))


def _paired_arrays(preds, targets):
    p = np.asarray(preds, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64)
    if p.shape != t.shape:
        raise MetricsError(f"shape mismatch: {p.shape} vs {t.shape}")
    if p.size == 0:
        raise MetricsError("empty input")
    return p, t


@dataclass
class ConfusionMatrix:
    """Counts matrix with rows = ground truth, columns = prediction."""

    classes: list
    counts: np.ndarray  # (n_classes, n_classes) int64

    @property
    def supports(self) -> np.ndarray:
        """Per-class ground-truth counts (row sums)."""
        return self.counts.sum(axis=1)

    @property
    def per_class_accuracy(self) -> np.ndarray:
        """diagonal / row sum; nan where a class has no support."""
        sup = self.supports
        with np.errstate(invalid="ignore"):
            return np.where(sup > 0, np.diag(self.counts) / np.maximum(sup, 1), np.nan)

    @property
    def accuracy(self) -> float:
        return float(np.trace(self.counts) / self.counts.sum())

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("truth\\pred," + ",".join(str(c) for c in self.classes) + ",support,accuracy\n")
        acc = self.per_class_accuracy
        for i, cls in enumerate(self.classes):
            row = ",".join(str(int(v)) for v in self.counts[i])
            a = "" if np.isnan(acc[i]) else f"{acc[i]:.4f}"
            buf.write(f"{cls},{row},{int(self.supports[i])},{a}\n")
        return buf.getvalue()

    def to_text(self) -> str:
        names = [str(c) for c in self.classes]
        width = max([len(n) for n in names] + [6])
        head = " " * (width + 1) + " ".join(n.rjust(width) for n in names)
        lines = [head]
        for i, n in enumerate(names):
            row = " ".join(str(int(v)).rjust(width) for v in self.counts[i])
            lines.append(n.rjust(width) + " " + row)
        return "\n".join(lines)


def confusion_matrix(preds: Sequence, labels: Sequence, classes: Sequence) -> ConfusionMatrix:
    """Build the truth-by-prediction counts matrix over the given class list."""
    if len(preds) != len(labels):
        raise MetricsError(f"length mismatch: {len(preds)} preds vs {len(labels)} labels")
    index = {c: i for i, c in enumerate(classes)}
    counts = np.zeros((len(classes), len(classes)), dtype=np.int64)
    for p, y in zip(preds, labels):
        if y not in index:
            raise MetricsError(f"unknown truth class: {y!r}")
        if p not in index:
            raise MetricsError(f"unknown predicted class: {p!r}")
        counts[index[y], index[p]] += 1
    return ConfusionMatrix(classes=list(classes), counts=counts)


def type_consistent_rate(pred_ids, true_ids, pred_types, true_types) -> float | None:
    """Among fine-label errors, the fraction whose coarse label is right.

    Returns None when there are no fine-label errors (rate undefined).
    """
    errors = 0
    consistent = 0
    for pi, yi, pt, yt in zip(pred_ids, true_ids, pred_types, true_types):
        if pi != yi:
            errors += 1
            if pt == yt:
                consistent += 1
    return consistent / errors if errors else None


def per_class_table(cm: ConfusionMatrix) -> str:
    """Aligned text table of per-class accuracy and support."""
    acc = cm.per_class_accuracy
    width = max([len(str(c)) for c in cm.classes] + [8])
    lines = [f"{'class'.ljust(width)}  {'accuracy':>8}  {'correct':>8}  {'support':>8}"]
    for i, cls in enumerate(cm.classes):
        sup = int(cm.supports[i])
        cor = int(cm.counts[i, i])
        a = "n/a" if np.isnan(acc[i]) else f"{acc[i]:.2%}"
        lines.append(f"{str(cls).ljust(width)}  {a:>8}  {cor:>8}  {sup:>8}")
    return "\n".join(lines)

"""Confusion matrix, per-class precision/recall/F1 and report aggregates.

Zero-division convention: a class with no predicted (or no true) instances
gets precision (or recall) 0, and F1 is 0 when P + R = 0. This keeps every
aggregate defined, which matters for degenerate early-training reports
where a model predicts a single class.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import InputError
from .validation import as_labels


@dataclass(frozen=True)
class ConfusionMatrix:
    """Counts with rows = true class, columns = predicted class."""

    counts: np.ndarray
    class_names: tuple[str, ...]

    @property
    def n_classes(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class ClassificationReport:
    per_class: tuple[ClassMetrics, ...]
    class_names: tuple[str, ...]
    accuracy: float
    macro_f1: float
    weighted_precision: float
    weighted_recall: float
    weighted_f1: float
    total: int


def confusion(true_labels, predicted_labels, n_classes: int, class_names=None) -> ConfusionMatrix:
    """Tally (true, predicted) pairs into a C x C integer matrix."""
    if n_classes < 2:
        raise InputError("n_classes must be >= 2")
    t = as_labels(true_labels, n_classes, name="true_labels")
    p = as_labels(predicted_labels, n_classes, name="predicted_labels")
    if t.shape[0] != p.shape[0]:
        raise InputError(f"label lengths differ: {t.shape[0]} != {p.shape[0]}")
    counts = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(counts, (t, p), 1)
    if class_names is None:
        class_names = tuple(str(c) for c in range(n_classes))
    else:
        class_names = tuple(str(c) for c in class_names)
        if len(class_names) != n_classes:
            raise InputError(f"{len(class_names)} class names for {n_classes} classes")
    return ConfusionMatrix(counts, class_names)


def _safe_div(num: float, den: float) -> float:
    return num / den if den > 0 else 0.0


def report(cm: ConfusionMatrix) -> ClassificationReport:
    """Per-class precision/recall/F1 plus macro and support-weighted averages.

    Precision normalizes columns, recall normalizes rows; macro F1 is the
    unweighted mean of per-class F1. The support-weighted recall equals
    accuracy identically.
    """
    counts = cm.counts
    total = cm.total
    if total == 0:
        raise InputError("cannot build a report from zero evaluated samples")
    diag = np.diag(counts).astype(np.float64)
    col_sums = counts.sum(axis=0).astype(np.float64)
    row_sums = counts.sum(axis=1).astype(np.float64)

    per_class = []
    for i in range(cm.n_classes):
        precision = _safe_div(diag[i], col_sums[i])
        recall = _safe_div(diag[i], row_sums[i])
        f1 = _safe_div(2.0 * precision * recall, precision + recall)
        per_class.append(ClassMetrics(precision, recall, f1, int(row_sums[i])))

    accuracy = float(diag.sum() / total)
    macro_f1 = float(np.mean([c.f1 for c in per_class]))
    supports = np.array([c.support for c in per_class], dtype=np.float64)
    weighted = lambda vals: float(np.dot(supports, vals) / total)
    return ClassificationReport(
        per_class=tuple(per_class),
        class_names=cm.class_names,
        accuracy=accuracy,
        macro_f1=macro_f1,
        weighted_precision=weighted([c.precision for c in per_class]),
        weighted_recall=weighted([c.recall for c in per_class]),
        weighted_f1=weighted([c.f1 for c in per_class]),
        total=total,
    )


def format_report_table(rep: ClassificationReport) -> str:
    """Aligned human-readable table: per-class rows, accuracy, averages."""
    name_width = max(12, max(len(n) for n in rep.class_names) + 2)
    header = f"{'':<{name_width}}{'precision':>10}{'recall':>10}{'f1-score':>10}{'support':>10}"
    lines = [header, ""]
    for name, c in zip(rep.class_names, rep.per_class):
        lines.append(
            f"{name:<{name_width}}{c.precision:>10.2f}{c.recall:>10.2f}"
            f"{c.f1:>10.2f}{c.support:>10d}"
        )
    macro_p = float(np.mean([c.precision for c in rep.per_class]))
    macro_r = float(np.mean([c.recall for c in rep.per_class]))
    lines.append("")
    lines.append(f"{'accuracy':<{name_width}}{'':>10}{'':>10}{rep.accuracy:>10.2f}{rep.total:>10d}")
    lines.append(
        f"{'macro avg':<{name_width}}{macro_p:>10.2f}{macro_r:>10.2f}"
        f"{rep.macro_f1:>10.2f}{rep.total:>10d}"
    )
    lines.append(
        f"{'weighted avg':<{name_width}}{rep.weighted_precision:>10.2f}"
        f"{rep.weighted_recall:>10.2f}{rep.weighted_f1:>10.2f}{rep.total:>10d}"
    )
    return "\n".join(lines)


def format_report_records(rep: ClassificationReport) -> str:
    """Line-oriented machine form: one record per class plus a summary."""
    lines = []
    for name, c in zip(rep.class_names, rep.per_class):
        lines.append(
            f"class={name} precision={c.precision!r} recall={c.recall!r} "
            f"f1={c.f1!r} support={c.support}"
        )
    lines.append(
        f"accuracy={rep.accuracy!r} macro_f1={rep.macro_f1!r} "
        f"weighted_precision={rep.weighted_precision!r} "
        f"weighted_recall={rep.weighted_recall!r} "
        f"weighted_f1={rep.weighted_f1!r} total={rep.total}"
    )
    return "\n".join(lines)

"""Confusion matrix, per-class precision/recall/F1, macro averaging.

Conventions: confusion rows are true classes, columns predictions; a
precision/recall/F1 with a zero denominator is reported as 0 so the macro
average stays an unweighted mean over all classes; the overall score is the
unweighted (macro) mean of per-class F1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import CLASS_NAMES
from .errors import DataError, DimensionError


def confusion_matrix(preds, labels, classes: int = len(CLASS_NAMES)) -> np.ndarray:
    """counts[true][pred] over paired index sequences."""
    preds = np.asarray(preds, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    if preds.shape != labels.shape or preds.ndim != 1:
        raise DimensionError(f"preds {preds.shape} vs labels {labels.shape}")
    for name, arr in (("pred", preds), ("label", labels)):
        if arr.size and (arr.min() < 0 or arr.max() >= classes):
            raise DataError(f"{name} index out of range 0..{classes - 1}")
    cm = np.zeros((classes, classes), dtype=np.int64)
    np.add.at(cm, (labels, preds), 1)
    return cm


def _f1_from(p: np.ndarray, r: np.ndarray) -> np.ndarray:
    denom = p + r
    out = np.zeros_like(p)
    ok = denom > 0
    out[ok] = 2.0 * p[ok] * r[ok] / denom[ok]
    return out


@dataclass(frozen=True)
class ClassReport:
    """Per-class precision/recall/F1 (fractions in [0,1]) plus the class names
    they are indexed by."""

    class_names: tuple
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray

    @property
    def macro_f1(self) -> float:
        return float(self.f1.mean())

    @classmethod
    def from_confusion(cls, cm: np.ndarray, class_names=CLASS_NAMES) -> "ClassReport":
        cm = np.asarray(cm)
        if cm.ndim != 2 or cm.shape[0] != cm.shape[1] or cm.shape[0] != len(class_names):
            raise DimensionError(f"confusion matrix {cm.shape} vs {len(class_names)} classes")
        diag = np.diag(cm).astype(np.float64)
        col = cm.sum(axis=0).astype(np.float64)
        row = cm.sum(axis=1).astype(np.float64)
        with np.errstate(divide="ignore", invalid="ignore"):
            precision = np.where(col > 0, diag / col, 0.0)
            recall = np.where(row > 0, diag / row, 0.0)
        return cls(tuple(class_names), precision, recall, _f1_from(precision, recall))

    @classmethod
    def from_precision_recall(cls, precision, recall, class_names=CLASS_NAMES) -> "ClassReport":
        precision = np.asarray(precision, dtype=np.float64)
        recall = np.asarray(recall, dtype=np.float64)
        if precision.shape != recall.shape or precision.shape != (len(class_names),):
            raise DimensionError(
                f"precision {precision.shape} / recall {recall.shape} vs {len(class_names)} classes"
            )
        return cls(tuple(class_names), precision, recall, _f1_from(precision, recall))


def class_report(cm: np.ndarray, class_names=CLASS_NAMES) -> ClassReport:
    return ClassReport.from_confusion(cm, class_names)


def report_to_text(report: ClassReport) -> str:
    """Fixed-width per-class table (percentages, 2 decimals) plus a macro row."""
    name_w = max(len("Class"), max(len(n) for n in report.class_names), len("Macro F1"))
    lines = [f"{'Class':<{name_w}}  {'Precision':>9}  {'Recall':>9}  {'F1':>9}"]
    for i, name in enumerate(report.class_names):
        lines.append(
            f"{name:<{name_w}}  {report.precision[i] * 100:>9.2f}  "
            f"{report.recall[i] * 100:>9.2f}  {report.f1[i] * 100:>9.2f}"
        )
    lines.append(f"{'Macro F1':<{name_w}}  {'':>9}  {'':>9}  {report.macro_f1 * 100:>9.2f}")
    return "\n".join(lines)


def write_report_csv(report: ClassReport, path) -> None:
    """class,precision,recall,f1 rows (fractions) plus a final macro row."""
    lines = ["class,precision,recall,f1"]
    for i, name in enumerate(report.class_names):
        lines.append(
            f"{name},{report.precision[i]:.9g},{report.recall[i]:.9g},{report.f1[i]:.9g}"
        )
    lines.append(f"macro,,,{report.macro_f1:.9g}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")

"""Pixel-level semantic IoU with a dataset-wide confusion matrix."""

from __future__ import annotations

import numpy as np

from src.metrics.reports import ClassReport
from src.models.maps import SemanticMap
from src.models.taxonomy import IGNORE_LABEL


class SemanticConfusion:
    """Accumulates gt × pred pixel counts.

    Rows are gt classes; the extra last column counts gt pixels the prediction
    left as ignore (they are false negatives). Gt ignore pixels are skipped.
    """

    def __init__(self, num_classes: int):
        if num_classes <= 0:
            raise ValueError(f"num_classes must be positive, got {num_classes}")
        self.num_classes = num_classes
        self.matrix = np.zeros((num_classes, num_classes + 1), dtype=np.int64)

    def add(self, pred: SemanticMap, gt: SemanticMap) -> None:
        if pred.shape != gt.shape:
            raise ValueError(f"semantic dims differ: pred {pred.shape} vs gt {gt.shape}")
        if pred.num_classes != self.num_classes or gt.num_classes != self.num_classes:
            raise ValueError(
                f"class count mismatch: pred {pred.num_classes}, gt {gt.num_classes}, "
                f"expected {self.num_classes}"
            )
        n = self.num_classes
        gt_labels = gt.labels.ravel().astype(np.int64)
        pred_labels = pred.labels.ravel().astype(np.int64)
        keep = gt_labels != IGNORE_LABEL
        pred_col = np.where(pred_labels[keep] == IGNORE_LABEL, n, pred_labels[keep])
        flat = gt_labels[keep] * (n + 1) + pred_col
        self.matrix += np.bincount(flat, minlength=n * (n + 1)).reshape(n, n + 1)

    def merge(self, other: SemanticConfusion) -> None:
        if other.num_classes != self.num_classes:
            raise ValueError("cannot merge confusion matrices of different class counts")
        self.matrix += other.matrix

    def report(self) -> ClassReport:
        n = self.num_classes
        tp = np.diag(self.matrix[:, :n])
        gt_total = self.matrix.sum(axis=1)
        pred_total = self.matrix[:, :n].sum(axis=0)
        union = gt_total + pred_total - tp
        per_class = {c: float(tp[c] / union[c]) for c in range(n) if union[c] > 0}
        return ClassReport.from_values(per_class)


def semantic_iou(pred: SemanticMap, gt: SemanticMap) -> ClassReport:
    """Per-class IoU of one image pair; the mean covers classes present in gt or pred."""
    confusion = SemanticConfusion(gt.num_classes)
    confusion.add(pred, gt)
    return confusion.report()

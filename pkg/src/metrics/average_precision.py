"""COCO-style mask AP over ten IoU thresholds (AP on visible masks, AAP on amodal)."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from src.metrics.matching import pairwise_iou
from src.metrics.reports import ClassReport
from src.models.instances import InstanceAnnotation, MaskSelector
from src.models.taxonomy import OASS18

AP_THRESHOLDS: tuple[float, ...] = tuple((50 + 5 * i) / 100 for i in range(10))
RECALL_POINTS = np.linspace(0.0, 1.0, 101)


@dataclass(frozen=True)
class DetectionRecord:
    """One image's detections of one class: scores in match order and per-threshold TP flags."""

    scores: NDArray[np.float64]
    matched: NDArray[np.bool_]
    num_gt: int


def match_detections(
    dets: Sequence[InstanceAnnotation],
    gts: Sequence[InstanceAnnotation],
    mask_selector: MaskSelector | str = MaskSelector.VISIBLE,
    thresholds: Sequence[float] = AP_THRESHOLDS,
) -> dict[int, DetectionRecord]:
    """Greedy per-threshold matching of one image, keyed by class id.

    Detections are taken by descending score (stable); each claims the unmatched
    gt of highest IoU >= threshold, lowest gt index on ties.
    """
    selector = MaskSelector(mask_selector)
    records = {}
    for category in sorted({d.category for d in dets} | {g.category for g in gts}):
        class_dets = [d for d in dets if d.category == category]
        class_gts = [g for g in gts if g.category == category]
        scores = np.array([d.score for d in class_dets], dtype=np.float64)
        order = np.argsort(-scores, kind="mergesort")
        scores = scores[order]
        matched = np.zeros((len(class_dets), len(thresholds)), dtype=bool)
        if class_dets and class_gts:
            ious = pairwise_iou(
                [selector.select(class_dets[i]) for i in order],
                [selector.select(g) for g in class_gts],
            )
            for t, threshold in enumerate(thresholds):
                taken = np.zeros(len(class_gts), dtype=bool)
                for k in range(len(class_dets)):
                    row = np.where(~taken & (ious[k] >= threshold), ious[k], -1.0)
                    best = int(np.argmax(row))
                    if row[best] >= threshold:
                        taken[best] = True
                        matched[k, t] = True
        records[category] = DetectionRecord(scores=scores, matched=matched, num_gt=len(class_gts))
    return records


def _interpolated_ap(matched: NDArray[np.bool_], num_gt: int) -> float:
    if matched.size == 0:
        return 0.0
    tp = np.cumsum(matched)
    fp = np.cumsum(~matched)
    recall = tp / num_gt
    precision = tp / (tp + fp)
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    inds = np.searchsorted(recall, RECALL_POINTS, side="left")
    sampled = np.zeros(len(RECALL_POINTS))
    valid = inds < len(recall)
    sampled[valid] = envelope[inds[valid]]
    return float(sampled.mean())


class APAccumulator:
    """Pools per-image detection records and computes per-class AP."""

    def __init__(self, num_classes: int, thresholds: Sequence[float] = AP_THRESHOLDS):
        self.num_classes = num_classes
        self.thresholds = tuple(thresholds)
        self._scores: dict[int, list[NDArray[np.float64]]] = {}
        self._matched: dict[int, list[NDArray[np.bool_]]] = {}
        self._num_gt: dict[int, int] = {}

    def add(self, records: dict[int, DetectionRecord]) -> None:
        for class_id, record in records.items():
            if not 0 <= class_id < self.num_classes:
                raise ValueError(f"class id {class_id} outside [0, {self.num_classes})")
            if record.matched.shape[1:] != (len(self.thresholds),):
                raise ValueError(f"class {class_id}: record has {record.matched.shape[1]} thresholds")
            self._scores.setdefault(class_id, []).append(record.scores)
            self._matched.setdefault(class_id, []).append(record.matched)
            self._num_gt[class_id] = self._num_gt.get(class_id, 0) + record.num_gt

    def class_ap(self, class_id: int) -> float:
        num_gt = self._num_gt.get(class_id, 0)
        if num_gt == 0:
            raise ValueError(f"class {class_id} has no ground truth")
        scores = np.concatenate(self._scores[class_id])
        matched = np.concatenate(self._matched[class_id])
        order = np.argsort(-scores, kind="mergesort")
        matched = matched[order]
        per_threshold = [_interpolated_ap(matched[:, t], num_gt) for t in range(len(self.thresholds))]
        return float(np.mean(per_threshold))

    def report(self) -> ClassReport:
        """Mean over classes with at least one gt instance."""
        per_class = {c: self.class_ap(c) for c in sorted(self._num_gt) if self._num_gt[c] > 0}
        return ClassReport.from_values(per_class)


def average_precision(
    dets: Sequence[InstanceAnnotation],
    gts: Sequence[InstanceAnnotation],
    mask_selector: MaskSelector | str = MaskSelector.VISIBLE,
    num_classes: int = OASS18.num_classes,
) -> ClassReport:
    """AP (visible selector) or AAP (amodal selector) of one image."""
    accumulator = APAccumulator(num_classes)
    accumulator.add(match_detections(dets, gts, mask_selector))
    return accumulator.report()

"""Panoptic quality and its amodal extension.

Void handling follows the usual panoptic convention: prediction pixels on gt
void are left out of the union, and an unmatched prediction lying mostly on
void is not a false positive.
"""

from __future__ import annotations

from collections.abc import Iterable
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from src.metrics.matching import MATCH_IOU, match_segments, void_overlap
from src.metrics.reports import ClassReport
from src.models.instances import MaskSelector
from src.models.maps import VOID_ID, AmodalPanopticMap, PanopticMap, decode_panoptic_id
from src.models.taxonomy import OASS18, Taxonomy


@dataclass
class PanopticStats:
    """Per-class TP/FP/FN counts and summed TP IoU."""

    num_classes: int
    tp: NDArray[np.int64] = field(init=False)
    fp: NDArray[np.int64] = field(init=False)
    fn: NDArray[np.int64] = field(init=False)
    iou: NDArray[np.float64] = field(init=False)

    def __post_init__(self) -> None:
        self.tp = np.zeros(self.num_classes, dtype=np.int64)
        self.fp = np.zeros(self.num_classes, dtype=np.int64)
        self.fn = np.zeros(self.num_classes, dtype=np.int64)
        self.iou = np.zeros(self.num_classes, dtype=np.float64)

    def _check_class(self, class_id: int) -> None:
        if not 0 <= class_id < self.num_classes:
            raise ValueError(f"class id {class_id} outside [0, {self.num_classes})")

    def add_match(self, class_id: int, iou: float) -> None:
        self._check_class(class_id)
        self.tp[class_id] += 1
        self.iou[class_id] += iou

    def add_fp(self, class_id: int) -> None:
        self._check_class(class_id)
        self.fp[class_id] += 1

    def add_fn(self, class_id: int) -> None:
        self._check_class(class_id)
        self.fn[class_id] += 1

    def merge(self, other: PanopticStats) -> None:
        if other.num_classes != self.num_classes:
            raise ValueError("cannot merge panoptic stats of different class counts")
        self.tp += other.tp
        self.fp += other.fp
        self.fn += other.fn
        self.iou += other.iou

    def restricted(self, class_ids: Iterable[int]) -> PanopticStats:
        """Copy keeping only the given classes."""
        out = PanopticStats(self.num_classes)
        keep = sorted(class_ids)
        for name in ("tp", "fp", "fn", "iou"):
            getattr(out, name)[keep] = getattr(self, name)[keep]
        return out

    def report(self) -> ClassReport:
        per_class = {}
        for c in range(self.num_classes):
            denom = self.tp[c] + 0.5 * self.fp[c] + 0.5 * self.fn[c]
            if denom > 0:
                per_class[c] = float(self.iou[c] / denom)
        return ClassReport.from_values(per_class)


def _compact(panoptic: PanopticMap) -> tuple[NDArray[np.int64], NDArray[np.intp]]:
    table = np.array(sorted({VOID_ID, *(s.segment_id for s in panoptic.segments)}), dtype=np.int64)
    return table, np.searchsorted(table, panoptic.ids.ravel())


def accumulate_panoptic(
    pred: PanopticMap,
    gt: PanopticMap,
    num_classes: int,
    classes: Iterable[int] | None = None,
    stats: PanopticStats | None = None,
) -> PanopticStats:
    """Add one image's PQ counts (optionally for a subset of classes) to ``stats``."""
    if pred.shape != gt.shape:
        raise ValueError(f"panoptic dims differ: pred {pred.shape} vs gt {gt.shape}")
    stats = stats if stats is not None else PanopticStats(num_classes)
    wanted = set(range(num_classes)) if classes is None else set(classes)

    gt_table, gt_index = _compact(gt)
    pred_table, pred_index = _compact(pred)
    n_pred = len(pred_table)
    counts = np.bincount(gt_index * n_pred + pred_index, minlength=len(gt_table) * n_pred)
    counts = counts.reshape(len(gt_table), n_pred)
    gt_area = counts.sum(axis=1)
    pred_area = counts.sum(axis=0)
    pred_on_void = counts[0]

    gt_class = [-1] + [decode_panoptic_id(int(s))[0] for s in gt_table[1:]]
    pred_class = [-1] + [decode_panoptic_id(int(s))[0] for s in pred_table[1:]]

    matched_gt: set[int] = set()
    matched_pred: set[int] = set()
    for gi, pi in zip(*np.nonzero(counts[1:, 1:]), strict=True):
        gi, pi = int(gi) + 1, int(pi) + 1
        if gt_class[gi] != pred_class[pi] or gt_class[gi] not in wanted:
            continue
        inter = counts[gi, pi]
        union = pred_area[pi] + gt_area[gi] - inter - pred_on_void[pi]
        iou = inter / union
        if iou > MATCH_IOU:
            stats.add_match(gt_class[gi], float(iou))
            matched_gt.add(gi)
            matched_pred.add(pi)

    for gi in range(1, len(gt_table)):
        if gi not in matched_gt and gt_area[gi] > 0 and gt_class[gi] in wanted:
            stats.add_fn(gt_class[gi])
    for pi in range(1, n_pred):
        if pi in matched_pred or pred_area[pi] == 0 or pred_class[pi] not in wanted:
            continue
        if pred_on_void[pi] / pred_area[pi] > 0.5:
            continue
        stats.add_fp(pred_class[pi])
    return stats


def accumulate_amodal_things(
    pred: AmodalPanopticMap,
    gt: AmodalPanopticMap,
    taxonomy: Taxonomy = OASS18,
    stats: PanopticStats | None = None,
    void: NDArray[np.bool_] | None = None,
) -> PanopticStats:
    """Add one image's thing-class counts, matching full-region masks pairwise."""
    if pred.shape != gt.shape:
        raise ValueError(f"amodal panoptic dims differ: pred {pred.shape} vs gt {gt.shape}")
    stats = stats if stats is not None else PanopticStats(taxonomy.num_classes)
    void = gt.panoptic.void if void is None else void
    things = taxonomy.thing_ids
    preds = [a for a in pred.instances if a.category in things and not a.amodal.is_empty]
    gts = [a for a in gt.instances if a.category in things and not a.amodal.is_empty]

    result = match_segments(preds, gts, MaskSelector.AMODAL, void=void)
    for p, _, iou in result.tp:
        stats.add_match(preds[p].category, iou)
    for g in result.fn:
        stats.add_fn(gts[g].category)
    for p in result.fp:
        mask = preds[p].amodal
        if void_overlap(mask, void) / mask.area > 0.5:
            continue
        stats.add_fp(preds[p].category)
    return stats


def panoptic_quality(pred: PanopticMap, gt: PanopticMap, taxonomy: Taxonomy = OASS18) -> ClassReport:
    """Per-class PQ of one image pair."""
    return accumulate_panoptic(pred, gt, taxonomy.num_classes).report()


def amodal_panoptic_stats(
    pred: AmodalPanopticMap,
    gt: AmodalPanopticMap,
    taxonomy: Taxonomy = OASS18,
    panoptic_stats: PanopticStats | None = None,
) -> PanopticStats:
    """APQ counts: stuff as in PQ, things on full-region masks.

    ``panoptic_stats`` are the PQ counts of the same pixel maps; when given,
    their stuff entries are reused.
    """
    if panoptic_stats is None:
        stats = accumulate_panoptic(pred.panoptic, gt.panoptic, taxonomy.num_classes, taxonomy.stuff_ids)
    else:
        stats = panoptic_stats.restricted(taxonomy.stuff_ids)
    return accumulate_amodal_things(pred, gt, taxonomy, stats)


def amodal_panoptic_quality(
    pred: AmodalPanopticMap, gt: AmodalPanopticMap, taxonomy: Taxonomy = OASS18
) -> ClassReport:
    """Per-class APQ of one image pair."""
    return amodal_panoptic_stats(pred, gt, taxonomy).report()

"""Brute-force expected metrics for synthetic fixtures.

Everything here works on dense boolean grids with plain loops and exhaustive
matching, independently of ``src.metrics``, so the two can be cross-checked.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence

import numpy as np
from numpy.typing import NDArray

from src.metrics.reports import ClassReport, OassReport
from src.models.bundle import OassOutputs
from src.models.maps import VOID_ID, decode_panoptic_id
from src.models.taxonomy import IGNORE_LABEL, OASS18, Taxonomy

MATCH_IOU = 0.5
THRESHOLDS = tuple((50 + 5 * i) / 100 for i in range(10))

Segment = tuple[int, NDArray[np.bool_]]


def _optimal_pairs(ious: list[list[float]]) -> list[tuple[int, int]]:
    """Max-ΣIoU one-to-one matching over pairs with IoU > 0.5, by full enumeration."""
    n_pred = len(ious)
    n_gt = len(ious[0]) if ious else 0
    best_total, best_pairs = -1.0, []

    def visit(g: int, used: set[int], pairs: list[tuple[int, int]], total: float) -> None:
        nonlocal best_total, best_pairs
        if g == n_gt:
            if total > best_total:
                best_total, best_pairs = total, list(pairs)
            return
        for p in range(n_pred):
            if p not in used and ious[p][g] > MATCH_IOU:
                used.add(p)
                pairs.append((p, g))
                visit(g + 1, used, pairs, total + ious[p][g])
                pairs.pop()
                used.remove(p)
        visit(g + 1, used, pairs, total)

    visit(0, set(), [], 0.0)
    return best_pairs


def _pq_counts(preds: Sequence[Segment], gts: Sequence[Segment], void: NDArray[np.bool_], totals: dict) -> None:
    """Add per-class [iou_sum, tp, fp, fn] of one image to ``totals``."""
    for c in sorted({c for c, _ in preds} | {c for c, _ in gts}):
        class_preds = [m for k, m in preds if k == c and m.any()]
        class_gts = [m for k, m in gts if k == c and m.any()]
        ious = []
        for p in class_preds:
            row = []
            for g in class_gts:
                inter = int(np.sum(p & g))
                union = int(p.sum()) + int(g.sum()) - inter - int(np.sum(p & void & ~g))
                row.append(inter / union if union > 0 else 0.0)
            ious.append(row)
        pairs = _optimal_pairs(ious) if class_preds and class_gts else []
        entry = totals.setdefault(c, [0.0, 0, 0, 0])
        for p, g in pairs:
            entry[0] += ious[p][g]
            entry[1] += 1
        matched_p = {p for p, _ in pairs}
        matched_g = {g for _, g in pairs}
        for p, mask in enumerate(class_preds):
            if p not in matched_p and np.sum(mask & void) / mask.sum() <= 0.5:
                entry[2] += 1
        entry[3] += sum(1 for g in range(len(class_gts)) if g not in matched_g)


def _quality(totals: dict) -> ClassReport:
    per_class = {}
    for c, (iou_sum, tp, fp, fn) in totals.items():
        denom = tp + 0.5 * fp + 0.5 * fn
        if denom > 0:
            per_class[c] = iou_sum / denom
    return ClassReport.from_values(per_class)


def _map_segments(ids: NDArray) -> list[Segment]:
    return [(decode_panoptic_id(int(s))[0], ids == s) for s in np.unique(ids) if s != VOID_ID]


def _semantic_counts(pred: NDArray, gt: NDArray, num_classes: int, totals: NDArray[np.int64]) -> None:
    valid = gt != IGNORE_LABEL
    for c in range(num_classes):
        totals[c, 0] += int(np.sum((pred == c) & (gt == c) & valid))
        totals[c, 1] += int(np.sum((pred == c) & (gt != c) & valid))
        totals[c, 2] += int(np.sum((gt == c) & (pred != c)))


def _ap_for_class(images: list[tuple[list[tuple[float, NDArray]], list[NDArray]]], threshold: float) -> float:
    pooled = []
    num_gt = 0
    for dets, gts in images:
        num_gt += len(gts)
        order = sorted(range(len(dets)), key=lambda i: -dets[i][0])
        taken = [False] * len(gts)
        for i in order:
            score, mask = dets[i]
            best, best_iou = -1, -1.0
            for g, gt_mask in enumerate(gts):
                inter = np.sum(mask & gt_mask)
                union = np.sum(mask | gt_mask)
                iou = inter / union if union > 0 else 0.0
                if not taken[g] and iou >= threshold and iou > best_iou:
                    best, best_iou = g, iou
            if best >= 0:
                taken[best] = True
            pooled.append((score, best >= 0))
    pooled.sort(key=lambda item: -item[0])
    tp = fp = 0
    recall, precision = [], []
    for _, hit in pooled:
        tp += hit
        fp += not hit
        recall.append(tp / num_gt)
        precision.append(tp / (tp + fp))
    for i in range(len(precision) - 2, -1, -1):
        precision[i] = max(precision[i], precision[i + 1])
    total = 0.0
    for r in np.linspace(0.0, 1.0, 101):
        reached = [i for i, value in enumerate(recall) if value >= r]
        total += precision[reached[0]] if reached else 0.0
    return total / 101


def _average_precision(pairs: Sequence[tuple[Sequence, Sequence]], amodal: bool) -> ClassReport:
    per_class_images: dict[int, list] = {}
    classes_with_gt = set()
    for dets, gts in pairs:
        for c in {a.category for a in dets} | {a.category for a in gts}:
            pick = (lambda a: a.amodal.dense) if amodal else (lambda a: a.visible.dense)
            class_dets = [(a.score, pick(a)) for a in dets if a.category == c]
            class_gts = [pick(a) for a in gts if a.category == c]
            per_class_images.setdefault(c, []).append((class_dets, class_gts))
            if class_gts:
                classes_with_gt.add(c)
    per_class = {}
    for c in sorted(classes_with_gt):
        values = [_ap_for_class(per_class_images[c], t) for t in THRESHOLDS]
        per_class[c] = sum(values) / len(values)
    return ClassReport.from_values(per_class)


def certify(
    preds: Mapping[str, OassOutputs], gts: Mapping[str, OassOutputs], taxonomy: Taxonomy = OASS18
) -> OassReport:
    """Expected five-metric report for aligned prediction/gt bundles."""
    if set(preds) != set(gts):
        raise ValueError("certificate needs identical prediction and gt image ids")
    n = taxonomy.num_classes
    semantic = np.zeros((n, 3), dtype=np.int64)
    pq_totals: dict = {}
    apq_totals: dict = {}
    for image_id in sorted(gts):
        pred, gt = preds[image_id], gts[image_id]
        _semantic_counts(pred.semantic.labels, gt.semantic.labels, n, semantic)

        void = gt.panoptic.ids == VOID_ID
        pred_segments = _map_segments(pred.panoptic.ids)
        gt_segments = _map_segments(gt.panoptic.ids)
        _pq_counts(pred_segments, gt_segments, void, pq_totals)

        stuff = taxonomy.stuff_ids
        apq_void = gt.amodal_panoptic.panoptic.ids == VOID_ID
        _pq_counts(
            [s for s in _map_segments(pred.amodal_panoptic.panoptic.ids) if s[0] in stuff],
            [s for s in _map_segments(gt.amodal_panoptic.panoptic.ids) if s[0] in stuff],
            apq_void,
            apq_totals,
        )
        things = taxonomy.thing_ids
        _pq_counts(
            [(a.category, a.amodal.dense) for a in pred.amodal_panoptic.instances if a.category in things],
            [(a.category, a.amodal.dense) for a in gt.amodal_panoptic.instances if a.category in things],
            apq_void,
            apq_totals,
        )

    iou = {}
    for c in range(n):
        tp, fp, fn = (int(v) for v in semantic[c])
        if tp + fp + fn > 0:
            iou[c] = tp / (tp + fp + fn)

    ids = sorted(gts)
    return OassReport(
        iou=ClassReport.from_values(iou),
        ap=_average_precision([(preds[i].instance, gts[i].instance) for i in ids], amodal=False),
        aap=_average_precision([(preds[i].amodal_instance, gts[i].amodal_instance) for i in ids], amodal=True),
        pq=_quality(pq_totals),
        apq=_quality(apq_totals),
    )

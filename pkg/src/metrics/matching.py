"""One-to-one segment matching at IoU > 0.5, plus an exhaustive oracle.

Visible masks of one map are disjoint, so a >0.5 match is unique and the plain
threshold is the matching. Amodal masks may overlap; when two candidate pairs
share a segment the conflicting component is solved for maximum total IoU
with the Hungarian algorithm, so the total always equals the oracle's.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from scipy.optimize import linear_sum_assignment

from src.models.instances import InstanceAnnotation, MaskSelector
from src.models.masks import BinaryMask, intersection_area

MATCH_IOU = 0.5
ORACLE_MAX_SEGMENTS = 10
_TIE_TOL = 1e-12


@dataclass(frozen=True)
class MatchResult:
    """TP pairs as (pred index, gt index, IoU), plus unmatched pred and gt indices."""

    tp: tuple[tuple[int, int, float], ...]
    fp: tuple[int, ...]
    fn: tuple[int, ...]

    @property
    def iou_sum(self) -> float:
        return float(sum(iou for _, _, iou in self.tp))

    def pairs(self) -> set[tuple[int, int]]:
        return {(p, g) for p, g, _ in self.tp}


def void_overlap(mask: BinaryMask, void: NDArray[np.bool_] | None) -> int:
    """Pixels of ``mask`` lying on gt void."""
    if void is None or mask.is_empty:
        return 0
    top, left, bottom, right = mask.bbox()
    return int(np.count_nonzero(mask.crop(top, left, bottom, right) & void[top:bottom, left:right]))


def pairwise_iou(
    preds: Sequence[BinaryMask],
    gts: Sequence[BinaryMask],
    void: NDArray[np.bool_] | None = None,
) -> NDArray[np.float64]:
    """IoU matrix of shape (len(preds), len(gts)).

    With a gt void grid, prediction pixels on void outside the gt segment are
    left out of the union.
    """
    ious = np.zeros((len(preds), len(gts)), dtype=np.float64)
    for i, p in enumerate(preds):
        for j, g in enumerate(gts):
            if p.shape != g.shape:
                raise ValueError(f"mask dimension mismatch: pred {i} {p.shape} vs gt {j} {g.shape}")
            inter = intersection_area(p, g)
            if inter == 0:
                continue
            union = p.area + g.area - inter
            if void is not None:
                top, left, bottom, right = p.bbox()
                window = p.crop(top, left, bottom, right) & void[top:bottom, left:right]
                window &= ~g.crop(top, left, bottom, right)
                union -= int(np.count_nonzero(window))
            ious[i, j] = inter / union
    return ious


def _best_assignment(
    ious: NDArray[np.float64], pred_ids: list[int], gt_ids: list[int]
) -> list[tuple[int, int]]:
    """Exhaustive maximum-ΣIoU matching over >0.5 pairs.

    Gts are visited in ascending order, each trying preds in ascending order and
    then staying unmatched; the first optimum found wins ties.
    """
    best_pairs: list[tuple[int, int]] = []
    best_total = -1.0

    def visit(k: int, used: frozenset[int], pairs: list[tuple[int, int]], total: float) -> None:
        nonlocal best_pairs, best_total
        if k == len(gt_ids):
            if total > best_total + _TIE_TOL:
                best_pairs, best_total = list(pairs), total
            return
        g = gt_ids[k]
        for p in pred_ids:
            if p not in used and ious[p, g] > MATCH_IOU:
                pairs.append((p, g))
                visit(k + 1, used | {p}, pairs, total + ious[p, g])
                pairs.pop()
        visit(k + 1, used, pairs, total)

    visit(0, frozenset(), [], 0.0)
    return best_pairs


def _components(candidates: NDArray[np.bool_]) -> list[tuple[list[int], list[int]]]:
    """Connected components of the bipartite candidate graph, as (preds, gts)."""
    n_pred, n_gt = candidates.shape
    seen_pred: set[int] = set()
    components = []
    for start in range(n_pred):
        if start in seen_pred or not candidates[start].any():
            continue
        preds, gts = {start}, set()
        frontier = [start]
        seen_pred.add(start)
        while frontier:
            p = frontier.pop()
            for g in np.flatnonzero(candidates[p]).tolist():
                if g in gts:
                    continue
                gts.add(g)
                for q in np.flatnonzero(candidates[:, g]).tolist():
                    if q not in seen_pred:
                        seen_pred.add(q)
                        preds.add(q)
                        frontier.append(q)
        components.append((sorted(preds), sorted(gts)))
    return components


def _match_class(ious: NDArray[np.float64]) -> list[tuple[int, int]]:
    candidates = ious > MATCH_IOU
    pairs = []
    for preds, gts in _components(candidates):
        if len(preds) == 1 and len(gts) == 1:
            pairs.append((preds[0], gts[0]))
        else:
            block = np.ix_(preds, gts)
            # non-candidate pairs weigh 0, which is the same as leaving both unmatched
            weights = np.where(candidates[block], ious[block], 0.0)
            rows, cols = linear_sum_assignment(weights, maximize=True)
            pairs.extend((preds[r], gts[c]) for r, c in zip(rows, cols, strict=True) if weights[r, c] > 0.0)
    return pairs


def _finish(tp: list[tuple[int, int, float]], n_pred: int, n_gt: int) -> MatchResult:
    tp.sort()
    matched_pred = {p for p, _, _ in tp}
    matched_gt = {g for _, g, _ in tp}
    return MatchResult(
        tp=tuple(tp),
        fp=tuple(i for i in range(n_pred) if i not in matched_pred),
        fn=tuple(j for j in range(n_gt) if j not in matched_gt),
    )


def _by_class(
    preds: Sequence[InstanceAnnotation], gts: Sequence[InstanceAnnotation]
) -> list[tuple[list[int], list[int]]]:
    categories = sorted({a.category for a in preds} | {a.category for a in gts})
    groups = []
    for category in categories:
        p_idx = [i for i, a in enumerate(preds) if a.category == category]
        g_idx = [j for j, a in enumerate(gts) if a.category == category]
        if p_idx and g_idx:
            groups.append((p_idx, g_idx))
    return groups


def match_segments(
    preds: Sequence[InstanceAnnotation],
    gts: Sequence[InstanceAnnotation],
    mask_selector: MaskSelector | str = MaskSelector.VISIBLE,
    void: NDArray[np.bool_] | None = None,
) -> MatchResult:
    """Match predictions to gts of the same class at IoU > 0.5."""
    selector = MaskSelector(mask_selector)
    tp: list[tuple[int, int, float]] = []
    for p_idx, g_idx in _by_class(preds, gts):
        ious = pairwise_iou(
            [selector.select(preds[i]) for i in p_idx],
            [selector.select(gts[j]) for j in g_idx],
            void,
        )
        tp.extend((p_idx[p], g_idx[g], float(ious[p, g])) for p, g in _match_class(ious))
    return _finish(tp, len(preds), len(gts))


def bruteforce_match_oracle(
    preds: Sequence[InstanceAnnotation],
    gts: Sequence[InstanceAnnotation],
    mask_selector: MaskSelector | str = MaskSelector.VISIBLE,
    void: NDArray[np.bool_] | None = None,
) -> MatchResult:
    """ΣIoU-optimal one-to-one matching by exhaustive search over each whole class."""
    selector = MaskSelector(mask_selector)
    tp: list[tuple[int, int, float]] = []
    for p_idx, g_idx in _by_class(preds, gts):
        if len(p_idx) > ORACLE_MAX_SEGMENTS or len(g_idx) > ORACLE_MAX_SEGMENTS:
            raise ValueError(
                f"class {preds[p_idx[0]].category}: {len(p_idx)} preds / {len(g_idx)} gts exceeds "
                f"the exhaustive search limit of {ORACLE_MAX_SEGMENTS}"
            )
        ious = pairwise_iou(
            [selector.select(preds[i]) for i in p_idx],
            [selector.select(gts[j]) for j in g_idx],
            void,
        )
        pairs = _best_assignment(ious, list(range(len(p_idx))), list(range(len(g_idx))))
        tp.extend((p_idx[p], g_idx[g], float(ious[p, g])) for p, g in pairs)
    return _finish(tp, len(preds), len(gts))

"""Dataset-level evaluation of the five OASS outputs."""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass

import numpy as np

from src.metrics.average_precision import APAccumulator, DetectionRecord, match_detections
from src.metrics.panoptic import PanopticStats, accumulate_panoptic, amodal_panoptic_stats
from src.metrics.reports import OassReport
from src.metrics.semantic import SemanticConfusion
from src.models.bundle import OassOutputs
from src.models.instances import MaskSelector
from src.models.taxonomy import OASS18, Taxonomy
from src.utils.logging import get_logger
from src.utils.parallel import ordered_map

logger = get_logger()


@dataclass(frozen=True)
class ImageStats:
    """Everything one image contributes to the dataset metrics."""

    confusion: SemanticConfusion
    ap: dict[int, DetectionRecord]
    aap: dict[int, DetectionRecord]
    pq: PanopticStats
    apq: PanopticStats


def evaluate_image(pred: OassOutputs, gt: OassOutputs, taxonomy: Taxonomy = OASS18) -> ImageStats:
    if pred.shape != gt.shape:
        raise ValueError(f"image dims differ: pred {pred.shape} vs gt {gt.shape}")
    confusion = SemanticConfusion(taxonomy.num_classes)
    confusion.add(pred.semantic, gt.semantic)

    ap = match_detections(pred.instance, gt.instance, MaskSelector.VISIBLE)
    aap = match_detections(pred.amodal_instance, gt.amodal_instance, MaskSelector.AMODAL)

    pq = accumulate_panoptic(pred.panoptic, gt.panoptic, taxonomy.num_classes)
    same_pixels = (
        pred.amodal_panoptic.panoptic is pred.panoptic
        or np.array_equal(pred.amodal_panoptic.panoptic.ids, pred.panoptic.ids)
    ) and (
        gt.amodal_panoptic.panoptic is gt.panoptic
        or np.array_equal(gt.amodal_panoptic.panoptic.ids, gt.panoptic.ids)
    )
    apq = amodal_panoptic_stats(
        pred.amodal_panoptic, gt.amodal_panoptic, taxonomy, panoptic_stats=pq if same_pixels else None
    )
    return ImageStats(confusion=confusion, ap=ap, aap=aap, pq=pq, apq=apq)


def _evaluate_job(job: tuple[str, OassOutputs, OassOutputs, Taxonomy]) -> ImageStats:
    image_id, pred, gt, taxonomy = job
    try:
        return evaluate_image(pred, gt, taxonomy)
    except ValueError as exc:
        raise ValueError(f"image '{image_id}': {exc}") from exc


def evaluate_oass(
    preds: Mapping[str, OassOutputs],
    gts: Mapping[str, OassOutputs],
    taxonomy: Taxonomy = OASS18,
    threads: int = 1,
    progress: bool = False,
) -> OassReport:
    """Aggregate all five metrics over the images shared by ``preds`` and ``gts``.

    Per-image work runs on ``threads`` worker processes; the reduction always
    walks the image ids in sorted order, so the report does not depend on ``threads``.
    """
    missing_pred = sorted(set(gts) - set(preds))
    if missing_pred:
        raise ValueError(f"no prediction for image '{missing_pred[0]}'")
    missing_gt = sorted(set(preds) - set(gts))
    if missing_gt:
        raise ValueError(f"no ground truth for image '{missing_gt[0]}'")

    image_ids = sorted(gts)
    logger.info(f"Evaluating {len(image_ids)} images on {threads} worker process(es)")
    jobs = [(image_id, preds[image_id], gts[image_id], taxonomy) for image_id in image_ids]
    per_image = ordered_map(
        _evaluate_job, jobs, threads=threads, desc="evaluate", progress=progress, processes=True
    )

    confusion = SemanticConfusion(taxonomy.num_classes)
    ap = APAccumulator(taxonomy.num_classes)
    aap = APAccumulator(taxonomy.num_classes)
    pq = PanopticStats(taxonomy.num_classes)
    apq = PanopticStats(taxonomy.num_classes)
    for stats in per_image:
        confusion.merge(stats.confusion)
        ap.add(stats.ap)
        aap.add(stats.aap)
        pq.merge(stats.pq)
        apq.merge(stats.apq)

    report = OassReport(iou=confusion.report(), ap=ap.report(), aap=aap.report(), pq=pq.report(), apq=apq.report())
    logger.info(
        f"mIoU={report.miou:.4f} mAP={report.map:.4f} mAAP={report.maap:.4f} "
        f"mPQ={report.mpq:.4f} mAPQ={report.mapq:.4f}"
    )
    return report

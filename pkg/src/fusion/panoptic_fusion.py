"""Paste labeled instances over the semantic map to build (amodal) panoptic maps."""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np

from src.models.instances import InstanceAnnotation, canonical_order
from src.models.maps import MAX_INSTANCES, AmodalPanopticMap, PanopticMap, Segment, SemanticMap, encode_panoptic_id
from src.models.taxonomy import OASS18, Taxonomy
from src.utils.logging import get_logger

logger = get_logger()


def _paste_order(instances: Sequence[InstanceAnnotation]) -> list[int]:
    return canonical_order(instances, mask_of=lambda a: a.visible, score_of=lambda a: a.score)


def fuse_panoptic(
    semantic: SemanticMap,
    instances: Sequence[InstanceAnnotation],
    taxonomy: Taxonomy = OASS18,
    min_area: int = 1,
    overlap_threshold: float | None = None,
    min_stuff_area: int = 0,
) -> PanopticMap:
    """Fuse stuff labels with labeled instances into one panoptic map.

    Instances are pasted by descending score, each claiming its still-free
    visible pixels; one dropped when fewer than ``min_area`` pixels remain, or
    when more than ``overlap_threshold`` of it is already claimed. Free pixels
    take their stuff class from ``semantic`` (index 1); free thing-class and
    ignore pixels stay void.
    """
    if min_area < 1:
        raise ValueError(f"min_area must be >= 1, got {min_area}")
    height, width = semantic.shape
    ids = np.zeros((height, width), dtype=np.uint32)
    occupied = np.zeros((height, width), dtype=bool)
    segments: list[Segment] = []
    counters: dict[int, int] = {}

    for i in _paste_order(instances):
        inst = instances[i]
        if inst.shape != semantic.shape:
            raise ValueError(f"instance {i} dims {inst.shape} differ from semantic map {semantic.shape}")
        if not taxonomy.is_thing(inst.category):
            raise ValueError(f"instance {i} has stuff class {inst.category}")
        mask = inst.visible
        if mask.is_empty:
            continue
        top, left, bottom, right = mask.bbox()
        pixels = mask.crop(top, left, bottom, right)
        taken = occupied[top:bottom, left:right]
        if overlap_threshold is not None and np.count_nonzero(pixels & taken) / mask.area > overlap_threshold:
            logger.debug(f"Instance {i} dropped: over {overlap_threshold:.2f} of it already claimed")
            continue
        free = pixels & ~taken
        if np.count_nonzero(free) < min_area:
            logger.debug(f"Instance {i} dropped: fewer than {min_area} free pixels")
            continue
        index = counters.get(inst.category, 0) + 1
        if index >= MAX_INSTANCES:
            raise ValueError(f"more than {MAX_INSTANCES - 1} instances of class {inst.category}")
        counters[inst.category] = index
        segment_id = encode_panoptic_id(inst.category, index)
        ids[top:bottom, left:right][free] = segment_id
        taken |= free
        segments.append(Segment(segment_id, inst.category, True))

    for class_id in semantic.classes_present():
        if taxonomy.is_thing(class_id):
            continue
        region = (semantic.labels == class_id) & ~occupied
        area = int(np.count_nonzero(region))
        if area == 0 or area < min_stuff_area:
            continue
        segment_id = encode_panoptic_id(class_id, 1)
        ids[region] = segment_id
        segments.append(Segment(segment_id, class_id, False))

    segments.sort(key=lambda s: s.segment_id)
    return PanopticMap(ids=ids, segments=tuple(segments))


def fuse_amodal_panoptic(
    semantic: SemanticMap,
    amodal_instances: Sequence[InstanceAnnotation],
    taxonomy: Taxonomy = OASS18,
    panoptic: PanopticMap | None = None,
    **fusion_options,
) -> AmodalPanopticMap:
    """Panoptic pixel map plus every thing instance's full region, score-ordered.

    The pixel map is ``panoptic`` when given, otherwise it is fused from the
    instances' visible masks. Amodal regions may overlap each other and the
    pixel map's segments.
    """
    if panoptic is None:
        panoptic = fuse_panoptic(semantic, amodal_instances, taxonomy, **fusion_options)
    elif panoptic.shape != semantic.shape:
        raise ValueError(f"panoptic dims {panoptic.shape} differ from semantic map {semantic.shape}")
    ordered = [amodal_instances[i] for i in canonical_order(
        amodal_instances, mask_of=lambda a: a.amodal, score_of=lambda a: a.score
    )]
    for i, inst in enumerate(ordered):
        if not taxonomy.is_thing(inst.category):
            raise ValueError(f"amodal instance {i} has stuff class {inst.category}")
    kept = tuple(inst for inst in ordered if not inst.amodal.is_empty)
    return AmodalPanopticMap(panoptic=panoptic, instances=kept)

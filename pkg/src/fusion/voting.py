"""Semantic majority voting that assigns thing classes to class-agnostic masks."""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np
from numpy.typing import NDArray
from scipy import ndimage

from src.models.maps import SemanticMap
from src.models.masks import BinaryMask
from src.models.taxonomy import OASS18, Taxonomy
from src.utils.logging import get_logger

logger = get_logger()

_RING = ndimage.generate_binary_structure(2, 2)


def _thing_majority(labels: NDArray[np.uint8], taxonomy: Taxonomy) -> int | None:
    """Most frequent thing class among ``labels``; lowest id on ties, None if no thing pixel."""
    counts = np.bincount(labels.ravel(), minlength=256)[: taxonomy.num_classes]
    thing_counts = np.zeros_like(counts)
    things = sorted(taxonomy.thing_ids)
    thing_counts[things] = counts[things]
    if thing_counts.max() == 0:
        return None
    return int(np.argmax(thing_counts))


def _check(mask: BinaryMask, semantic: SemanticMap) -> None:
    if mask.is_empty:
        raise ValueError("cannot vote a class for an empty mask")
    if mask.shape != semantic.shape:
        raise ValueError(f"mask dims {mask.shape} differ from semantic map {semantic.shape}")


def _ring_vote(mask: BinaryMask, semantic: SemanticMap, taxonomy: Taxonomy) -> int | None:
    top, left, bottom, right = mask.bbox()
    top, left = max(top - 1, 0), max(left - 1, 0)
    bottom, right = min(bottom + 1, semantic.height), min(right + 1, semantic.width)
    inside = mask.crop(top, left, bottom, right)
    ring = ndimage.binary_dilation(inside, structure=_RING) & ~inside
    return _thing_majority(semantic.labels[top:bottom, left:right][ring], taxonomy)


def vote_instance_class(mask: BinaryMask, semantic: SemanticMap, taxonomy: Taxonomy = OASS18) -> int | None:
    """Thing class voted by the semantic labels under ``mask``.

    A mask over stuff only takes the majority thing class of its 1-px dilation
    ring; None means no thing pixel was found and the instance is dropped.
    """
    _check(mask, semantic)
    top, left, bottom, right = mask.bbox()
    window = semantic.labels[top:bottom, left:right]
    winner = _thing_majority(window[mask.crop(top, left, bottom, right)], taxonomy)
    if winner is not None:
        return winner
    winner = _ring_vote(mask, semantic, taxonomy)
    if winner is None:
        logger.debug(f"Mask of {mask.area} px covers no thing pixels, even in its ring")
    return winner


def vote_amodal_class(
    target: BinaryMask,
    others: Sequence[BinaryMask],
    semantic: SemanticMap,
    taxonomy: Taxonomy = OASS18,
) -> int | None:
    """Vote on the part of ``target`` no other amodal mask covers.

    Falls back to the whole-mask vote when that part is empty or shows no thing
    pixel.
    """
    _check(target, semantic)
    top, left, bottom, right = target.bbox()
    region = target.crop(top, left, bottom, right).copy()
    for other in others:
        if other.shape != target.shape:
            raise ValueError(f"amodal mask dims {other.shape} differ from target {target.shape}")
        if not other.is_empty:
            region &= ~other.crop(top, left, bottom, right)
    if region.any():
        winner = _thing_majority(semantic.labels[top:bottom, left:right][region], taxonomy)
        if winner is not None:
            return winner
    return vote_instance_class(target, semantic, taxonomy)

"""Object-level annotations and class-agnostic detections."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from src.models.masks import BinaryMask


class MaskSelector(str, Enum):
    """Which of an annotation's masks a metric looks at."""

    VISIBLE = "visible"
    AMODAL = "amodal"

    def select(self, annotation: InstanceAnnotation) -> BinaryMask:
        return annotation.visible if self is MaskSelector.VISIBLE else annotation.amodal


@dataclass(frozen=True)
class InstanceAnnotation:
    """One object: class, confidence, visible pixels and full (amodal) region."""

    category: int
    score: float
    visible: BinaryMask
    amodal: BinaryMask

    def __post_init__(self) -> None:
        if self.category < 0:
            raise ValueError(f"category must be >= 0, got {self.category}")
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score must be in [0, 1], got {self.score}")
        if self.visible.shape != self.amodal.shape:
            raise ValueError(f"visible/amodal dims differ: {self.visible.shape} vs {self.amodal.shape}")
        if not self.amodal.contains(self.visible):
            raise ValueError("visible mask is not contained in amodal mask")

    @classmethod
    def single_mask(cls, category: int, score: float, mask: BinaryMask) -> InstanceAnnotation:
        """Annotation for a branch that predicts only one mask per object."""
        return cls(category=category, score=score, visible=mask, amodal=mask)

    @property
    def shape(self) -> tuple[int, int]:
        return self.visible.shape

    @property
    def is_occluded(self) -> bool:
        return self.visible != self.amodal


@dataclass(frozen=True)
class Detection:
    """A class-agnostic mask proposal from the instance or amodal-instance branch."""

    mask: BinaryMask
    score: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score must be in [0, 1], got {self.score}")


def canonical_order(items, mask_of, score_of) -> list[int]:
    """Indices sorted by (-score, mask digest); stable, so exact duplicates keep input order."""
    return sorted(range(len(items)), key=lambda i: (-score_of(items[i]), mask_of(items[i]).digest))

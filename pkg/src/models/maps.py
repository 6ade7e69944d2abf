"""Per-pixel label maps: semantic maps, panoptic maps and the amodal variant."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from src.models.instances import InstanceAnnotation
from src.models.taxonomy import IGNORE_LABEL, OASS18, Taxonomy

VOID_ID = 0
MAX_INSTANCES = 1000


def encode_panoptic_id(class_id: int, instance_index: int) -> int:
    """Cityscapes-style segment id: class_id * 1000 + instance_index."""
    if class_id < 0:
        raise ValueError(f"class id must be >= 0, got {class_id}")
    if not 0 <= instance_index < MAX_INSTANCES:
        raise ValueError(f"instance index must be in [0, {MAX_INSTANCES}), got {instance_index}")
    return class_id * MAX_INSTANCES + instance_index


def decode_panoptic_id(segment_id: int) -> tuple[int, int]:
    if segment_id < 0:
        raise ValueError(f"segment id must be >= 0, got {segment_id}")
    return divmod(int(segment_id), MAX_INSTANCES)


@dataclass(frozen=True)
class SemanticMap:
    """H×W grid of class ids in [0, num_classes) or the ignore label 255."""

    labels: NDArray[np.uint8]
    num_classes: int

    def __post_init__(self) -> None:
        labels = np.asarray(self.labels)
        if labels.ndim != 2 or labels.shape[0] == 0 or labels.shape[1] == 0:
            raise ValueError(f"semantic map must be 2D with positive dims, got shape {labels.shape}")
        if not 0 < self.num_classes <= IGNORE_LABEL:
            raise ValueError(f"num_classes must be in (0, {IGNORE_LABEL}], got {self.num_classes}")
        if labels.min() < 0:
            raise ValueError("semantic labels must be non-negative")
        bad = (labels >= self.num_classes) & (labels != IGNORE_LABEL)
        if bad.any():
            raise ValueError(f"semantic labels outside [0, {self.num_classes}) and not ignore: "
                             f"{sorted(set(labels[bad].tolist()))[:5]}")
        labels = labels.astype(np.uint8)
        labels.flags.writeable = False
        object.__setattr__(self, "labels", labels)

    @property
    def height(self) -> int:
        return int(self.labels.shape[0])

    @property
    def width(self) -> int:
        return int(self.labels.shape[1])

    @property
    def shape(self) -> tuple[int, int]:
        return self.height, self.width

    def classes_present(self) -> list[int]:
        values = np.unique(self.labels)
        return [int(v) for v in values if v != IGNORE_LABEL]


@dataclass(frozen=True)
class Segment:
    segment_id: int
    class_id: int
    is_thing: bool


@dataclass(frozen=True)
class PanopticMap:
    """Per-pixel segment ids (0 = void) with the segment table."""

    ids: NDArray[np.uint32]
    segments: tuple[Segment, ...]

    def __post_init__(self) -> None:
        ids = np.asarray(self.ids)
        if ids.ndim != 2 or ids.shape[0] == 0 or ids.shape[1] == 0:
            raise ValueError(f"panoptic map must be 2D with positive dims, got shape {ids.shape}")
        if ids.min() < 0:
            raise ValueError("panoptic ids must be non-negative")
        table = {}
        for seg in self.segments:
            if seg.segment_id == VOID_ID:
                raise ValueError("segment table must not contain the void id 0")
            if seg.segment_id in table:
                raise ValueError(f"duplicate segment id {seg.segment_id}")
            if decode_panoptic_id(seg.segment_id)[0] != seg.class_id:
                raise ValueError(f"segment {seg.segment_id} does not encode class {seg.class_id}")
            table[seg.segment_id] = seg
        present = np.unique(ids)
        missing = [int(v) for v in present if v != VOID_ID and int(v) not in table]
        if missing:
            raise ValueError(f"pixel ids missing from the segment table: {missing[:5]}")
        ids = ids.astype(np.uint32)
        ids.flags.writeable = False
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "segments", tuple(self.segments))

    @classmethod
    def from_ids(cls, ids: NDArray, taxonomy: Taxonomy = OASS18) -> PanopticMap:
        """Build the segment table from the ids present in the map."""
        segments = []
        for value in np.unique(ids):
            if value == VOID_ID:
                continue
            class_id, _ = decode_panoptic_id(int(value))
            segments.append(Segment(int(value), class_id, taxonomy.is_thing(class_id)))
        return cls(ids=ids, segments=tuple(segments))

    @property
    def height(self) -> int:
        return int(self.ids.shape[0])

    @property
    def width(self) -> int:
        return int(self.ids.shape[1])

    @property
    def shape(self) -> tuple[int, int]:
        return self.height, self.width

    @property
    def void(self) -> NDArray[np.bool_]:
        return self.ids == VOID_ID

    def segment(self, segment_id: int) -> Segment:
        for seg in self.segments:
            if seg.segment_id == segment_id:
                return seg
        raise ValueError(f"segment {segment_id} not in table")


@dataclass(frozen=True)
class AmodalPanopticMap:
    """Panoptic pixel map plus score-ordered full-region thing segments (may overlap)."""

    panoptic: PanopticMap
    instances: tuple[InstanceAnnotation, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "instances", tuple(self.instances))
        for i, inst in enumerate(self.instances):
            if inst.shape != self.panoptic.shape:
                raise ValueError(f"amodal segment {i} dims {inst.shape} differ from map {self.panoptic.shape}")

    @property
    def shape(self) -> tuple[int, int]:
        return self.panoptic.shape

    @property
    def segment_ids(self) -> tuple[int, ...]:
        """class*1000 + k, with k counting 1.. per class in list order."""
        counters: dict[int, int] = {}
        ids = []
        for inst in self.instances:
            counters[inst.category] = counters.get(inst.category, 0) + 1
            ids.append(encode_panoptic_id(inst.category, counters[inst.category]))
        return tuple(ids)

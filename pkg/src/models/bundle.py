"""The five OASS outputs of one image (used for predictions and ground truth)."""

from __future__ import annotations

from dataclasses import dataclass

from src.models.instances import InstanceAnnotation
from src.models.maps import AmodalPanopticMap, PanopticMap, SemanticMap


@dataclass(frozen=True)
class OassOutputs:
    semantic: SemanticMap
    instance: tuple[InstanceAnnotation, ...]
    amodal_instance: tuple[InstanceAnnotation, ...]
    panoptic: PanopticMap
    amodal_panoptic: AmodalPanopticMap

    def __post_init__(self) -> None:
        object.__setattr__(self, "instance", tuple(self.instance))
        object.__setattr__(self, "amodal_instance", tuple(self.amodal_instance))
        shape = self.semantic.shape
        if self.panoptic.shape != shape or self.amodal_panoptic.shape != shape:
            raise ValueError(f"output maps disagree on image dims {shape}")
        for i, inst in enumerate((*self.instance, *self.amodal_instance)):
            if inst.shape != shape:
                raise ValueError(f"instance {i} dims {inst.shape} differ from image dims {shape}")

    @property
    def shape(self) -> tuple[int, int]:
        return self.semantic.shape

    @classmethod
    def from_ground_truth(
        cls,
        semantic: SemanticMap,
        instances: list[InstanceAnnotation] | tuple[InstanceAnnotation, ...],
        panoptic: PanopticMap,
    ) -> OassOutputs:
        """Ground-truth bundle: annotations serve both instance tasks."""
        instances = tuple(instances)
        return cls(
            semantic=semantic,
            instance=instances,
            amodal_instance=instances,
            panoptic=panoptic,
            amodal_panoptic=AmodalPanopticMap(panoptic=panoptic, instances=instances),
        )

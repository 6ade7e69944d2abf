"""Occlusion-aware fusion of the semantic, instance and amodal-instance branches."""

from __future__ import annotations

from dataclasses import dataclass

from pydantic import BaseModel, ConfigDict, Field

from src.config import Config
from src.fusion.panoptic_fusion import fuse_amodal_panoptic, fuse_panoptic
from src.fusion.voting import vote_amodal_class, vote_instance_class
from src.models.bundle import OassOutputs
from src.models.instances import Detection, InstanceAnnotation, canonical_order
from src.models.maps import SemanticMap
from src.models.taxonomy import Taxonomy, get_taxonomy
from src.selftrain.pseudo_label import ProbTensor, pseudo_label
from src.utils.logging import get_logger

logger = get_logger()


class FusionConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    score_threshold: float = Field(default_factory=lambda: Config.SCORE_THRESHOLD, ge=0.0, le=1.0)
    min_area: int = Field(1, ge=1)
    overlap_threshold: float | None = Field(None, ge=0.0, le=1.0)
    min_stuff_area: int = Field(0, ge=0)
    taxonomy: str = "oass18"

    def fusion_options(self) -> dict:
        return {
            "min_area": self.min_area,
            "overlap_threshold": self.overlap_threshold,
            "min_stuff_area": self.min_stuff_area,
        }


@dataclass(frozen=True, eq=False)
class BranchOutputs:
    """Raw outputs of the three branches for one image."""

    semantic: SemanticMap | ProbTensor
    instances: tuple[Detection, ...]
    amodal_instances: tuple[Detection, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "instances", tuple(self.instances))
        object.__setattr__(self, "amodal_instances", tuple(self.amodal_instances))
        shape = self.semantic.shape
        for name in ("instances", "amodal_instances"):
            for i, det in enumerate(getattr(self, name)):
                if det.mask.shape != shape:
                    raise ValueError(f"{name}[{i}] dims {det.mask.shape} differ from semantic output {shape}")

    @classmethod
    def from_ground_truth(cls, gt: OassOutputs) -> BranchOutputs:
        """Branch outputs that reproduce a ground-truth bundle."""
        return cls(
            semantic=gt.semantic,
            instances=tuple(Detection(a.visible, a.score) for a in gt.instance),
            amodal_instances=tuple(Detection(a.amodal, a.score) for a in gt.amodal_instance),
        )


def _ordered(dets: tuple[Detection, ...], threshold: float) -> list[Detection]:
    kept = [d for d in dets if d.score >= threshold and not d.mask.is_empty]
    return [kept[i] for i in canonical_order(kept, mask_of=lambda d: d.mask, score_of=lambda d: d.score)]


def label_instances(dets: list[Detection], semantic: SemanticMap, taxonomy: Taxonomy) -> list[InstanceAnnotation]:
    labeled = []
    for det in dets:
        category = vote_instance_class(det.mask, semantic, taxonomy)
        if category is None:
            logger.debug(f"Dropped instance of {det.mask.area} px: no thing class under or around it")
            continue
        labeled.append(InstanceAnnotation.single_mask(category, det.score, det.mask))
    return labeled


def label_amodal_instances(
    dets: list[Detection], semantic: SemanticMap, taxonomy: Taxonomy
) -> list[InstanceAnnotation]:
    labeled = []
    for i, det in enumerate(dets):
        others = [d.mask for j, d in enumerate(dets) if j != i]
        category = vote_amodal_class(det.mask, others, semantic, taxonomy)
        if category is None:
            logger.debug(f"Dropped amodal instance of {det.mask.area} px: no thing class under or around it")
            continue
        labeled.append(InstanceAnnotation.single_mask(category, det.score, det.mask))
    return labeled


def run_oafusion(
    branches: BranchOutputs,
    score_threshold: float | None = None,
    config: FusionConfig | None = None,
) -> OassOutputs:
    """Produce the five OASS outputs from the three branch outputs."""
    config = config or FusionConfig()
    if score_threshold is not None:
        config = FusionConfig(**{**config.model_dump(), "score_threshold": score_threshold})
    taxonomy = get_taxonomy(config.taxonomy)

    semantic = branches.semantic
    if isinstance(semantic, ProbTensor):
        semantic = pseudo_label(semantic)
    if semantic.num_classes != taxonomy.num_classes:
        raise ValueError(
            f"semantic output has {semantic.num_classes} classes, taxonomy {taxonomy.name} has {taxonomy.num_classes}"
        )

    instances = label_instances(_ordered(branches.instances, config.score_threshold), semantic, taxonomy)
    amodal = label_amodal_instances(_ordered(branches.amodal_instances, config.score_threshold), semantic, taxonomy)

    panoptic = fuse_panoptic(semantic, instances, taxonomy, **config.fusion_options())
    amodal_panoptic = fuse_amodal_panoptic(semantic, amodal, taxonomy, panoptic=panoptic)
    logger.debug(
        f"Fused {len(instances)} instances, {len(amodal)} amodal instances, "
        f"{len(panoptic.segments)} panoptic segments"
    )
    return OassOutputs(
        semantic=semantic,
        instance=tuple(instances),
        amodal_instance=tuple(amodal),
        panoptic=panoptic,
        amodal_panoptic=amodal_panoptic,
    )

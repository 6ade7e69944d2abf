"""Seeded synthetic OASS scenes: stuff bands, occluding thing shapes and a perturbed prediction."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.ndimage import binary_erosion, shift

from src.config import Config
from src.fusion.oafusion import BranchOutputs, FusionConfig, run_oafusion
from src.metrics.reports import OassReport
from src.models.bundle import OassOutputs
from src.models.instances import Detection, InstanceAnnotation
from src.models.maps import PanopticMap, SemanticMap, encode_panoptic_id
from src.models.masks import BinaryMask
from src.models.taxonomy import Taxonomy, get_taxonomy
from src.synth.certificate import certify
from src.utils.logging import get_logger
from src.utils.parallel import ordered_map

logger = get_logger()

MIN_OCCLUSION = 0.1
MAX_OCCLUSION = 0.6


class SynthSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    height: int = Field(64, gt=0)
    width: int = Field(64, gt=0)
    min_objects: int = Field(1, ge=0)
    max_objects: int = Field(4, ge=0)
    occlusion_prob: float = Field(0.5, ge=0.0, le=1.0)
    perturbation: int = Field(0, ge=0)
    stuff_bands: int = Field(3, ge=1)
    min_size: int = Field(6, ge=2)
    max_size: int | None = Field(None, ge=2)
    max_retries: int = Field(200, ge=1)
    max_layouts: int = Field(20, ge=1)
    seed: int = Field(default_factory=lambda: Config.SEED, ge=0)
    taxonomy: str = "oass18"

    @model_validator(mode="after")
    def _check(self) -> SynthSpec:
        if self.min_objects > self.max_objects:
            raise ValueError(f"min_objects {self.min_objects} > max_objects {self.max_objects}")
        if self.min_size > min(self.height, self.width) or self.size_limit < self.min_size:
            raise ValueError(f"object size range [{self.min_size}, {self.size_limit}] does not fit the image")
        if self.stuff_bands > self.height:
            raise ValueError(f"{self.stuff_bands} stuff bands do not fit {self.height} rows")
        get_taxonomy(self.taxonomy)
        return self

    @property
    def size_limit(self) -> int:
        if self.max_size is not None:
            return min(self.max_size, self.height, self.width)
        return max(self.min_size, min(self.height, self.width) // 2)


@dataclass(frozen=True)
class SynthObject:
    category: int
    amodal: NDArray[np.bool_]
    occludes: int | None


@dataclass(frozen=True)
class SynthScene:
    gt: OassOutputs
    pred: OassOutputs
    certificate: OassReport
    occluded_pairs: tuple[tuple[int, int], ...]


def _stuff_bands(spec: SynthSpec, taxonomy: Taxonomy, rng: np.random.Generator) -> NDArray[np.uint8]:
    stuff = sorted(taxonomy.stuff_ids)
    cuts = np.sort(rng.choice(np.arange(1, spec.height), size=spec.stuff_bands - 1, replace=False))
    classes = rng.choice(stuff, size=spec.stuff_bands, replace=spec.stuff_bands > len(stuff))
    labels = np.zeros((spec.height, spec.width), dtype=np.uint8)
    for band, (top, bottom) in enumerate(zip(np.r_[0, cuts], np.r_[cuts, spec.height], strict=True)):
        labels[top:bottom] = classes[band]
    return labels


def _shape(spec: SynthSpec, rng: np.random.Generator, near: NDArray[np.bool_] | None = None) -> NDArray[np.bool_]:
    """Random rectangle or ellipse; with ``near`` its box overlaps the box of that mask."""
    h = int(rng.integers(spec.min_size, spec.size_limit + 1))
    w = int(rng.integers(spec.min_size, spec.size_limit + 1))
    if near is None:
        top = int(rng.integers(0, spec.height - h + 1))
        left = int(rng.integers(0, spec.width - w + 1))
    else:
        rows = np.flatnonzero(near.any(axis=1))
        cols = np.flatnonzero(near.any(axis=0))
        top = int(np.clip(rng.integers(rows[0] - h + 1, rows[-1] + 1), 0, spec.height - h))
        left = int(np.clip(rng.integers(cols[0] - w + 1, cols[-1] + 1), 0, spec.width - w))
    mask = np.zeros((spec.height, spec.width), dtype=bool)
    if rng.random() < 0.5:
        mask[top : top + h, left : left + w] = True
        return mask
    yy, xx = np.mgrid[0:h, 0:w]
    cy, cx = (h - 1) / 2, (w - 1) / 2
    mask[top : top + h, left : left + w] = ((yy - cy) / (h / 2)) ** 2 + ((xx - cx) / (w / 2)) ** 2 <= 1.0
    return mask


def _exclusive_regions_ok(masks: list[NDArray[np.bool_]]) -> bool:
    for i, mask in enumerate(masks):
        others = np.zeros_like(mask)
        for j, other in enumerate(masks):
            if j != i:
                others |= other
        if not (mask & ~others).any():
            return False
    return True


def _try_layout(
    spec: SynthSpec, taxonomy: Taxonomy, rng: np.random.Generator, truncate: bool
) -> list[SynthObject] | None:
    """One layout attempt; None when an object cannot be placed.

    With ``truncate`` the layout instead stops at the first object that does not
    fit, provided ``min_objects`` are already placed.
    """
    things = sorted(taxonomy.thing_ids)
    count = int(rng.integers(spec.min_objects, spec.max_objects + 1))
    objects: list[SynthObject] = []
    occluded: set[int] = set()
    for i in range(count):
        eligible = [j for j in range(len(objects)) if j not in occluded]
        target = None
        if eligible and rng.random() < spec.occlusion_prob:
            target = int(rng.choice(eligible))
        placed = None
        for _ in range(spec.max_retries):
            near = objects[target].amodal if target is not None else None
            mask = _shape(spec, rng, near)
            others = [o.amodal for j, o in enumerate(objects) if j != target]
            if any((mask & other).any() for other in others):
                continue
            if target is not None:
                covered = np.sum(mask & near) / np.sum(near)
                if not MIN_OCCLUSION <= covered <= MAX_OCCLUSION:
                    continue
            if not _exclusive_regions_ok([o.amodal for o in objects] + [mask]):
                continue
            placed = mask
            break
        if placed is None:
            logger.debug(f"Seed {spec.seed}: object {i} did not fit after {spec.max_retries} tries")
            return objects if truncate and i >= spec.min_objects else None
        if target is not None:
            occluded.add(target)
        objects.append(SynthObject(category=int(rng.choice(things)), amodal=placed, occludes=target))
    return objects


def _place_objects(spec: SynthSpec, taxonomy: Taxonomy, rng: np.random.Generator) -> list[SynthObject]:
    """Thing layout for the scene.

    The first layout draws from the scene generator; a failed layout is redrawn
    from the sub-seed (seed, attempt), and the last attempt keeps the objects
    placed before the first misfit.
    """
    for attempt in range(spec.max_layouts):
        layout_rng = rng if attempt == 0 else np.random.default_rng([spec.seed, attempt])
        objects = _try_layout(spec, taxonomy, layout_rng, truncate=attempt == spec.max_layouts - 1)
        if objects is not None:
            if attempt:
                logger.debug(f"Seed {spec.seed}: layout {attempt} placed {len(objects)} objects")
            return objects
    raise ValueError(
        f"could not place {spec.min_objects} objects in {spec.max_layouts} layouts (seed {spec.seed})"
    )


def _visible(amodals: list[NDArray[np.bool_]]) -> list[NDArray[np.bool_]]:
    """Later objects are painted on top."""
    visible = []
    for i, mask in enumerate(amodals):
        above = np.zeros_like(mask)
        for later in amodals[i + 1 :]:
            above |= later
        visible.append(mask & ~above)
    return visible


def _paint(bands: NDArray[np.uint8], categories: list[int], visible: list[NDArray[np.bool_]]) -> NDArray[np.uint8]:
    labels = bands.copy()
    for category, mask in zip(categories, visible, strict=True):
        labels[mask] = category
    return labels


def _ground_truth(bands, objects: list[SynthObject], taxonomy: Taxonomy) -> OassOutputs:
    amodals = [o.amodal for o in objects]
    visible = _visible(amodals)
    categories = [o.category for o in objects]
    ids = np.zeros(bands.shape, dtype=np.uint32)
    for c in np.unique(bands):
        ids[bands == c] = encode_panoptic_id(int(c), 1)
    counters: dict[int, int] = {}
    instances = []
    for category, vis, amodal in zip(categories, visible, amodals, strict=True):
        counters[category] = counters.get(category, 0) + 1
        ids[vis] = encode_panoptic_id(category, counters[category])
        instances.append(
            InstanceAnnotation(category, 1.0, BinaryMask.from_dense(vis), BinaryMask.from_dense(amodal))
        )
    semantic = SemanticMap(_paint(bands, categories, visible), taxonomy.num_classes)
    return OassOutputs.from_ground_truth(semantic, instances, PanopticMap.from_ids(ids, taxonomy))


def _perturb(mask: NDArray[np.bool_], magnitude: int, rng: np.random.Generator) -> NDArray[np.bool_]:
    if magnitude == 0:
        return mask
    if rng.random() < 0.5:
        dy, dx = (int(v) for v in rng.integers(-magnitude, magnitude + 1, size=2))
        return shift(mask.astype(np.uint8), (dy, dx), order=0, cval=0).astype(bool)
    return binary_erosion(mask, iterations=magnitude)


def _prediction(bands, objects: list[SynthObject], spec: SynthSpec, rng: np.random.Generator) -> OassOutputs:
    amodals = [_perturb(o.amodal, spec.perturbation, rng) for o in objects]
    visible = _visible(amodals)
    scores = rng.uniform(0.5, 1.0, size=len(objects))
    taxonomy = get_taxonomy(spec.taxonomy)
    semantic = SemanticMap(_paint(bands, [o.category for o in objects], visible), taxonomy.num_classes)
    branches = BranchOutputs(
        semantic=semantic,
        instances=tuple(
            Detection(BinaryMask.from_dense(v), float(s)) for v, s in zip(visible, scores, strict=True) if v.any()
        ),
        amodal_instances=tuple(
            Detection(BinaryMask.from_dense(a), float(s)) for a, s in zip(amodals, scores, strict=True) if a.any()
        ),
    )
    return run_oafusion(branches, config=FusionConfig(score_threshold=0.0, taxonomy=spec.taxonomy))


def synth_scene(spec: SynthSpec) -> SynthScene:
    """Ground truth, its perturbed fused prediction and the brute-force certificate."""
    taxonomy = get_taxonomy(spec.taxonomy)
    rng = np.random.default_rng(spec.seed)
    bands = _stuff_bands(spec, taxonomy, rng)
    objects = _place_objects(spec, taxonomy, rng)
    gt = _ground_truth(bands, objects, taxonomy)
    pred = _prediction(bands, objects, spec, rng)
    certificate = certify({"scene": pred}, {"scene": gt}, taxonomy)
    pairs = tuple((o.occludes, i) for i, o in enumerate(objects) if o.occludes is not None)
    return SynthScene(gt=gt, pred=pred, certificate=certificate, occluded_pairs=pairs)


def synth_dataset(spec: SynthSpec, count: int, threads: int = 1, progress: bool = False) -> dict[str, SynthScene]:
    """``count`` scenes with seeds spec.seed, spec.seed + 1, ..., keyed ``synth_0000``..."""
    if count < 1:
        raise ValueError(f"scene count must be >= 1, got {count}")
    specs = [SynthSpec(**{**spec.model_dump(), "seed": spec.seed + i}) for i in range(count)]
    scenes = ordered_map(synth_scene, specs, threads=threads, desc="synth", progress=progress, processes=True)
    logger.info(f"Generated {count} synthetic scenes from seed {spec.seed}")
    return {f"synth_{i:04d}": scene for i, scene in enumerate(scenes)}

"""Amodal-oriented mix: mask thing regions of a source image with randomly
scaled and placed amodal shapes, then class-mix the result onto a target image.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass
from enum import Enum

import numpy as np
from numpy.typing import NDArray
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.config import Config
from src.models.maps import SemanticMap
from src.models.masks import BinaryMask, union_of
from src.models.taxonomy import IGNORE_LABEL
from src.utils.logging import get_logger

logger = get_logger()


class AoMixStrategy(str, Enum):
    AOMIX = "aomix"
    SOURCE_ONLY = "source_only"
    MIXED_ONLY = "mixed_only"
    WHOLE_IMAGE = "whole_image"
    PATCH = "patch"


class AoMixConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    scale_min: float = Field(default_factory=lambda: Config.SCALE_MIN, gt=0.0, le=1.0)
    scale_max: float = Field(default_factory=lambda: Config.SCALE_MAX, gt=0.0, le=1.0)
    fill_value: tuple[int, ...] = (0, 0, 0)
    seed: int = Field(default_factory=lambda: Config.SEED)
    class_fraction: float = Field(0.5, gt=0.0, le=1.0)
    strategy: AoMixStrategy = AoMixStrategy.AOMIX
    patch_size: int = Field(32, ge=1)
    patch_ratio: float = Field(0.5, gt=0.0, le=1.0)

    @model_validator(mode="after")
    def _check(self) -> AoMixConfig:
        if self.scale_min > self.scale_max:
            raise ValueError(f"scale_min {self.scale_min} exceeds scale_max {self.scale_max}")
        if not self.fill_value or any(not 0 <= v <= 255 for v in self.fill_value):
            raise ValueError(f"fill_value entries must be in [0, 255], got {self.fill_value}")
        return self


@dataclass(frozen=True, eq=False)
class MixResult:
    """One mix step.

    ``provenance`` is True exactly where the mixed pixel came from the pasted
    source image, which is ``masked_source`` under the default strategy.
    """

    masked_source: NDArray[np.uint8]
    mixed_image: NDArray[np.uint8]
    mixed_label: SemanticMap
    provenance: NDArray[np.bool_]
    random_mask: BinaryMask | None = None
    selected_classes: tuple[int, ...] = ()


def _nearest_indices(src: int, dst: int) -> NDArray[np.intp]:
    return np.minimum(((np.arange(dst) + 0.5) * src / dst).astype(np.intp), src - 1)


def random_scale(m: BinaryMask, cfg: AoMixConfig, rng: np.random.Generator) -> BinaryMask:
    """Resample the mask's box content to a random height fraction of the image.

    The aspect ratio is kept. Content that would come out wider than the image
    is shrunk on both axes to the image width, so its height can fall short of
    the drawn fraction. The result stays at the original box corner, shifted
    inward to fit the image.
    """
    if m.is_empty:
        raise ValueError("cannot scale an empty mask")
    top, left, bottom, right = m.bbox()
    content = m.crop(top, left, bottom, right)
    h0, w0 = content.shape
    scale = float(rng.uniform(cfg.scale_min, cfg.scale_max))
    new_h = min(max(1, round(scale * m.height)), m.height)
    new_w = max(1, round(w0 * new_h / h0))
    if new_w > m.width:
        new_w = m.width
        new_h = min(max(1, round(h0 * new_w / w0)), m.height)
    scaled = content[np.ix_(_nearest_indices(h0, new_h), _nearest_indices(w0, new_w))]
    out = np.zeros(m.shape, dtype=bool)
    row, col = min(top, m.height - new_h), min(left, m.width - new_w)
    out[row : row + new_h, col : col + new_w] = scaled
    return BinaryMask.from_dense(out)


def random_pad(m: BinaryMask, height: int, width: int, rng: np.random.Generator) -> BinaryMask:
    """Place the mask's box content at a uniformly random offset in a ``height``×``width`` grid."""
    if m.is_empty:
        return BinaryMask.empty(height, width)
    top, left, bottom, right = m.bbox()
    h, w = bottom - top, right - left
    if h > height or w > width:
        raise ValueError(f"mask content {h}x{w} does not fit a {height}x{width} image")
    row = int(rng.integers(0, height - h + 1))
    col = int(rng.integers(0, width - w + 1))
    out = np.zeros((height, width), dtype=bool)
    out[row : row + h, col : col + w] = m.crop(top, left, bottom, right)
    return BinaryMask.from_dense(out)


def build_random_mask(
    seq: Sequence[BinaryMask],
    cfg: AoMixConfig,
    rng: np.random.Generator,
    height: int | None = None,
    width: int | None = None,
) -> BinaryMask:
    """Step function of the summed scaled-and-placed amodal masks."""
    if not seq:
        raise ValueError("random mask needs at least one amodal mask")
    height = seq[0].height if height is None else height
    width = seq[0].width if width is None else width
    total = np.zeros((height, width), dtype=np.int32)
    for mask in seq:
        if mask.is_empty:
            continue
        total += random_pad(random_scale(mask, cfg, rng), height, width, rng).dense
    return BinaryMask.from_dense(total >= 1)


def build_patch_mask(height: int, width: int, cfg: AoMixConfig, rng: np.random.Generator) -> BinaryMask:
    """Random square-patch mask: each grid cell is kept with probability ``patch_ratio``."""
    rows = math.ceil(height / cfg.patch_size)
    cols = math.ceil(width / cfg.patch_size)
    cells = rng.random((rows, cols)) < cfg.patch_ratio
    grid = np.kron(cells, np.ones((cfg.patch_size, cfg.patch_size), dtype=bool))
    return BinaryMask.from_dense(grid[:height, :width])


def _check_image(image: NDArray, shape: tuple[int, int], name: str) -> NDArray[np.uint8]:
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[:2] != shape:
        raise ValueError(f"{name} must be {shape[0]}x{shape[1]}xC, got shape {image.shape}")
    return image


def mask_source_image(
    x_s: NDArray[np.uint8],
    amodal_masks: Sequence[BinaryMask],
    random_mask: BinaryMask,
    cfg: AoMixConfig,
) -> NDArray[np.uint8]:
    """Fill the source pixels inside M_r ∩ M_s (M_r alone for the whole-image variant)."""
    x_s = _check_image(x_s, random_mask.shape, "source image")
    if len(cfg.fill_value) != x_s.shape[2]:
        raise ValueError(f"fill value has {len(cfg.fill_value)} channels, image has {x_s.shape[2]}")
    region = random_mask.to_dense()
    if cfg.strategy is not AoMixStrategy.WHOLE_IMAGE:
        region &= union_of(list(amodal_masks), *random_mask.shape)
    out = x_s.copy()
    out[region] = np.asarray(cfg.fill_value, dtype=x_s.dtype)
    return out


def class_mix(
    x_hat_s: NDArray[np.uint8],
    y_s: SemanticMap,
    x_t: NDArray[np.uint8],
    cfg: AoMixConfig,
    rng: np.random.Generator,
    target_label: SemanticMap | None = None,
) -> MixResult:
    """Paste the pixels of ⌈k·class_fraction⌉ randomly chosen source classes onto the target.

    Non-transplanted pixels are labeled from ``target_label`` when given,
    otherwise 255.
    """
    x_hat_s = _check_image(x_hat_s, y_s.shape, "masked source image")
    x_t = _check_image(x_t, y_s.shape, "target image")
    if x_hat_s.shape != x_t.shape:
        raise ValueError(f"source {x_hat_s.shape} and target {x_t.shape} images differ")
    if target_label is not None and target_label.shape != y_s.shape:
        raise ValueError(f"target label dims {target_label.shape} differ from {y_s.shape}")

    classes = y_s.classes_present()
    count = math.ceil(len(classes) * cfg.class_fraction)
    selected = tuple(sorted(int(c) for c in rng.choice(classes, size=count, replace=False))) if count else ()
    provenance = np.isin(y_s.labels, selected)
    mixed = np.where(provenance[..., None], x_hat_s, x_t)
    fallback = target_label.labels if target_label is not None else np.full(y_s.shape, IGNORE_LABEL, np.uint8)
    mixed_label = SemanticMap(labels=np.where(provenance, y_s.labels, fallback), num_classes=y_s.num_classes)
    return MixResult(
        masked_source=x_hat_s,
        mixed_image=mixed,
        mixed_label=mixed_label,
        provenance=provenance,
        selected_classes=selected,
    )


def run_aomix(
    x_s: NDArray[np.uint8],
    y_s: SemanticMap,
    source_amodal: Sequence[BinaryMask],
    x_t: NDArray[np.uint8],
    batch_amodal: Sequence[BinaryMask],
    cfg: AoMixConfig | None = None,
    rng: np.random.Generator | None = None,
    target_label: SemanticMap | None = None,
) -> MixResult:
    """Full AoMix step for one source/target pair.

    ``batch_amodal`` are the amodal masks of the batch image sampled for M_r
    (it may be the source image itself).
    """
    cfg = cfg or AoMixConfig()
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    height, width = y_s.shape

    if cfg.strategy is AoMixStrategy.PATCH:
        random_mask = build_patch_mask(height, width, cfg, rng)
    elif any(not m.is_empty for m in batch_amodal):
        random_mask = build_random_mask(batch_amodal, cfg, rng, height, width)
    else:
        logger.debug("Sampled batch image has no amodal instances; source left unmasked")
        random_mask = BinaryMask.empty(height, width)

    masked = mask_source_image(x_s, source_amodal, random_mask, cfg)
    source_view = x_s if cfg.strategy is AoMixStrategy.MIXED_ONLY else masked
    mix_input = x_s if cfg.strategy is AoMixStrategy.SOURCE_ONLY else masked

    result = class_mix(mix_input, y_s, x_t, cfg, rng, target_label)
    return MixResult(
        masked_source=source_view,
        mixed_image=result.mixed_image,
        mixed_label=result.mixed_label,
        provenance=result.provenance,
        random_mask=random_mask,
        selected_classes=result.selected_classes,
    )

"""PNG codecs for semantic maps (8-bit), panoptic maps (16-bit) and RGB images."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from numpy.typing import NDArray
from PIL import Image

from src.models.maps import PanopticMap, SemanticMap
from src.models.taxonomy import OASS18, Taxonomy

PANOPTIC_MAX_ID = 0xFFFF


def _read(path: str | Path) -> tuple[str, NDArray]:
    """(mode, pixel array) of an image file."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    try:
        with Image.open(path) as img:
            return img.mode, np.array(img)
    except OSError as e:
        raise ValueError(f"{path}: unreadable image ({e})") from e


def save_semantic(semantic: SemanticMap, path: str | Path) -> Path:
    path = Path(path)
    Image.fromarray(np.ascontiguousarray(semantic.labels, dtype=np.uint8)).save(path, format="PNG")
    return path


def load_semantic(path: str | Path, taxonomy: Taxonomy = OASS18) -> SemanticMap:
    """8-bit single-channel PNG; pixel = class id, 255 = ignore."""
    mode, pixels = _read(path)
    if mode != "L":
        raise ValueError(f"{path}: semantic PNG must be 8-bit single-channel (mode L), got mode {mode}")
    try:
        return SemanticMap(labels=pixels.astype(np.uint8), num_classes=taxonomy.num_classes)
    except ValueError as e:
        raise ValueError(f"{path}: {e}") from e


def save_panoptic(panoptic: PanopticMap, path: str | Path) -> Path:
    path = Path(path)
    if int(panoptic.ids.max()) > PANOPTIC_MAX_ID:
        raise ValueError(f"panoptic id {int(panoptic.ids.max())} does not fit a 16-bit PNG")
    Image.fromarray(panoptic.ids.astype(np.uint16)).save(path, format="PNG")
    return path


def load_panoptic(path: str | Path, taxonomy: Taxonomy = OASS18) -> PanopticMap:
    """16-bit single-channel PNG; pixel = class*1000 + index, 0 = void."""
    mode, ids = _read(path)
    if mode not in ("I;16", "I"):
        raise ValueError(f"{path}: panoptic PNG must be 16-bit single-channel, got mode {mode}")
    ids = ids.astype(np.int64)
    if ids.min() < 0 or ids.max() > PANOPTIC_MAX_ID:
        raise ValueError(f"{path}: panoptic ids outside the 16-bit range")
    classes = np.unique(ids[ids > 0] // 1000)
    if classes.size and int(classes.max()) >= taxonomy.num_classes:
        raise ValueError(f"{path}: class {int(classes.max())} is not in taxonomy {taxonomy.name}")
    return PanopticMap.from_ids(ids.astype(np.uint32), taxonomy)


def save_image(image: NDArray[np.uint8], path: str | Path) -> Path:
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[2] != 3 or image.dtype != np.uint8:
        raise ValueError(f"image must be an H×W×3 uint8 array, got {image.dtype} {image.shape}")
    path = Path(path)
    Image.fromarray(image).save(path, format="PNG")
    return path


def load_image(path: str | Path) -> NDArray[np.uint8]:
    mode, pixels = _read(path)
    if mode != "RGB":
        raise ValueError(f"{path}: image must be 8-bit RGB, got mode {mode}")
    return pixels.astype(np.uint8)

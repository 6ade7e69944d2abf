"""Colour-map rendering of semantic and panoptic maps with the taxonomy palette."""

from __future__ import annotations

import numpy as np
from numpy.typing import NDArray
from scipy.ndimage import generate_binary_structure, grey_dilation, grey_erosion

from src.models.maps import VOID_ID, PanopticMap, SemanticMap
from src.models.taxonomy import IGNORE_LABEL, OASS18, Taxonomy

BOUNDARY_SHADE = 0.5


def palette_array(taxonomy: Taxonomy = OASS18) -> NDArray[np.uint8]:
    """(num_classes, 3) colours indexed by class id."""
    return np.array([info.color for info in taxonomy.classes], dtype=np.uint8)


def _lookup(class_ids: NDArray, palette: NDArray[np.uint8], blank: NDArray[np.bool_]) -> NDArray[np.uint8]:
    outside = ~blank & (class_ids >= len(palette))
    if outside.any():
        raise ValueError(f"class {int(class_ids[outside].max())} has no palette colour ({len(palette)} colours)")
    rgb = np.zeros((*class_ids.shape, 3), dtype=np.uint8)
    rgb[~blank] = palette[class_ids[~blank]]
    return rgb


def instance_boundaries(ids: NDArray) -> NDArray[np.bool_]:
    """Pixels with a 4-neighbour of a different segment id."""
    cross = generate_binary_structure(2, 1)
    ids = ids.astype(np.int64)
    return (grey_dilation(ids, footprint=cross, mode="nearest") != ids) | (
        grey_erosion(ids, footprint=cross, mode="nearest") != ids
    )


def render_colormap(label_map: SemanticMap | PanopticMap, taxonomy: Taxonomy = OASS18) -> NDArray[np.uint8]:
    """H×W×3 RGB image; ignore and void pixels are black, thing outlines are darkened."""
    palette = palette_array(taxonomy)
    if isinstance(label_map, SemanticMap):
        labels = label_map.labels.astype(np.int64)
        return _lookup(labels, palette, labels == IGNORE_LABEL)
    if isinstance(label_map, PanopticMap):
        ids = label_map.ids.astype(np.int64)
        void = ids == VOID_ID
        classes = ids // 1000
        rgb = _lookup(classes, palette, void)
        thing_ids = np.array(sorted(taxonomy.thing_ids), dtype=np.int64)
        outline = instance_boundaries(ids) & ~void & np.isin(classes, thing_ids)
        rgb[outline] = (rgb[outline] * BOUNDARY_SHADE).astype(np.uint8)
        return rgb
    raise ValueError(f"cannot render {type(label_map).__name__}; expected a SemanticMap or PanopticMap")

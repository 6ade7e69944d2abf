"""On-disk dataset layout: one set of files per image id in a flat directory.

``{id}_semantic.png``, ``{id}_instances.json`` and ``{id}_panoptic.png`` are
required; ``{id}_image.png`` and ``{id}_amodal.json`` are optional. Without an
amodal file the instances serve both instance tasks (ground-truth layout), and
the k-th instance of class c is panoptic segment c*1000+k.
"""

from __future__ import annotations

from pathlib import Path

from src.formats.instances_json import load_instances, save_instances
from src.formats.png_maps import load_panoptic, load_semantic, save_image, save_panoptic, save_semantic
from src.models.bundle import OassOutputs
from src.models.maps import AmodalPanopticMap
from src.models.taxonomy import OASS18, Taxonomy
from src.utils.logging import get_logger
from src.utils.parallel import ordered_map

logger = get_logger()

SUFFIXES = {
    "image": "_image.png",
    "semantic": "_semantic.png",
    "instances": "_instances.json",
    "panoptic": "_panoptic.png",
    "amodal": "_amodal.json",
}
REQUIRED = ("semantic", "instances", "panoptic")


class DatasetLayout:
    def __init__(self, root: str | Path, taxonomy: Taxonomy = OASS18):
        self.root = Path(root)
        self.taxonomy = taxonomy

    def path(self, image_id: str, kind: str) -> Path:
        return self.root / f"{image_id}{SUFFIXES[kind]}"

    def image_ids(self) -> list[str]:
        """Sorted ids of every complete image entry; incomplete entries are an error."""
        if not self.root.is_dir():
            raise FileNotFoundError(f"dataset directory not found: {self.root}")
        ids = set()
        for kind in REQUIRED:
            suffix = SUFFIXES[kind]
            ids.update(p.name[: -len(suffix)] for p in self.root.glob(f"*{suffix}"))
        for image_id in sorted(ids):
            missing = [kind for kind in REQUIRED if not self.path(image_id, kind).is_file()]
            if missing:
                raise ValueError(f"image '{image_id}' in {self.root} is missing: {', '.join(missing)}")
        return sorted(ids)

    def load(self, image_id: str) -> OassOutputs:
        semantic = load_semantic(self.path(image_id, "semantic"), self.taxonomy)
        panoptic = load_panoptic(self.path(image_id, "panoptic"), self.taxonomy)
        dims, instances = load_instances(self.path(image_id, "instances"))
        if dims != semantic.shape or panoptic.shape != semantic.shape:
            raise ValueError(f"image '{image_id}': files disagree on image dims")
        amodal_path = self.path(image_id, "amodal")
        if not amodal_path.is_file():
            return OassOutputs.from_ground_truth(semantic, instances, panoptic)
        amodal_dims, amodal = load_instances(amodal_path)
        if amodal_dims != semantic.shape:
            raise ValueError(f"image '{image_id}': amodal file dims {amodal_dims} differ from {semantic.shape}")
        return OassOutputs(
            semantic=semantic,
            instance=tuple(instances),
            amodal_instance=tuple(amodal),
            panoptic=panoptic,
            amodal_panoptic=AmodalPanopticMap(panoptic=panoptic, instances=tuple(amodal)),
        )

    def load_all(self, threads: int = 1, progress: bool = False) -> dict[str, OassOutputs]:
        ids = self.image_ids()
        bundles = ordered_map(self.load, ids, threads=threads, desc=f"load {self.root.name}", progress=progress)
        logger.info(f"Loaded {len(ids)} images from {self.root}")
        return dict(zip(ids, bundles, strict=True))

    def save(self, image_id: str, outputs: OassOutputs, image=None) -> list[Path]:
        """Write one bundle; the amodal file is written only when it differs from the instances."""
        self.root.mkdir(parents=True, exist_ok=True)
        h, w = outputs.shape
        written = [
            save_semantic(outputs.semantic, self.path(image_id, "semantic")),
            save_instances(h, w, list(outputs.instance), self.path(image_id, "instances")),
            save_panoptic(outputs.panoptic, self.path(image_id, "panoptic")),
        ]
        if outputs.amodal_instance != outputs.instance:
            written.append(save_instances(h, w, list(outputs.amodal_instance), self.path(image_id, "amodal")))
        if image is not None:
            written.append(save_image(image, self.path(image_id, "image")))
        return written

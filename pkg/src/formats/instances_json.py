"""Instance annotations and class-agnostic detections as JSON with RLE masks.

Layout::

    {"height": H, "width": W,
     "instances": [{"category": c, "score": s, "visible": [runs], "amodal": [runs]}]}

``amodal`` may be omitted for unoccluded objects (it then equals ``visible``);
``category`` may be omitted only in detection files.
"""

from __future__ import annotations

import json
from pathlib import Path

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from src.models.instances import Detection, InstanceAnnotation, MaskSelector
from src.models.masks import BinaryMask


class InstanceRecord(BaseModel):
    model_config = ConfigDict(extra="forbid")

    category: int | None = Field(None, ge=0)
    score: float = Field(ge=0.0, le=1.0)
    visible: list[int]
    amodal: list[int] | None = None


class InstancesFile(BaseModel):
    model_config = ConfigDict(extra="forbid")

    height: int = Field(gt=0)
    width: int = Field(gt=0)
    instances: list[InstanceRecord] = Field(default_factory=list)


def _read_file(path: str | Path) -> InstancesFile:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    try:
        return InstancesFile.model_validate_json(path.read_text(encoding="utf-8"))
    except ValidationError as e:
        raise ValueError(f"{path}: malformed instances file: {e}") from e


def _masks(record: InstanceRecord, doc: InstancesFile) -> tuple[BinaryMask, BinaryMask]:
    visible = BinaryMask(doc.height, doc.width, tuple(record.visible))
    amodal = visible if record.amodal is None else BinaryMask(doc.height, doc.width, tuple(record.amodal))
    return visible, amodal


def load_instances(path: str | Path) -> tuple[tuple[int, int], list[InstanceAnnotation]]:
    """Image dims and annotations; visible ⊆ amodal is checked per instance."""
    doc = _read_file(path)
    annotations = []
    for i, record in enumerate(doc.instances):
        try:
            if record.category is None:
                raise ValueError("missing category")
            visible, amodal = _masks(record, doc)
            annotations.append(InstanceAnnotation(record.category, record.score, visible, amodal))
        except ValueError as e:
            raise ValueError(f"{path}: instance {i}: {e}") from e
    return (doc.height, doc.width), annotations


def load_detections(
    path: str | Path, selector: MaskSelector = MaskSelector.VISIBLE
) -> tuple[tuple[int, int], list[Detection]]:
    """Class-agnostic detections; ``selector`` picks which stored mask is the proposal."""
    doc = _read_file(path)
    detections = []
    for i, record in enumerate(doc.instances):
        try:
            visible, amodal = _masks(record, doc)
            detections.append(Detection(amodal if selector is MaskSelector.AMODAL else visible, record.score))
        except ValueError as e:
            raise ValueError(f"{path}: instance {i}: {e}") from e
    return (doc.height, doc.width), detections


def instances_document(height: int, width: int, annotations: list[InstanceAnnotation]) -> dict:
    for i, ann in enumerate(annotations):
        if ann.shape != (height, width):
            raise ValueError(f"instance {i} dims {ann.shape} differ from {height}x{width}")
    return {
        "height": height,
        "width": width,
        "instances": [
            {"category": a.category, "score": a.score, "visible": list(a.visible.runs), "amodal": list(a.amodal.runs)}
            for a in annotations
        ],
    }


def save_instances(height: int, width: int, annotations: list[InstanceAnnotation], path: str | Path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(instances_document(height, width, list(annotations))), encoding="utf-8")
    return path


def save_detections(height: int, width: int, detections: list[Detection], path: str | Path) -> Path:
    path = Path(path)
    for i, det in enumerate(detections):
        if det.mask.shape != (height, width):
            raise ValueError(f"detection {i} dims {det.mask.shape} differ from {height}x{width}")
    doc = {
        "height": height,
        "width": width,
        "instances": [{"score": d.score, "visible": list(d.mask.runs)} for d in detections],
    }
    path.write_text(json.dumps(doc), encoding="utf-8")
    return path

"""Pseudo-labels, confidence weights and the weighted target loss."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.config import Config
from src.models.maps import SemanticMap
from src.models.taxonomy import IGNORE_LABEL

PROB_ATOL = 1e-6


@dataclass(frozen=True, eq=False)
class ProbTensor:
    """Per-pixel class probabilities, shape (height, width, channels)."""

    values: NDArray[np.float64]
    atol: float = PROB_ATOL

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 3 or min(values.shape) == 0:
            raise ValueError(f"probabilities must be H×W×C with positive dims, got shape {values.shape}")
        if values.shape[2] > IGNORE_LABEL:
            raise ValueError(f"at most {IGNORE_LABEL} classes supported, got {values.shape[2]}")
        if not np.isfinite(values).all() or (values < 0).any():
            raise ValueError("probabilities must be finite and non-negative")
        sums = values.sum(axis=2)
        worst = float(np.abs(sums - 1.0).max())
        if worst > self.atol:
            raise ValueError(f"per-pixel probabilities must sum to 1 (max deviation {worst:.3g})")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def height(self) -> int:
        return int(self.values.shape[0])

    @property
    def width(self) -> int:
        return int(self.values.shape[1])

    @property
    def channels(self) -> int:
        return int(self.values.shape[2])

    @property
    def shape(self) -> tuple[int, int]:
        return self.height, self.width


class SelfTrainConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    tau: float = Field(default_factory=lambda: Config.TAU, gt=0.0, lt=1.0)
    eta: float = Field(default_factory=lambda: Config.ETA, gt=0.0, lt=1.0)
    ignore_above: int = Field(default_factory=lambda: Config.IGNORE_ABOVE, ge=0)
    ignore_below: int = Field(default_factory=lambda: Config.IGNORE_BELOW, ge=0)
    # margins are measured in rows of the square training crop
    crop_size: int = Field(default_factory=lambda: Config.CROP_SIZE, gt=0)

    @model_validator(mode="after")
    def _check_margins(self) -> SelfTrainConfig:
        if self.ignore_above + self.ignore_below >= self.crop_size:
            raise ValueError(
                f"margins {self.ignore_above}+{self.ignore_below} leave no rows of a {self.crop_size}-px crop"
            )
        return self


def pseudo_label(teacher_probs: ProbTensor) -> SemanticMap:
    """Per-pixel argmax; the lowest class index wins ties."""
    labels = np.argmax(teacher_probs.values, axis=2).astype(np.uint8)
    return SemanticMap(labels=labels, num_classes=teacher_probs.channels)


def confidence_weight(teacher_probs: ProbTensor, tau: float) -> float:
    """Fraction of pixels whose top probability is strictly above ``tau``."""
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau must be in (0, 1), got {tau}")
    confident = teacher_probs.values.max(axis=2) > tau
    return float(np.count_nonzero(confident) / confident.size)


def margin_ignore_mask(height: int, width: int, cfg: SelfTrainConfig | None = None) -> NDArray[np.bool_]:
    """Rows excluded from the target loss: ``ignore_above`` at the top, ``ignore_below`` at the bottom."""
    cfg = cfg or SelfTrainConfig()
    if height <= 0 or width <= 0:
        raise ValueError(f"dims must be positive, got {height}x{width}")
    mask = np.zeros((height, width), dtype=bool)
    mask[: min(cfg.ignore_above, height)] = True
    if cfg.ignore_below > 0:
        mask[max(height - cfg.ignore_below, 0) :] = True
    return mask


def target_loss(
    student_probs: ProbTensor,
    pseudo: SemanticMap,
    omega: float,
    ignore_mask: NDArray[np.bool_] | None = None,
) -> float:
    """ω-weighted mean cross-entropy of the student at the pseudo-label classes.

    Pixels in ``ignore_mask`` or labeled 255 are skipped; 0 when all are skipped.
    """
    if student_probs.shape != pseudo.shape:
        raise ValueError(f"dims differ: probabilities {student_probs.shape} vs pseudo-labels {pseudo.shape}")
    if not 0.0 <= omega <= 1.0:
        raise ValueError(f"omega must be in [0, 1], got {omega}")
    keep = pseudo.labels != IGNORE_LABEL
    if ignore_mask is not None:
        if ignore_mask.shape != pseudo.shape:
            raise ValueError(f"ignore mask dims {ignore_mask.shape} differ from {pseudo.shape}")
        keep &= ~ignore_mask
    if omega == 0.0 or not keep.any():
        return 0.0
    labels = pseudo.labels[keep].astype(np.int64)
    if labels.max() >= student_probs.channels:
        raise ValueError(f"pseudo-label {labels.max()} has no student channel")
    picked = student_probs.values[keep][np.arange(labels.size), labels]
    nll = -np.log(np.clip(picked, np.finfo(np.float64).tiny, None))
    return float(omega * nll.mean())


@dataclass(frozen=True)
class PseudoLabelTarget:
    labels: SemanticMap
    omega: float
    ignore_mask: NDArray[np.bool_]


def pseudo_label_target(teacher_probs: ProbTensor, cfg: SelfTrainConfig | None = None) -> PseudoLabelTarget:
    """Pseudo-labels, their confidence weight and the margin mask in one step."""
    cfg = cfg or SelfTrainConfig()
    return PseudoLabelTarget(
        labels=pseudo_label(teacher_probs),
        omega=confidence_weight(teacher_probs, cfg.tau),
        ignore_mask=margin_ignore_mask(teacher_probs.height, teacher_probs.width, cfg),
    )

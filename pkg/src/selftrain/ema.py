"""Exponential moving average of student parameters into the teacher."""

from __future__ import annotations

import numpy as np
from numpy.typing import ArrayLike, NDArray

from src.config import Config


def ema_decay(eta: float, step: int | None = None) -> float:
    """Decay for update ``step``; early steps use the true average until it exceeds ``eta``."""
    if not 0.0 < eta < 1.0:
        raise ValueError(f"eta must be in (0, 1), got {eta}")
    if step is None:
        return eta
    if step < 0:
        raise ValueError(f"step must be >= 0, got {step}")
    return min(1.0 - 1.0 / (step + 1), eta)


def ema_update(
    teacher: ArrayLike, student: ArrayLike, eta: float | None = None, step: int | None = None
) -> NDArray[np.float64]:
    """θ' ← η·θ' + (1−η)·θ, returned as a new vector."""
    teacher = np.asarray(teacher, dtype=np.float64)
    student = np.asarray(student, dtype=np.float64)
    if teacher.ndim != 1 or student.ndim != 1:
        raise ValueError("parameters must be flat vectors")
    if teacher.shape != student.shape:
        raise ValueError(f"parameter length mismatch: teacher {teacher.size} vs student {student.size}")
    decay = ema_decay(Config.ETA if eta is None else eta, step)
    return decay * teacher + (1.0 - decay) * student


class MeanTeacher:
    """Holds the teacher vector and counts updates for the warm-up schedule."""

    def __init__(self, initial: ArrayLike, eta: float | None = None, warmup: bool = True):
        self.params = np.array(initial, dtype=np.float64)
        self.eta = Config.ETA if eta is None else eta
        self.warmup = warmup
        self.step = 0
        ema_decay(self.eta)

    def update(self, student: ArrayLike) -> NDArray[np.float64]:
        self.params = ema_update(self.params, student, self.eta, self.step if self.warmup else None)
        self.step += 1
        return self.params

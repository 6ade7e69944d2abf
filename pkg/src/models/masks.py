"""Run-length encoded binary masks.

Runs alternate zero-count, one-count, ... starting with a zero-count, over the
pixels in column-major order (COCO uncompressed RLE convention).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from numpy.typing import NDArray


def rle_encode(dense: NDArray) -> BinaryMask:
    """Encode a 2D 0/1 grid into a canonical column-major RLE mask."""
    grid = np.asarray(dense)
    if grid.ndim != 2 or grid.shape[0] == 0 or grid.shape[1] == 0:
        raise ValueError(f"mask grid must be 2D with positive dims, got shape {grid.shape}")
    height, width = grid.shape
    pixels = grid.astype(bool).ravel(order="F")
    changes = np.flatnonzero(pixels[1:] != pixels[:-1]) + 1
    bounds = np.concatenate(([0], changes, [pixels.size]))
    runs = np.diff(bounds).tolist()
    if pixels[0]:
        runs.insert(0, 0)
    return BinaryMask(height=height, width=width, runs=tuple(runs))


def rle_decode(runs: tuple[int, ...] | list[int], height: int, width: int) -> NDArray[np.bool_]:
    """Decode runs into an (height, width) boolean grid."""
    counts = np.asarray(runs, dtype=np.int64)
    if counts.ndim != 1 or counts.size == 0:
        raise ValueError("run list must be a non-empty flat sequence")
    if (counts < 0).any():
        raise ValueError("run lengths must be non-negative")
    total = int(counts.sum())
    if total != height * width:
        raise ValueError(f"runs sum to {total}, expected {height}x{width}={height * width}")
    values = (np.arange(counts.size) % 2).astype(bool)
    return np.repeat(values, counts).reshape((height, width), order="F")


@dataclass(frozen=True)
class BinaryMask:
    """A single object region over an H×W grid, stored as canonical RLE."""

    height: int
    width: int
    runs: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.height <= 0 or self.width <= 0:
            raise ValueError(f"mask dims must be positive, got {self.height}x{self.width}")
        runs = tuple(int(r) for r in self.runs)
        object.__setattr__(self, "runs", runs)
        if not runs:
            raise ValueError("run list must not be empty")
        if any(r < 0 for r in runs):
            raise ValueError("run lengths must be non-negative")
        if sum(runs) != self.height * self.width:
            raise ValueError(f"runs sum to {sum(runs)}, expected {self.height * self.width}")
        # only the leading zero-count may be empty
        if any(r == 0 for r in runs[1:]):
            raise ValueError("non-canonical RLE: empty interior or trailing run")

    def __getstate__(self) -> dict:
        # only the RLE crosses process boundaries; cached views are rebuilt lazily
        return {"height": self.height, "width": self.width, "runs": self.runs}

    @classmethod
    def from_dense(cls, dense: NDArray) -> BinaryMask:
        return rle_encode(dense)

    @classmethod
    def empty(cls, height: int, width: int) -> BinaryMask:
        return cls(height=height, width=width, runs=(height * width,))

    @cached_property
    def dense(self) -> NDArray[np.bool_]:
        """Read-only boolean grid, decoded once."""
        grid = rle_decode(self.runs, self.height, self.width)
        grid.flags.writeable = False
        return grid

    def to_dense(self) -> NDArray[np.bool_]:
        return self.dense.copy()

    @property
    def shape(self) -> tuple[int, int]:
        return self.height, self.width

    @cached_property
    def area(self) -> int:
        return int(sum(self.runs[1::2]))

    @property
    def is_empty(self) -> bool:
        return self.area == 0

    @cached_property
    def digest(self) -> str:
        """Platform-stable content hash used for canonical ordering."""
        payload = np.asarray((self.height, self.width, *self.runs), dtype="<i8").tobytes()
        return hashlib.blake2b(payload, digest_size=16).hexdigest()

    @cached_property
    def _run_ends(self) -> NDArray[np.int64]:
        return np.cumsum(np.asarray(self.runs, dtype=np.int64))

    @cached_property
    def _bbox(self) -> tuple[int, int, int, int] | None:
        if self.is_empty:
            return None
        ends = self._run_ends
        starts = ends - np.asarray(self.runs, dtype=np.int64)
        ones = np.arange(1, len(self.runs), 2)
        ones = ones[np.asarray(self.runs, dtype=np.int64)[ones] > 0]
        first, last = starts[ones], ends[ones] - 1
        h = self.height
        col_first, col_last = first // h, last // h
        single = col_first == col_last
        # a run crossing a column boundary covers the full row range
        top = 0 if not single.all() else int((first % h).min())
        bottom = h if not single.all() else int((last % h).max()) + 1
        return top, int(col_first.min()), bottom, int(col_last.max()) + 1

    def bbox(self) -> tuple[int, int, int, int] | None:
        """Tight bounding box as (top, left, bottom, right), exclusive ends."""
        return self._bbox

    def crop(self, top: int, left: int, bottom: int, right: int) -> NDArray[np.bool_]:
        """Dense window [top:bottom, left:right], decoding only the needed columns."""
        if not (0 <= top <= bottom <= self.height and 0 <= left <= right <= self.width):
            raise ValueError(f"crop window {(top, left, bottom, right)} outside {self.shape}")
        if "dense" in self.__dict__:
            return self.dense[top:bottom, left:right]
        h = self.height
        start, stop = left * h, right * h
        if start == stop:
            return np.zeros((bottom - top, 0), dtype=bool)
        ends = self._run_ends
        runs = np.asarray(self.runs, dtype=np.int64)
        starts = ends - runs
        i0 = int(np.searchsorted(ends, start, side="right"))
        i1 = int(np.searchsorted(starts, stop, side="left"))
        idx = np.arange(i0, i1)
        lengths = np.minimum(ends[idx], stop) - np.maximum(starts[idx], start)
        flat = np.repeat((idx % 2).astype(bool), lengths)
        return flat.reshape((right - left, h)).T[top:bottom]

    def contains(self, other: BinaryMask) -> bool:
        """True when every pixel of ``other`` is set in this mask."""
        _check_same_shape(self, other)
        return not np.any(other.dense & ~self.dense)

    def __and__(self, other: BinaryMask) -> BinaryMask:
        _check_same_shape(self, other)
        return rle_encode(self.dense & other.dense)

    def __or__(self, other: BinaryMask) -> BinaryMask:
        _check_same_shape(self, other)
        return rle_encode(self.dense | other.dense)

    def __sub__(self, other: BinaryMask) -> BinaryMask:
        _check_same_shape(self, other)
        return rle_encode(self.dense & ~other.dense)


def _check_same_shape(a: BinaryMask, b: BinaryMask) -> None:
    if a.shape != b.shape:
        raise ValueError(f"mask dimension mismatch: {a.shape} vs {b.shape}")


def mask_iou(a: BinaryMask, b: BinaryMask) -> float:
    """Intersection over union of two masks; 0.0 when both are empty."""
    _check_same_shape(a, b)
    inter = intersection_area(a, b)
    union = a.area + b.area - inter
    if union == 0:
        return 0.0
    return inter / union


def overlap_window(a: BinaryMask, b: BinaryMask) -> tuple[int, int, int, int] | None:
    """Intersection of the two bounding boxes, or None when they do not meet."""
    box_a, box_b = a.bbox(), b.bbox()
    if box_a is None or box_b is None:
        return None
    top, left = max(box_a[0], box_b[0]), max(box_a[1], box_b[1])
    bottom, right = min(box_a[2], box_b[2]), min(box_a[3], box_b[3])
    if top >= bottom or left >= right:
        return None
    return top, left, bottom, right


def intersection_area(a: BinaryMask, b: BinaryMask) -> int:
    _check_same_shape(a, b)
    window = overlap_window(a, b)
    if window is None:
        return 0
    return int(np.count_nonzero(a.crop(*window) & b.crop(*window)))


def union_of(masks: list[BinaryMask], height: int, width: int) -> NDArray[np.bool_]:
    """Dense pixelwise union of a list of masks."""
    out = np.zeros((height, width), dtype=bool)
    for mask in masks:
        if mask.shape != (height, width):
            raise ValueError(f"mask dimension mismatch: {mask.shape} vs {(height, width)}")
        out |= mask.dense
    return out

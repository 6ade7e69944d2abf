"""Little-endian raw binary tensors.

Probability files: ``OASSPROB`` magic, uint32 H, W, C, then H·W·C float32 in
(row, col, channel) order. Generic tensors (parameter vectors, backbone
weights): ``OASSTNSR`` magic, uint32 rank, uint32 dims, then float64 payload.
"""

from __future__ import annotations

from collections.abc import Mapping
from pathlib import Path

import numpy as np
from numpy.typing import ArrayLike, NDArray

from src.selftrain.pseudo_label import ProbTensor

PROBS_MAGIC = b"OASSPROB"
TENSOR_MAGIC = b"OASSTNSR"
PROBS_ATOL = 1e-4


class ProbsFormatError(ValueError):
    pass


class BadMagicError(ProbsFormatError):
    pass


class TruncatedPayloadError(ProbsFormatError):
    pass


class NotNormalizedError(ProbsFormatError):
    pass


def _read_bytes(path: str | Path) -> bytes:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    return path.read_bytes()


def _header(data: bytes, magic: bytes, count: int, path) -> NDArray[np.uint32]:
    if data[: len(magic)] != magic:
        raise BadMagicError(f"{path}: bad magic {data[:len(magic)]!r}, expected {magic!r}")
    end = len(magic) + 4 * count
    if len(data) < end:
        raise TruncatedPayloadError(f"{path}: header truncated ({len(data)} bytes)")
    return np.frombuffer(data, dtype="<u4", count=count, offset=len(magic))


def encode_probs(probs: ProbTensor) -> bytes:
    h, w, c = probs.values.shape
    dims = np.array([h, w, c], dtype="<u4").tobytes()
    return PROBS_MAGIC + dims + probs.values.astype("<f4").tobytes()


def decode_probs(data: bytes, path: str | Path = "<bytes>") -> ProbTensor:
    h, w, c = (int(v) for v in _header(data, PROBS_MAGIC, 3, path))
    if min(h, w, c) == 0:
        raise ProbsFormatError(f"{path}: dims must be positive, got {h}x{w}x{c}")
    offset = len(PROBS_MAGIC) + 12
    expected = h * w * c * 4
    payload = len(data) - offset
    if payload < expected:
        raise TruncatedPayloadError(f"{path}: payload has {payload} bytes, expected {expected}")
    if payload > expected:
        raise ProbsFormatError(f"{path}: {payload - expected} trailing bytes after the payload")
    values = np.frombuffer(data, dtype="<f4", count=h * w * c, offset=offset).reshape(h, w, c)
    values = values.astype(np.float64)
    if not np.isfinite(values).all() or (values < 0).any():
        raise NotNormalizedError(f"{path}: probabilities must be finite and non-negative")
    worst = float(np.abs(values.sum(axis=2) - 1.0).max())
    if worst > PROBS_ATOL:
        raise NotNormalizedError(f"{path}: per-pixel probabilities deviate from 1 by {worst:.3g}")
    return ProbTensor(values, atol=PROBS_ATOL)


def save_probs(probs: ProbTensor, path: str | Path) -> Path:
    path = Path(path)
    path.write_bytes(encode_probs(probs))
    return path


def load_probs(path: str | Path) -> ProbTensor:
    return decode_probs(_read_bytes(path), path)


def encode_tensor(values: ArrayLike) -> bytes:
    values = np.asarray(values, dtype=np.float64)
    if values.ndim == 0:
        raise ValueError("tensor must have rank >= 1")
    header = np.array([values.ndim, *values.shape], dtype="<u4").tobytes()
    return TENSOR_MAGIC + header + values.astype("<f8").tobytes()


def decode_tensor(data: bytes, path: str | Path = "<bytes>") -> NDArray[np.float64]:
    rank = int(_header(data, TENSOR_MAGIC, 1, path)[0])
    if rank == 0:
        raise ValueError(f"{path}: tensor rank must be >= 1")
    dims = [int(d) for d in _header(data, TENSOR_MAGIC, 1 + rank, path)[1:]]
    offset = len(TENSOR_MAGIC) + 4 * (1 + rank)
    expected = int(np.prod(dims)) * 8
    payload = len(data) - offset
    if payload < expected:
        raise TruncatedPayloadError(f"{path}: payload has {payload} bytes, expected {expected}")
    if payload > expected:
        raise ValueError(f"{path}: {payload - expected} trailing bytes after the payload")
    return np.frombuffer(data, dtype="<f8", offset=offset).reshape(dims).astype(np.float64)


def save_tensor(values: ArrayLike, path: str | Path) -> Path:
    path = Path(path)
    path.write_bytes(encode_tensor(values))
    return path


def load_tensor(path: str | Path) -> NDArray[np.float64]:
    return decode_tensor(_read_bytes(path), path)


def save_named_tensors(tensors: Mapping[str, ArrayLike], directory: str | Path) -> list[Path]:
    """One ``<name>.bin`` file per tensor."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    return [save_tensor(tensors[name], directory / f"{name}.bin") for name in sorted(tensors)]

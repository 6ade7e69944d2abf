"""Deformable patch embedding.

Each k×k patch (stride s, zero padding k//2) predicts one (vertical,
horizontal) offset from its undisplaced content with a linear map g, clamped
to ±H/r and ±W/r. The patch is then re-sampled at the displaced position with
bilinear interpolation (zero outside the image) and projected to the
embedding width.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from src.nn.params import Params, Tensor, as_tensor, uniform_init


@dataclass(eq=False)
class DpeParams(Params):
    kernel: int = 3
    stride: int = 2
    limit_divisor: float = 4.0

    def __post_init__(self) -> None:
        if self.kernel < 1 or self.stride < 1:
            raise ValueError(f"kernel and stride must be >= 1, got {self.kernel}, {self.stride}")
        if self.limit_divisor <= 0:
            raise ValueError(f"offset limit divisor must be > 0, got {self.limit_divisor}")
        super().__post_init__()

    def expected_shapes(self) -> dict[str, tuple[int, ...]]:
        if "wp" not in self.values or np.ndim(self.values["wp"]) != 2:
            raise ValueError("DpeParams: missing projection weight wp")
        fan_in, embed_dim = self.values["wp"].shape
        if fan_in % (self.kernel * self.kernel):
            raise ValueError(f"DpeParams: projection fan-in {fan_in} is not a multiple of k*k")
        return {"wg": (fan_in, 2), "bg": (2,), "wp": (fan_in, embed_dim), "bp": (embed_dim,)}

    @property
    def in_channels(self) -> int:
        return self.values["wp"].shape[0] // (self.kernel * self.kernel)

    @property
    def embed_dim(self) -> int:
        return int(self.values["wp"].shape[1])

    @classmethod
    def init(
        cls,
        in_channels: int,
        embed_dim: int,
        rng: np.random.Generator,
        kernel: int = 3,
        stride: int = 2,
        limit_divisor: float = 4.0,
        random_offsets: bool = False,
    ) -> DpeParams:
        """Offset predictor starts at zero (plain patch embedding) unless ``random_offsets``."""
        fan_in = kernel * kernel * in_channels
        wg = uniform_init(rng, fan_in, (fan_in, 2)) if random_offsets else np.zeros((fan_in, 2))
        bg = uniform_init(rng, fan_in, (2,)) if random_offsets else np.zeros(2)
        values = {
            "wg": wg,
            "bg": bg,
            "wp": uniform_init(rng, fan_in, (fan_in, embed_dim)),
            "bp": uniform_init(rng, fan_in, (embed_dim,)),
        }
        return cls(values=values, kernel=kernel, stride=stride, limit_divisor=limit_divisor)


def embed_grid(height: int, width: int, kernel: int, stride: int) -> tuple[int, int]:
    """Patch grid size for zero padding kernel//2."""
    pad = kernel // 2
    out_h = (height + 2 * pad - kernel) // stride + 1
    out_w = (width + 2 * pad - kernel) // stride + 1
    if out_h <= 0 or out_w <= 0:
        raise ValueError(f"{height}x{width} input is too small for kernel {kernel}, stride {stride}")
    return out_h, out_w


def extract_patches(x: Tensor, kernel: int, stride: int) -> Tensor:
    """Undisplaced patches, shape (patches, k*k*C) in (row, col, channel) order."""
    h, w, c = x.shape
    out_h, out_w = embed_grid(h, w, kernel, stride)
    pad = kernel // 2
    padded = np.pad(x, ((pad, pad), (pad, pad), (0, 0)))
    windows = sliding_window_view(padded, (kernel, kernel), axis=(0, 1))[::stride, ::stride][:out_h, :out_w]
    return windows.transpose(0, 1, 3, 4, 2).reshape(out_h * out_w, kernel * kernel * c)


def _fold_patches(dcols: Tensor, shape: tuple[int, int, int], kernel: int, stride: int) -> Tensor:
    h, w, c = shape
    out_h, out_w = embed_grid(h, w, kernel, stride)
    pad = kernel // 2
    dpadded = np.zeros((h + 2 * pad, w + 2 * pad, c))
    patches = dcols.reshape(out_h, out_w, kernel, kernel, c)
    for i in range(out_h):
        for j in range(out_w):
            dpadded[i * stride : i * stride + kernel, j * stride : j * stride + kernel] += patches[i, j]
    return dpadded[pad : pad + h, pad : pad + w]


def patch_embed(x: Tensor, wp: Tensor, bp: Tensor, kernel: int, stride: int) -> Tensor:
    """Plain patch embedding: undisplaced patches projected to the embedding width."""
    x = as_tensor(x, rank=3)
    return extract_patches(x, kernel, stride) @ wp + bp


def offset_bounds(height: int, width: int, limit_divisor: float) -> tuple[float, float]:
    return height / limit_divisor, width / limit_divisor


def clamp_offsets(raw: Tensor, height: int, width: int, limit_divisor: float) -> Tensor:
    """Clamp (vertical, horizontal) offsets to ±H/r and ±W/r."""
    bound_v, bound_h = offset_bounds(height, width, limit_divisor)
    raw = np.asarray(raw, dtype=np.float64)
    return np.stack([np.clip(raw[..., 0], -bound_v, bound_v), np.clip(raw[..., 1], -bound_h, bound_h)], axis=-1)


def dpe_offsets(x: Tensor, params: DpeParams) -> Tensor:
    """Clamped offsets per patch, shape (patches, 2)."""
    x = as_tensor(x, rank=3)
    cols = extract_patches(x, params.kernel, params.stride)
    raw = cols @ params["wg"] + params["bg"]
    return clamp_offsets(raw, x.shape[0], x.shape[1], params.limit_divisor)


def _sample_positions(shape, offsets: Tensor, kernel: int, stride: int):
    h, w, _ = shape
    out_h, out_w = embed_grid(h, w, kernel, stride)
    pad = kernel // 2
    rows = (np.arange(out_h) * stride - pad)[:, None] + np.zeros(out_w)[None, :]
    cols = np.zeros(out_h)[:, None] + (np.arange(out_w) * stride - pad)[None, :]
    taps = np.arange(kernel)
    ys = rows.reshape(-1, 1, 1) + taps[None, :, None] + offsets[:, 0].reshape(-1, 1, 1)
    xs = cols.reshape(-1, 1, 1) + taps[None, None, :] + offsets[:, 1].reshape(-1, 1, 1)
    return np.broadcast_to(ys, (len(offsets), kernel, kernel)), np.broadcast_to(xs, (len(offsets), kernel, kernel))


def _gather(x: Tensor, yy: np.ndarray, xx: np.ndarray) -> Tensor:
    h, w, c = x.shape
    inside = (yy >= 0) & (yy < h) & (xx >= 0) & (xx < w)
    out = np.zeros((*yy.shape, c))
    out[inside] = x[yy[inside], xx[inside]]
    return out


def bilinear_sample(x: Tensor, offsets: Tensor, kernel: int, stride: int):
    """Sample every patch at its displaced position; returns (samples (P,k,k,C), cache)."""
    ys, xs = _sample_positions(x.shape, offsets, kernel, stride)
    y0 = np.floor(ys).astype(np.intp)
    x0 = np.floor(xs).astype(np.intp)
    wy = (ys - y0)[..., None]
    wx = (xs - x0)[..., None]
    v00 = _gather(x, y0, x0)
    v01 = _gather(x, y0, x0 + 1)
    v10 = _gather(x, y0 + 1, x0)
    v11 = _gather(x, y0 + 1, x0 + 1)
    samples = (1 - wy) * (1 - wx) * v00 + (1 - wy) * wx * v01 + wy * (1 - wx) * v10 + wy * wx * v11
    return samples, (x.shape, y0, x0, wy, wx, v00, v01, v10, v11)


def bilinear_sample_backward(dsamples: Tensor, cache):
    """Gradients wrt the input map and the per-patch offsets."""
    shape, y0, x0, wy, wx, v00, v01, v10, v11 = cache
    h, w, c = shape
    dx = np.zeros(shape)
    corners = (
        (y0, x0, (1 - wy) * (1 - wx)),
        (y0, x0 + 1, (1 - wy) * wx),
        (y0 + 1, x0, wy * (1 - wx)),
        (y0 + 1, x0 + 1, wy * wx),
    )
    for yy, xx, weight in corners:
        inside = (yy >= 0) & (yy < h) & (xx >= 0) & (xx < w)
        np.add.at(dx, (yy[inside], xx[inside]), (dsamples * weight)[inside])
    dys = (dsamples * ((1 - wx) * (v10 - v00) + wx * (v11 - v01))).sum(axis=(1, 2, 3))
    dxs = (dsamples * ((1 - wy) * (v01 - v00) + wy * (v11 - v10))).sum(axis=(1, 2, 3))
    return dx, np.stack([dys, dxs], axis=-1)


def dpe_forward(x: Tensor, params: DpeParams):
    """Tokens of shape (patches, embed_dim) and the backward cache."""
    x = as_tensor(x, rank=3)
    h, w, c = x.shape
    if c != params.in_channels:
        raise ValueError(f"DPE expects {params.in_channels} channels, input has {c}")
    k, s = params.kernel, params.stride
    cols = extract_patches(x, k, s)
    raw = cols @ params["wg"] + params["bg"]
    offsets = clamp_offsets(raw, h, w, params.limit_divisor)
    samples, sample_cache = bilinear_sample(x, offsets, k, s)
    flat = samples.reshape(len(offsets), k * k * c)
    tokens = flat @ params["wp"] + params["bp"]
    return tokens, (x.shape, cols, raw, flat, sample_cache)


def dpe_backward(dtokens: Tensor, cache, params: DpeParams):
    shape, cols, raw, flat, sample_cache = cache
    h, w, c = shape
    k, s = params.kernel, params.stride
    grads = {"wp": flat.T @ dtokens, "bp": dtokens.sum(axis=0)}
    dsamples = (dtokens @ params["wp"].T).reshape(-1, k, k, c)
    dx, doffsets = bilinear_sample_backward(dsamples, sample_cache)
    bound_v, bound_h = offset_bounds(h, w, params.limit_divisor)
    free = np.stack([np.abs(raw[:, 0]) < bound_v, np.abs(raw[:, 1]) < bound_h], axis=-1)
    draw = doffsets * free
    grads["wg"] = cols.T @ draw
    grads["bg"] = draw.sum(axis=0)
    dx += _fold_patches(draw @ params["wg"].T, shape, k, s)
    return dx, grads


def dpe_embed(x: Tensor, params: DpeParams) -> Tensor:
    return dpe_forward(x, params)[0]

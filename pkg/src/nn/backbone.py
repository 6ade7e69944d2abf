"""Four-stage toy backbone: patch embedding (plain or deformable) + UA blocks per stage."""

from __future__ import annotations

import re
from collections.abc import Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from src.nn.dpe import DpeParams, dpe_embed, embed_grid, patch_embed
from src.nn.params import Tensor, as_tensor, flatten_params
from src.nn.ua_block import UaParams, ua_block

NUM_STAGES = 4
DEFAULT_DPE_STAGES = (2, 4)


class StageConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    embed_dim: int = Field(ge=1)
    depth: int = Field(1, ge=0)
    kernel: int = Field(3, ge=1)
    stride: int = Field(2, ge=1)
    use_dpe: bool = False
    limit_divisor: float = Field(4.0, gt=0.0)
    mlp_ratio: int = Field(2, ge=1)


def parse_arrangement(text: str) -> tuple[int, ...]:
    """Stages using DPE from labels like "DPE - 2, 4", "all-PE" or "all-DPE"."""
    label = text.strip().lower().replace("_", "-")
    if label in ("all-pe", "pe", "none"):
        return ()
    if label == "all-dpe":
        return tuple(range(1, NUM_STAGES + 1))
    match = re.fullmatch(r"(?:dpe\s*-\s*)?([\d\s,]+)", label)
    if not match:
        raise ValueError(f"unrecognized DPE arrangement '{text}'")
    stages = tuple(sorted({int(s) for s in match.group(1).replace(" ", "").split(",") if s}))
    if not stages or any(not 1 <= s <= NUM_STAGES for s in stages):
        raise ValueError(f"DPE stages must be within 1..{NUM_STAGES}, got '{text}'")
    return stages


def default_stage_configs(
    dims: Sequence[int] = (8, 16, 24, 32),
    depths: Sequence[int] = (1, 1, 1, 1),
    dpe_stages: Sequence[int] = DEFAULT_DPE_STAGES,
) -> list[StageConfig]:
    if len(dims) != NUM_STAGES or len(depths) != NUM_STAGES:
        raise ValueError(f"need {NUM_STAGES} stage dims and depths, got {len(dims)} and {len(depths)}")
    return [
        StageConfig(embed_dim=d, depth=n, use_dpe=(i + 1) in set(dpe_stages))
        for i, (d, n) in enumerate(zip(dims, depths, strict=True))
    ]


class BackboneParams:
    """Per-stage embedding and UA block parameters."""

    def __init__(self, embeds: list[DpeParams], blocks: list[list[UaParams]]):
        if len(embeds) != NUM_STAGES or len(blocks) != NUM_STAGES:
            raise ValueError(f"backbone needs {NUM_STAGES} stages of parameters")
        self.embeds = embeds
        self.blocks = blocks

    @classmethod
    def init(cls, in_channels: int, stages: Sequence[StageConfig], rng: np.random.Generator) -> BackboneParams:
        _check_stages(stages)
        embeds, blocks = [], []
        channels = in_channels
        for cfg in stages:
            embeds.append(
                DpeParams.init(channels, cfg.embed_dim, rng, cfg.kernel, cfg.stride, cfg.limit_divisor)
            )
            blocks.append([UaParams.init(cfg.embed_dim, rng, cfg.mlp_ratio) for _ in range(cfg.depth)])
            channels = cfg.embed_dim
        return cls(embeds, blocks)

    def named(self) -> dict[str, Tensor]:
        out = {}
        for i, embed in enumerate(self.embeds):
            out.update({f"stage{i + 1}.embed.{k}": v for k, v in embed.items()})
            for j, block in enumerate(self.blocks[i]):
                out.update({f"stage{i + 1}.block{j}.{k}": v for k, v in block.items()})
        return out

    def num_parameters(self) -> int:
        return int(flatten_params(self.named()).size)


def _check_stages(stages: Sequence[StageConfig]) -> None:
    if len(stages) != NUM_STAGES:
        raise ValueError(f"backbone needs {NUM_STAGES} stage configs, got {len(stages)}")


def backbone_forward(x: Tensor, stages: Sequence[StageConfig], params: BackboneParams) -> list[Tensor]:
    """Feature maps of the four stages, each H_i×W_i×C_i."""
    x = as_tensor(x, rank=3)
    _check_stages(stages)
    features = []
    for i, cfg in enumerate(stages):
        embed = params.embeds[i]
        if (embed.kernel, embed.stride, embed.embed_dim) != (cfg.kernel, cfg.stride, cfg.embed_dim):
            raise ValueError(f"stage {i + 1}: embedding parameters do not match the stage config")
        if len(params.blocks[i]) != cfg.depth:
            raise ValueError(f"stage {i + 1}: expected {cfg.depth} UA blocks, got {len(params.blocks[i])}")
        out_h, out_w = embed_grid(x.shape[0], x.shape[1], cfg.kernel, cfg.stride)
        if cfg.use_dpe:
            tokens = dpe_embed(x, embed)
        else:
            tokens = patch_embed(x, embed["wp"], embed["bp"], cfg.kernel, cfg.stride)
        x = tokens.reshape(out_h, out_w, cfg.embed_dim)
        for block in params.blocks[i]:
            x = ua_block(x, block)
        features.append(x)
    return features

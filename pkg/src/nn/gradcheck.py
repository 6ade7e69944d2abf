"""Central-difference verification of the analytic backward passes."""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from src.nn.attention import (
    pooling_attention_backward,
    pooling_attention_forward,
    self_attention_backward,
    self_attention_forward,
)
from src.nn.dpe import DpeParams, dpe_backward, dpe_forward, extract_patches, offset_bounds
from src.nn.layers import global_avg_pool_backward, global_avg_pool_forward
from src.nn.params import Params, Tensor
from src.nn.ua_block import UaParams, ua_block_backward, ua_block_forward
from src.utils.logging import get_logger

logger = get_logger()

BLOCKS = ("gap", "pool", "attn", "ua", "dpe")
DENOM_FLOOR = 1e-8
# Offsets this close to a pixel lattice point or to the clamp bound are non-differentiable in practice.
KINK_MARGIN = 1e-3
MAX_DRAWS = 200

ATTN_NAMES = ("ln1_gamma", "ln1_beta", "wq", "bq", "wk", "wv", "bv", "wo", "bo")
POOL_NAMES = ("wpq", "bpq", "wpk", "wpv", "bpv")


@dataclass
class GradCase:
    x: Tensor
    params: Params
    forward: Callable
    backward: Callable

    def loss(self) -> float:
        out, _ = self.forward(self.x, self.params)
        return float(np.sum(out))

    def analytic(self) -> tuple[Tensor, dict[str, Tensor]]:
        out, cache = self.forward(self.x, self.params)
        return self.backward(np.ones_like(out), cache, self.params)


def _gap_case(rng: np.random.Generator) -> GradCase:
    return GradCase(
        x=rng.normal(size=(4, 4, 3)),
        params=Params(values={}),
        forward=lambda x, p: global_avg_pool_forward(x),
        backward=lambda dout, cache, p: (global_avg_pool_backward(dout, cache), {}),
    )


def _subset(params: UaParams, names: tuple[str, ...]) -> Params:
    return Params(values={name: params[name].copy() for name in names})


def _attn_case(rng: np.random.Generator) -> GradCase:
    full = UaParams.init(3, rng, random_norm=True)
    return GradCase(
        rng.normal(size=(4, 4, 3)), _subset(full, ATTN_NAMES), self_attention_forward, self_attention_backward
    )


def _pool_case(rng: np.random.Generator) -> GradCase:
    full = UaParams.init(3, rng)
    return GradCase(
        rng.normal(size=(4, 4, 3)), _subset(full, POOL_NAMES), pooling_attention_forward, pooling_attention_backward
    )


def _ua_case(rng: np.random.Generator) -> GradCase:
    return GradCase(
        rng.normal(size=(4, 4, 3)), UaParams.init(3, rng, random_norm=True), ua_block_forward, ua_block_backward
    )


def _dpe_safe(x: Tensor, params: DpeParams) -> bool:
    raw = extract_patches(x, params.kernel, params.stride) @ params["wg"] + params["bg"]
    bounds = np.array(offset_bounds(x.shape[0], x.shape[1], params.limit_divisor))
    distance = np.abs(np.abs(raw) - bounds)
    if np.any(distance <= KINK_MARGIN):
        return False
    free = np.abs(raw) < bounds
    frac = raw[free] - np.floor(raw[free])
    return bool(np.all((frac > KINK_MARGIN) & (frac < 1.0 - KINK_MARGIN)))


def _dpe_case(rng: np.random.Generator) -> GradCase:
    params = DpeParams.init(2, 4, rng, kernel=3, stride=2, limit_divisor=4.0, random_offsets=True)
    params.values["wg"] *= 2.0
    for _ in range(MAX_DRAWS):
        x = rng.normal(size=(8, 8, 2))
        if _dpe_safe(x, params):
            return GradCase(x, params, dpe_forward, dpe_backward)
    raise ValueError(f"no differentiable DPE input found in {MAX_DRAWS} draws")


_CASES = {"gap": _gap_case, "pool": _pool_case, "attn": _attn_case, "ua": _ua_case, "dpe": _dpe_case}


def build_case(block: str, seed: int = 0) -> GradCase:
    if block not in _CASES:
        raise ValueError(f"unknown block '{block}', expected one of {', '.join(BLOCKS)}")
    return _CASES[block](np.random.default_rng(seed))


def _numeric(case: GradCase, array: Tensor, eps: float) -> Tensor:
    grad = np.zeros_like(array)
    for idx in np.ndindex(array.shape):
        orig = array[idx]
        array[idx] = orig + eps
        plus = case.loss()
        array[idx] = orig - eps
        minus = case.loss()
        array[idx] = orig
        grad[idx] = (plus - minus) / (2.0 * eps)
    return grad


def relative_error(analytic: Tensor, numeric: Tensor) -> float:
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    if analytic.shape != numeric.shape:
        raise ValueError(f"gradient shape mismatch: {analytic.shape} vs {numeric.shape}")
    if not (np.all(np.isfinite(analytic)) and np.all(np.isfinite(numeric))):
        raise ValueError("non-finite gradient values")
    if analytic.size == 0:
        return 0.0
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), DENOM_FLOOR)
    return float(np.max(np.abs(analytic - numeric) / denom))


def gradient_errors(case: GradCase, eps: float = 1e-5, inject_fault: bool = False) -> dict[str, float]:
    """Max relative error per tensor: ``input`` plus every parameter name."""
    if not 1e-7 <= eps <= 1e-3:
        raise ValueError(f"eps must be within [1e-7, 1e-3], got {eps}")
    if not np.isfinite(case.loss()):
        raise ValueError("non-finite forward output")
    dx, grads = case.analytic()
    if inject_fault:
        dx = -dx
    errors = {"input": relative_error(dx, _numeric(case, case.x, eps))}
    for name in sorted(case.params):
        if name not in grads:
            raise ValueError(f"backward returned no gradient for parameter {name}")
        errors[name] = relative_error(grads[name], _numeric(case, case.params.values[name], eps))
    return errors


def grad_check(block: str = "ua", seed: int = 0, eps: float = 1e-5, inject_fault: bool = False) -> float:
    """Max relative error between analytic and central-difference gradients of sum(outputs)."""
    case = build_case(block, seed)
    errors = gradient_errors(case, eps, inject_fault)
    worst = max(errors, key=errors.get)
    logger.info(f"gradcheck {block} seed={seed} eps={eps:g}: max rel err {errors[worst]:.3e} ({worst})")
    for name, err in errors.items():
        logger.debug(f"  {name}: {err:.3e}")
    return errors[worst]

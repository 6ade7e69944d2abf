"""Unmasking attention block.

Self-attention gives X'; a pooling attention over X' yields q' (1×1×C) whose
sigmoid gates the channels of X' into X''; a residual pre-norm MLP follows.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from src.nn.attention import (
    pooling_attention_backward,
    pooling_attention_forward,
    self_attention_backward,
    self_attention_forward,
)
from src.nn.layers import (
    gelu_backward,
    gelu_forward,
    layer_norm_backward,
    layer_norm_forward,
    linear_backward,
    linear_forward,
    sigmoid,
)
from src.nn.params import Params, Tensor, as_tensor, uniform_init


def ua_shapes(channels: int, hidden: int) -> dict[str, tuple[int, ...]]:
    c, m = channels, hidden
    return {
        "ln1_gamma": (c,),
        "ln1_beta": (c,),
        "wq": (c, c),
        "bq": (c,),
        "wk": (c, c),
        "wv": (c, c),
        "bv": (c,),
        "wo": (c, c),
        "bo": (c,),
        "wpq": (c, c),
        "bpq": (c,),
        "wpk": (c, c),
        "wpv": (c, c),
        "bpv": (c,),
        "ln2_gamma": (c,),
        "ln2_beta": (c,),
        "w1": (c, m),
        "b1": (m,),
        "w2": (m, c),
        "b2": (c,),
    }


@dataclass(eq=False)
class UaParams(Params):
    def expected_shapes(self) -> dict[str, tuple[int, ...]]:
        if "w1" not in self.values or np.ndim(self.values["w1"]) != 2:
            raise ValueError("UaParams: missing MLP weight w1")
        channels, hidden = self.values["w1"].shape
        return ua_shapes(channels, hidden)

    @property
    def channels(self) -> int:
        return int(self.values["w1"].shape[0])

    @classmethod
    def init(cls, channels: int, rng: np.random.Generator, mlp_ratio: int = 2, random_norm: bool = False) -> UaParams:
        """Uniform ±1/√fan_in weights; norm scales/shifts 1/0 unless ``random_norm``."""
        if channels <= 0 or mlp_ratio <= 0:
            raise ValueError(f"channels and mlp_ratio must be positive, got {channels}, {mlp_ratio}")
        values = {}
        for name, shape in ua_shapes(channels, channels * mlp_ratio).items():
            if name.startswith("ln"):
                center = 1.0 if name.endswith("gamma") else 0.0
                values[name] = center + rng.uniform(-0.5, 0.5, size=shape) if random_norm else np.full(shape, center)
            else:
                values[name] = uniform_init(rng, shape[0], shape)
        return cls(values=values)


def channel_gate(x_prime: Tensor, q_prime: Tensor) -> Tensor:
    """X'' = σ(q') ⊙ X', the 1×1×C mask broadcast over every position."""
    return x_prime * sigmoid(np.asarray(q_prime).reshape(1, 1, -1))


def occlusion_mask(x: Tensor, params: UaParams) -> Tensor:
    """σ(q') for input ``x``, shape (C,)."""
    x_prime, _ = self_attention_forward(x, params)
    q_prime, _ = pooling_attention_forward(x_prime, params)
    return sigmoid(q_prime.reshape(-1))


def ua_block_forward(x: Tensor, params: UaParams):
    x = as_tensor(x, rank=3)
    h, w, c = x.shape
    if params.channels != c:
        raise ValueError(f"UA block expects {params.channels} channels, input has {c}")
    x_prime, attn_cache = self_attention_forward(x, params)
    q_prime, pool_cache = pooling_attention_forward(x_prime, params)
    gate = sigmoid(q_prime.reshape(c))
    x_gated = x_prime * gate
    tokens = x_gated.reshape(h * w, c)
    z, ln_cache = layer_norm_forward(tokens, params["ln2_gamma"], params["ln2_beta"])
    hidden, _ = linear_forward(z, params["w1"], params["b1"])
    act, gelu_cache = gelu_forward(hidden)
    y, _ = linear_forward(act, params["w2"], params["b2"])
    out = (tokens + y).reshape(h, w, c)
    cache = (x.shape, attn_cache, pool_cache, x_prime, gate, tokens, z, ln_cache, hidden, act, gelu_cache)
    return out, cache


def ua_block_backward(dout: Tensor, cache, params: UaParams):
    shape, attn_cache, pool_cache, x_prime, gate, tokens, z, ln_cache, hidden, act, gelu_cache = cache
    h, w, c = shape
    dtokens = np.asarray(dout).reshape(h * w, c)
    dact, g2 = linear_backward(dtokens, act, params["w2"])
    dhidden = gelu_backward(dact, gelu_cache)
    dz, g1 = linear_backward(dhidden, z, params["w1"])
    dln, g_ln = layer_norm_backward(dz, ln_cache)
    dgated = (dtokens + dln).reshape(h, w, c)

    dx_prime = dgated * gate
    dgate = (dgated * x_prime).sum(axis=(0, 1))
    dq_prime = dgate * gate * (1.0 - gate)
    dx_pool, g_pool = pooling_attention_backward(dq_prime, pool_cache, params)
    dx, g_attn = self_attention_backward(dx_prime + dx_pool, attn_cache, params)

    grads = {**g_attn, **g_pool}
    grads.update({
        "ln2_gamma": g_ln["gamma"],
        "ln2_beta": g_ln["beta"],
        "w1": g1["w"],
        "b1": g1["b"],
        "w2": g2["w"],
        "b2": g2["b"],
    })
    return dx, grads


def ua_block(x: Tensor, params: UaParams) -> Tensor:
    return ua_block_forward(x, params)[0]

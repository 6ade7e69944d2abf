"""Token self-attention and pooling attention over H×W×C feature maps.

Both use a single softmax head. Keys carry no bias: a key bias only shifts all
scores of a query equally and never reaches the output.
"""

from __future__ import annotations

from collections.abc import Mapping

import numpy as np

from src.nn.layers import (
    layer_norm_backward,
    layer_norm_forward,
    linear_backward,
    linear_forward,
    softmax,
    softmax_backward,
)
from src.nn.params import Tensor, as_tensor


def _check_channels(params: Mapping[str, Tensor], names: tuple[str, ...], channels: int) -> None:
    for name in names:
        if params[name].shape[0] != channels:
            raise ValueError(f"parameter {name} expects {params[name].shape[0]} channels, input has {channels}")


def self_attention_forward(x: Tensor, params: Mapping[str, Tensor]):
    """Pre-norm residual attention: X' = X + Attn(LN(X))."""
    x = as_tensor(x, rank=3)
    h, w, c = x.shape
    _check_channels(params, ("ln1_gamma", "wq", "wk", "wv", "wo"), c)
    tokens = x.reshape(h * w, c)
    z, ln_cache = layer_norm_forward(tokens, params["ln1_gamma"], params["ln1_beta"])
    q, _ = linear_forward(z, params["wq"], params["bq"])
    k, _ = linear_forward(z, params["wk"])
    v, _ = linear_forward(z, params["wv"], params["bv"])
    scale = 1.0 / np.sqrt(c)
    attn = softmax(q @ k.T * scale)
    o = attn @ v
    y, _ = linear_forward(o, params["wo"], params["bo"])
    out = (tokens + y).reshape(h, w, c)
    cache = (x.shape, z, ln_cache, q, k, v, attn, o, scale)
    return out, cache


def self_attention_backward(dout: Tensor, cache, params: Mapping[str, Tensor]):
    shape, z, ln_cache, q, k, v, attn, o, scale = cache
    h, w, c = shape
    dtokens = dout.reshape(h * w, c)
    do, g_o = linear_backward(dtokens, o, params["wo"])
    dattn = do @ v.T
    dv = attn.T @ do
    ds = softmax_backward(dattn, attn) * scale
    dq = ds @ k
    dk = ds.T @ q
    dz_q, g_q = linear_backward(dq, z, params["wq"])
    dz_k, g_k = linear_backward(dk, z, params["wk"], with_bias=False)
    dz_v, g_v = linear_backward(dv, z, params["wv"])
    dx_ln, g_ln = layer_norm_backward(dz_q + dz_k + dz_v, ln_cache)
    grads = {
        "ln1_gamma": g_ln["gamma"],
        "ln1_beta": g_ln["beta"],
        "wq": g_q["w"],
        "bq": g_q["b"],
        "wk": g_k["w"],
        "wv": g_v["w"],
        "bv": g_v["b"],
        "wo": g_o["w"],
        "bo": g_o["b"],
    }
    return (dtokens + dx_ln).reshape(h, w, c), grads


def self_attention(x: Tensor, params: Mapping[str, Tensor]) -> Tensor:
    return self_attention_forward(x, params)[0]


def pooling_attention_forward(x: Tensor, params: Mapping[str, Tensor]):
    """q' = softmax(K' q / √C) V' with q projected from GAP(X'); output 1×1×C."""
    x = as_tensor(x, rank=3)
    h, w, c = x.shape
    _check_channels(params, ("wpq", "wpk", "wpv"), c)
    tokens = x.reshape(h * w, c)
    pooled = tokens.mean(axis=0)
    query = pooled @ params["wpq"] + params["bpq"]
    keys = tokens @ params["wpk"]
    values = tokens @ params["wpv"] + params["bpv"]
    scale = 1.0 / np.sqrt(c)
    weights = softmax(keys @ query * scale)
    out = (weights @ values).reshape(1, 1, c)
    cache = (x.shape, tokens, pooled, query, keys, values, weights, scale)
    return out, cache


def pooling_attention_backward(dout: Tensor, cache, params: Mapping[str, Tensor]):
    shape, tokens, pooled, query, keys, values, weights, scale = cache
    h, w, c = shape
    n = h * w
    dq_out = np.asarray(dout).reshape(c)
    dweights = values @ dq_out
    dvalues = np.outer(weights, dq_out)
    ds = softmax_backward(dweights, weights) * scale
    dkeys = np.outer(ds, query)
    dquery = keys.T @ ds
    dpooled = params["wpq"] @ dquery
    dtokens = dkeys @ params["wpk"].T + dvalues @ params["wpv"].T + dpooled / n
    grads = {
        "wpq": np.outer(pooled, dquery),
        "bpq": dquery,
        "wpk": tokens.T @ dkeys,
        "wpv": tokens.T @ dvalues,
        "bpv": dvalues.sum(axis=0),
    }
    return dtokens.reshape(h, w, c), grads


def pooling_attention(x: Tensor, params: Mapping[str, Tensor]) -> Tensor:
    return pooling_attention_forward(x, params)[0]

"""Elementary layers with explicit forward/backward passes.

Every ``*_forward`` returns ``(out, cache)``; the matching ``*_backward`` takes
the upstream gradient and the cache and returns the input gradient (plus a
dict of parameter gradients for layers that have parameters).
"""

from __future__ import annotations

import numpy as np

from src.nn.params import Tensor, as_tensor

LN_EPS = 1e-5
_GELU_C = np.sqrt(2.0 / np.pi)


def softmax(z: Tensor, axis: int = -1) -> Tensor:
    shifted = z - z.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def softmax_backward(dy: Tensor, y: Tensor, axis: int = -1) -> Tensor:
    return y * (dy - (dy * y).sum(axis=axis, keepdims=True))


def sigmoid(z: Tensor) -> Tensor:
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def linear_forward(x: Tensor, w: Tensor, b: Tensor | None = None):
    out = x @ w
    if b is not None:
        out = out + b
    return out, x


def linear_backward(dout: Tensor, cache: Tensor, w: Tensor, with_bias: bool = True):
    x = cache
    grads = {"w": x.T @ dout}
    if with_bias:
        grads["b"] = dout.sum(axis=0)
    return dout @ w.T, grads


def layer_norm_forward(x: Tensor, gamma: Tensor, beta: Tensor):
    mu = x.mean(axis=-1, keepdims=True)
    var = ((x - mu) ** 2).mean(axis=-1, keepdims=True)
    sigma = np.sqrt(var + LN_EPS)
    xhat = (x - mu) / sigma
    return xhat * gamma + beta, (xhat, sigma, gamma)


def layer_norm_backward(dy: Tensor, cache):
    xhat, sigma, gamma = cache
    ghat = dy * gamma
    m1 = ghat.mean(axis=-1, keepdims=True)
    m2 = (ghat * xhat).mean(axis=-1, keepdims=True)
    dx = (ghat - m1 - xhat * m2) / sigma
    return dx, {"gamma": (dy * xhat).sum(axis=0), "beta": dy.sum(axis=0)}


def gelu_forward(x: Tensor):
    """tanh approximation of GELU."""
    inner = _GELU_C * (x + 0.044715 * x**3)
    t = np.tanh(inner)
    return 0.5 * x * (1.0 + t), (x, t)


def gelu_backward(dy: Tensor, cache) -> Tensor:
    x, t = cache
    dinner = _GELU_C * (1.0 + 3 * 0.044715 * x**2)
    return dy * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t**2) * dinner)


def global_avg_pool_forward(x: Tensor):
    """H×W×C → 1×1×C spatial mean."""
    x = as_tensor(x, rank=3)
    return x.mean(axis=(0, 1), keepdims=True), x.shape


def global_avg_pool_backward(dout: Tensor, cache) -> Tensor:
    h, w, c = cache
    return np.broadcast_to(np.asarray(dout).reshape(1, 1, c) / (h * w), (h, w, c)).copy()


def global_avg_pool(x: Tensor) -> Tensor:
    return global_avg_pool_forward(x)[0]

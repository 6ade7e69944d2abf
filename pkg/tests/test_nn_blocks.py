import numpy as np
import pytest

from src.nn.attention import pooling_attention, self_attention, self_attention_forward
from src.nn.layers import global_avg_pool, global_avg_pool_backward, global_avg_pool_forward, sigmoid, softmax
from src.nn.params import Params, flatten_params, unflatten_params
from src.nn.ua_block import UaParams, channel_gate, occlusion_mask, ua_block


@pytest.fixture
def params():
    return UaParams.init(3, np.random.default_rng(0))


@pytest.fixture
def x():
    return np.random.default_rng(1).normal(size=(4, 4, 3))


def _zeroed(params: UaParams) -> UaParams:
    values = {k: (v if k.startswith("ln") else np.zeros_like(v)) for k, v in params.items()}
    return UaParams(values=values)


def test_global_avg_pool_values():
    assert global_avg_pool(np.full((3, 2, 2), 5.0)).tolist() == [[[5.0, 5.0]]]
    out = global_avg_pool(np.array([1.0, 2.0, 3.0, 4.0]).reshape(2, 2, 1))
    assert out.shape == (1, 1, 1) and out[0, 0, 0] == 2.5
    _, cache = global_avg_pool_forward(np.zeros((2, 3, 1)))
    assert np.allclose(global_avg_pool_backward(np.ones((1, 1, 1)), cache), 1 / 6)
    with pytest.raises(ValueError, match="rank 3"):
        global_avg_pool(np.zeros((2, 2)))


def test_softmax_and_sigmoid():
    rows = softmax(np.random.default_rng(2).normal(size=(5, 7)) * 30)
    assert np.allclose(rows.sum(axis=-1), 1.0)
    z = np.array([-800.0, -3.0, 0.0, 3.0, 800.0])
    s = sigmoid(z)
    assert np.all(np.isfinite(s))
    assert s[2] == 0.5
    assert np.all((s[1:4] > 0) & (s[1:4] < 1))


def test_self_attention_shape_and_softmax_rows(x, params):
    out, cache = self_attention_forward(x, params)
    assert out.shape == x.shape
    attn = cache[6]
    assert np.allclose(attn.sum(axis=1), 1.0)


def test_self_attention_with_zero_weights_is_identity(x, params):
    assert np.allclose(self_attention(x, _zeroed(params)), x)


def test_pooling_attention_on_constant_map(params):
    row = np.array([0.3, -1.2, 2.0])
    constant = np.broadcast_to(row, (4, 4, 3)).copy()
    out = pooling_attention(constant, params)
    assert out.shape == (1, 1, 3)
    assert np.allclose(out.reshape(3), row @ params["wpv"] + params["bpv"])


def test_occlusion_mask_is_in_open_unit_interval(x, params):
    mask = occlusion_mask(x, params)
    assert mask.shape == (3,)
    assert np.all((mask > 0) & (mask < 1))


def test_gating_annihilates_zero_features():
    assert not channel_gate(np.zeros((2, 2, 3)), np.array([5.0, -1.0, 0.0])).any()
    gated = channel_gate(np.ones((2, 2, 3)), np.zeros(3))
    assert np.allclose(gated, 0.5)


def test_ua_block_with_zero_weights_halves_the_input(x, params):
    assert ua_block(x, params).shape == x.shape
    # identity attention, sigmoid(0) gate, zero MLP
    assert np.allclose(ua_block(x, _zeroed(params)), 0.5 * x)


def test_ua_block_rejects_channel_mismatch(params):
    with pytest.raises(ValueError, match="channels"):
        ua_block(np.zeros((2, 2, 4)), params)


def test_params_validate_shapes(params):
    values = dict(params.values)
    values["wq"] = np.zeros((3, 2))
    with pytest.raises(ValueError, match="wq"):
        UaParams(values=values)
    with pytest.raises(ValueError, match="expected parameters"):
        UaParams(values={k: v for k, v in params.items() if k != "bo"})


def test_flatten_round_trip(params):
    vector = flatten_params(params)
    assert vector.ndim == 1 and vector.size == sum(v.size for v in params.values())
    restored = unflatten_params(vector, params)
    assert all(np.array_equal(restored[k], params[k]) for k in params)
    with pytest.raises(ValueError):
        unflatten_params(vector[:-1], params)
    copy = Params(values=dict(params.values)).copy()
    copy.values["wq"][0, 0] += 1
    assert copy["wq"][0, 0] != params["wq"][0, 0]

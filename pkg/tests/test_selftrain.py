import math

import numpy as np
import pytest

from src.models.maps import SemanticMap
from src.selftrain.ema import MeanTeacher, ema_decay, ema_update
from src.selftrain.pseudo_label import (
    ProbTensor,
    SelfTrainConfig,
    confidence_weight,
    margin_ignore_mask,
    pseudo_label,
    pseudo_label_target,
    target_loss,
)


def _probs(rows):
    return ProbTensor(np.array(rows, dtype=np.float64))


def test_pseudo_label_argmax_and_ties():
    probs = _probs([[[0.2, 0.5, 0.3], [1 / 3, 1 / 3, 1 / 3]]])
    labels = pseudo_label(probs).labels
    assert labels.tolist() == [[1, 0]]


def test_pseudo_label_is_invariant_to_monotone_rescaling():
    rng = np.random.default_rng(0)
    raw = rng.random((3, 4, 5))
    probs = raw / raw.sum(axis=2, keepdims=True)
    squared = probs**2 / (probs**2).sum(axis=2, keepdims=True)
    assert np.array_equal(pseudo_label(ProbTensor(probs)).labels, pseudo_label(ProbTensor(squared)).labels)


def test_prob_tensor_rejects_unnormalized():
    with pytest.raises(ValueError, match="sum to 1"):
        _probs([[[0.7, 0.7]]])
    with pytest.raises(ValueError, match="non-negative"):
        _probs([[[1.5, -0.5]]])


def test_confidence_weight_hand_count():
    rows = [[[0.99, 0.01], [0.97, 0.03]], [[0.5, 0.5], [0.2, 0.8]]]
    # max probabilities 0.99, 0.97, 0.5, 0.8
    assert confidence_weight(_probs(rows), 0.968) == 0.5


def test_confidence_weight_edges():
    assert confidence_weight(_probs([[[1.0, 0.0], [0.0, 1.0]]]), 0.968) == 1.0
    uniform = np.full((2, 2, 19), 1 / 19)
    assert confidence_weight(ProbTensor(uniform), 0.968) == 0.0
    with pytest.raises(ValueError):
        confidence_weight(_probs([[[1.0, 0.0]]]), 1.0)


def test_confidence_weight_is_non_increasing_in_tau():
    rng = np.random.default_rng(1)
    raw = rng.random((6, 6, 4)) ** 4
    probs = ProbTensor(raw / raw.sum(axis=2, keepdims=True))
    weights = [confidence_weight(probs, tau) for tau in (0.1, 0.3, 0.5, 0.7, 0.9)]
    assert weights == sorted(weights, reverse=True)


def test_target_loss_values():
    pseudo = SemanticMap(np.array([[0]], dtype=np.uint8), 2)
    assert target_loss(_probs([[[0.5, 0.5]]]), pseudo, 1.0) == pytest.approx(math.log(2))
    assert target_loss(_probs([[[1.0, 0.0]]]), pseudo, 1.0) == 0.0
    assert target_loss(_probs([[[0.5, 0.5]]]), pseudo, 0.0) == 0.0


def test_target_loss_skips_ignored_pixels():
    probs = _probs([[[0.5, 0.5], [0.25, 0.75]]])
    pseudo = SemanticMap(np.array([[0, 255]], dtype=np.uint8), 2)
    assert target_loss(probs, pseudo, 1.0) == pytest.approx(math.log(2))
    everything = np.ones((1, 2), dtype=bool)
    assert target_loss(probs, SemanticMap(np.array([[0, 1]], dtype=np.uint8), 2), 0.5, everything) == 0.0


def test_margin_mask_rows():
    mask = margin_ignore_mask(10, 3, SelfTrainConfig(ignore_above=2, ignore_below=3))
    assert mask[:2].all() and mask[7:].all()
    assert not mask[2:7].any()
    assert margin_ignore_mask(5, 5).all()


def test_margins_must_fit_the_crop():
    cfg = SelfTrainConfig()
    assert (cfg.ignore_above, cfg.ignore_below, cfg.crop_size) == (11, 88, 376)
    with pytest.raises(ValueError, match="leave no rows"):
        SelfTrainConfig(ignore_above=200, ignore_below=176)


def test_pseudo_label_target_bundles_the_pieces():
    probs = _probs([[[0.99, 0.01], [0.1, 0.9]]])
    target = pseudo_label_target(probs, SelfTrainConfig(ignore_above=0, ignore_below=0))
    assert target.labels.labels.tolist() == [[0, 1]]
    assert target.omega == 0.5
    assert not target.ignore_mask.any()


def test_ema_update_arithmetic():
    assert ema_update([0.0], [1.0], 0.999)[0] == pytest.approx(0.001)
    same = np.array([0.3, -2.0])
    assert np.array_equal(ema_update(same, same, 0.999), same)


def test_ema_gap_shrinks_geometrically():
    teacher = MeanTeacher(np.zeros(3), eta=0.999, warmup=False)
    student = np.ones(3)
    for _ in range(100):
        teacher.update(student)
    assert np.allclose(student - teacher.params, 0.999**100)


def test_ema_warmup_schedule():
    assert ema_decay(0.999, 0) == 0.0
    assert ema_decay(0.999, 1) == 0.5
    assert ema_decay(0.999, 10**6) == 0.999
    teacher = MeanTeacher(np.zeros(2), eta=0.999)
    teacher.update(np.full(2, 4.0))
    assert np.allclose(teacher.params, 4.0)


def test_ema_rejects_bad_input():
    with pytest.raises(ValueError, match="length mismatch"):
        ema_update(np.zeros(2), np.zeros(3))
    with pytest.raises(ValueError, match="flat vectors"):
        ema_update(np.zeros((2, 2)), np.zeros((2, 2)))
    with pytest.raises(ValueError):
        ema_decay(1.0)

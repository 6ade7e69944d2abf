import numpy as np
import pytest

from src.metrics.matching import ORACLE_MAX_SEGMENTS, bruteforce_match_oracle, match_segments, pairwise_iou
from src.models.instances import InstanceAnnotation, MaskSelector
from src.models.masks import BinaryMask


def _strip(start, stop, width=20, category=13):
    dense = np.zeros((1, width), dtype=bool)
    dense[0, start:stop] = True
    return InstanceAnnotation.single_mask(category, 1.0, BinaryMask.from_dense(dense))


def _region(rows, cols, category=13, shape=(4, 5)):
    dense = np.zeros(shape, dtype=bool)
    dense[rows, cols] = True
    return InstanceAnnotation.single_mask(category, 1.0, BinaryMask.from_dense(dense))


def test_identical_sets_match_identically():
    segs = [_strip(0, 5), _strip(8, 12), _strip(14, 20)]
    result = match_segments(segs, segs)
    assert result.pairs() == {(0, 0), (1, 1), (2, 2)}
    assert result.iou_sum == pytest.approx(3.0)
    assert result.fp == () and result.fn == ()


def test_iou_below_half_is_fp_and_fn():
    gt = [_strip(0, 10)]
    pred = [_strip(0, 4)]
    result = match_segments(pred, gt)
    assert result.tp == ()
    assert result.fp == (0,) and result.fn == (0,)


def test_two_preds_one_gt():
    gt = [_region(slice(0, 2), slice(0, 5))]
    six = np.zeros((4, 5), dtype=bool)
    six[0, :] = True
    six[1, 0] = True
    pred_a = InstanceAnnotation.single_mask(13, 1.0, BinaryMask.from_dense(six))
    pred_b = _region(1, slice(2, 5))
    ious = pairwise_iou([pred_a.visible, pred_b.visible], [gt[0].visible])
    assert ious[0, 0] == pytest.approx(0.6)
    assert ious[1, 0] == pytest.approx(0.3)
    for matcher in (match_segments, bruteforce_match_oracle):
        result = matcher([pred_a, pred_b], gt)
        assert result.pairs() == {(0, 0)}
        assert result.fp == (1,)


def test_classes_never_match_across():
    result = match_segments([_strip(0, 10, category=11)], [_strip(0, 10, category=13)])
    assert result.tp == ()
    assert result.fp == (0,) and result.fn == (0,)


def test_overlapping_amodal_conflict_is_solved_optimally():
    gts = [_strip(0, 10), _strip(3, 13)]
    preds = [_strip(1, 11), _strip(0, 9)]
    ious = pairwise_iou([p.amodal for p in preds], [g.amodal for g in gts])
    assert ious[0, 0] > 0.5 and ious[0, 1] > 0.5 and ious[1, 0] > 0.5
    assert ious[1, 1] <= 0.5
    fast = match_segments(preds, gts, MaskSelector.AMODAL)
    oracle = bruteforce_match_oracle(preds, gts, MaskSelector.AMODAL)
    assert fast.pairs() == oracle.pairs() == {(0, 1), (1, 0)}
    assert fast.iou_sum == pytest.approx(oracle.iou_sum)


def test_matches_oracle_on_random_overlapping_strips():
    rng = np.random.default_rng(7)
    for _ in range(25):
        def draw(n):
            out = []
            for _ in range(n):
                start = int(rng.integers(0, 14))
                out.append(_strip(start, start + int(rng.integers(4, 7))))
            return out

        preds, gts = draw(int(rng.integers(0, 5))), draw(int(rng.integers(0, 5)))
        fast = match_segments(preds, gts, MaskSelector.AMODAL)
        oracle = bruteforce_match_oracle(preds, gts, MaskSelector.AMODAL)
        assert fast.iou_sum == pytest.approx(oracle.iou_sum, abs=1e-12)


def test_all_low_iou_gives_empty_matching():
    result = match_segments([_strip(0, 3), _strip(10, 13)], [_strip(2, 8), _strip(12, 18)])
    assert result.tp == ()


def test_void_pixels_leave_the_union():
    gt = [_strip(0, 6)]
    pred = [_strip(0, 10)]
    void = np.zeros((1, 20), dtype=bool)
    void[0, 6:10] = True
    assert pairwise_iou([pred[0].visible], [gt[0].visible])[0, 0] == pytest.approx(0.6)
    assert pairwise_iou([pred[0].visible], [gt[0].visible], void)[0, 0] == pytest.approx(1.0)


def test_oracle_rejects_large_instances():
    segs = [_strip(i, i + 1) for i in range(ORACLE_MAX_SEGMENTS + 1)]
    with pytest.raises(ValueError, match="exhaustive search limit"):
        bruteforce_match_oracle(segs, segs)

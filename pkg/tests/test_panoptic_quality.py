import numpy as np
import pytest

from src.metrics.panoptic import PanopticStats, amodal_panoptic_quality, panoptic_quality
from src.models.instances import InstanceAnnotation
from src.models.maps import AmodalPanopticMap, PanopticMap
from src.models.masks import BinaryMask
from src.models.taxonomy import OASS18

ROAD, PEDESTRIANS, CAR = 0, 11, 13


def _pan(ids):
    return PanopticMap.from_ids(np.array(ids, dtype=np.uint32), OASS18)


def _grid(shape, rows, cols):
    dense = np.zeros(shape, dtype=bool)
    dense[rows, cols] = True
    return dense


def test_identical_maps_give_one():
    ids = [[13001, 13001, 1], [11001, 1, 1]]
    report = panoptic_quality(_pan(ids), _pan(ids))
    assert report.per_class == {ROAD: 1.0, PEDESTRIANS: 1.0, CAR: 1.0}


def _car_scene(pred_car_pixels):
    gt = np.full((4, 5), 1, dtype=np.uint32)
    gt[0:2, :] = 13001
    pred = gt.copy()
    car = np.zeros(10, dtype=bool)
    car[:pred_car_pixels] = True
    pred[0:2, :] = np.where(car.reshape(2, 5), 13001, 0)
    return _pan(pred), _pan(gt)


def test_partial_car_gives_iou_as_pq():
    pred, gt = _car_scene(6)
    report = panoptic_quality(pred, gt)
    assert report.per_class[CAR] == pytest.approx(0.6)
    assert report.per_class[ROAD] == 1.0


def test_low_iou_car_is_fp_and_fn():
    pred, gt = _car_scene(4)
    report = panoptic_quality(pred, gt)
    assert report.per_class[CAR] == 0.0


def test_prediction_on_void_is_not_a_false_positive():
    gt = _pan([[1, 1], [0, 0]])
    pred = _pan([[1, 1], [13001, 13001]])
    report = panoptic_quality(pred, gt)
    assert report.per_class == {ROAD: 1.0}


def test_void_pixels_are_left_out_of_the_union():
    gt = _pan([[13001, 13001, 0], [1, 1, 1]])
    pred = _pan([[13001, 13001, 13001], [1, 1, 1]])
    assert panoptic_quality(pred, gt).per_class[CAR] == 1.0


def test_dimension_mismatch():
    with pytest.raises(ValueError, match="dims differ"):
        panoptic_quality(_pan([[1, 1]]), _pan([[1], [1]]))


def _occlusion_scene(pred_ped_amodal):
    shape = (4, 6)
    ids = np.full(shape, 1, dtype=np.uint32)
    ped_amodal = _grid(shape, slice(0, 2), slice(0, 5))
    car = _grid(shape, slice(0, 2), slice(3, 6))
    ped_visible = ped_amodal & ~car
    ids[ped_visible] = 11001
    ids[car] = 13001
    panoptic = _pan(ids)
    car_inst = InstanceAnnotation.single_mask(CAR, 1.0, BinaryMask.from_dense(car))
    gt_ped = InstanceAnnotation(
        PEDESTRIANS, 1.0, BinaryMask.from_dense(ped_visible), BinaryMask.from_dense(ped_amodal)
    )
    pred_mask = ped_amodal if pred_ped_amodal == "full" else ped_visible
    pred_ped = InstanceAnnotation(
        PEDESTRIANS, 0.9, BinaryMask.from_dense(ped_visible), BinaryMask.from_dense(pred_mask)
    )
    gt = AmodalPanopticMap(panoptic, (gt_ped, car_inst))
    pred = AmodalPanopticMap(panoptic, (pred_ped, car_inst))
    return pred, gt


def test_apq_scores_full_region_recovery():
    pred, gt = _occlusion_scene("visible_only")
    assert gt.instances[0].amodal.area == 10 and gt.instances[0].visible.area == 6
    assert amodal_panoptic_quality(pred, gt).per_class[PEDESTRIANS] == pytest.approx(0.6)

    pred, gt = _occlusion_scene("full")
    report = amodal_panoptic_quality(pred, gt)
    assert report.per_class == {ROAD: 1.0, PEDESTRIANS: 1.0, CAR: 1.0}


def test_stats_merge_and_restrict():
    a = PanopticStats(18)
    a.add_match(CAR, 0.8)
    a.add_fp(ROAD)
    b = PanopticStats(18)
    b.add_fn(CAR)
    a.merge(b)
    assert a.report().per_class[CAR] == pytest.approx(0.8 / 1.5)
    only_stuff = a.restricted(OASS18.stuff_ids)
    assert set(only_stuff.report().per_class) == {ROAD}
    with pytest.raises(ValueError):
        a.add_fp(18)

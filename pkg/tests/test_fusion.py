import numpy as np
import pytest

from src.fusion.oafusion import BranchOutputs, FusionConfig, run_oafusion
from src.fusion.panoptic_fusion import fuse_amodal_panoptic, fuse_panoptic
from src.fusion.voting import vote_amodal_class, vote_instance_class
from src.metrics.evaluator import evaluate_oass
from src.metrics.reports import METRIC_KEYS
from src.models.instances import Detection, InstanceAnnotation
from src.models.maps import VOID_ID, SemanticMap
from src.models.masks import BinaryMask
from src.selftrain.pseudo_label import ProbTensor
from src.synth.scene import SynthSpec, synth_dataset

ROAD, SKY, PEDESTRIANS, CAR = 0, 10, 11, 13
SHAPE = (6, 8)


def _mask(rows, cols, shape=SHAPE):
    dense = np.zeros(shape, dtype=bool)
    dense[rows, cols] = True
    return BinaryMask.from_dense(dense)


def _semantic(paint=()):
    labels = np.full(SHAPE, ROAD, dtype=np.uint8)
    labels[:2] = SKY
    for mask, class_id in paint:
        labels[mask.dense] = class_id
    return SemanticMap(labels, 18)


def test_vote_uniform_region():
    car = _mask(slice(2, 4), slice(1, 4))
    assert vote_instance_class(car, _semantic([(car, CAR)])) == CAR


def test_vote_majority_of_thing_pixels():
    mask = _mask(slice(2, 4), slice(0, 5))
    ped = _mask(slice(2, 4), slice(3, 5))
    semantic = _semantic([(mask, CAR), (ped, PEDESTRIANS)])
    assert vote_instance_class(mask, semantic) == CAR


def test_vote_over_stuff_uses_the_ring():
    inside = _mask(slice(3, 5), slice(2, 4))
    neighbour = _mask(slice(3, 5), slice(4, 5))
    assert vote_instance_class(inside, _semantic([(neighbour, PEDESTRIANS)])) == PEDESTRIANS
    assert vote_instance_class(inside, _semantic()) is None


def test_vote_rejects_empty_mask():
    with pytest.raises(ValueError, match="empty mask"):
        vote_instance_class(BinaryMask.empty(*SHAPE), _semantic())


def _occluded_pedestrian():
    """Pedestrian amodal of 10 px, 6 of them behind a car."""
    ped = _mask(slice(2, 4), slice(0, 5))
    car = _mask(slice(2, 4), slice(2, 7))
    semantic = _semantic([(car, CAR), (ped - car, PEDESTRIANS)])
    return ped, car, semantic


def test_amodal_vote_uses_the_unoccluded_part():
    ped, car, semantic = _occluded_pedestrian()
    assert (ped & car).area == 6 and ped.area == 10
    assert vote_instance_class(ped, semantic) == CAR
    assert vote_amodal_class(ped, [car], semantic) == PEDESTRIANS


def test_amodal_vote_without_others_reduces_to_plain_vote():
    ped, _, semantic = _occluded_pedestrian()
    assert vote_amodal_class(ped, [], semantic) == vote_instance_class(ped, semantic)


def test_amodal_vote_on_fully_covered_target_falls_back():
    ped, _, semantic = _occluded_pedestrian()
    cover = _mask(slice(1, 5), slice(0, 8))
    assert vote_amodal_class(ped, [cover], semantic) == CAR


def test_amodal_vote_without_thing_pixels_outside_the_overlap_uses_the_whole_mask():
    target = _mask(slice(2, 6), slice(0, 4))
    other = _mask(slice(2, 4), slice(0, 4))
    assert vote_amodal_class(target, [other], _semantic([(other, CAR)])) == CAR
    assert vote_amodal_class(target, [other], _semantic()) is None


def test_fuse_without_instances_gives_stuff_segments():
    panoptic = fuse_panoptic(_semantic(), [])
    assert [s.segment_id for s in panoptic.segments] == [1, 10001]
    assert not any(s.is_thing for s in panoptic.segments)


def test_higher_score_keeps_contested_pixels():
    a = _mask(slice(2, 5), slice(0, 4))
    b = _mask(slice(2, 5), slice(2, 6))
    semantic = _semantic([(a | b, CAR)])
    low = InstanceAnnotation.single_mask(CAR, 0.8, b)
    high = InstanceAnnotation.single_mask(CAR, 0.9, a)
    panoptic = fuse_panoptic(semantic, [low, high])
    assert (panoptic.ids[a.dense] == 13001).all()
    assert (panoptic.ids[(b - a).dense] == 13002).all()


def test_fully_covered_instance_is_dropped():
    big = _mask(slice(2, 5), slice(0, 6))
    small = _mask(slice(3, 4), slice(1, 3))
    semantic = _semantic([(big, CAR)])
    panoptic = fuse_panoptic(
        semantic, [InstanceAnnotation.single_mask(CAR, 0.5, small), InstanceAnnotation.single_mask(CAR, 0.9, big)]
    )
    assert [s.segment_id for s in panoptic.segments if s.is_thing] == [13001]


def test_thing_pixels_without_instance_are_void():
    car = _mask(slice(2, 4), slice(1, 4))
    panoptic = fuse_panoptic(_semantic([(car, CAR)]), [])
    assert (panoptic.ids[car.dense] == VOID_ID).all()


def test_amodal_region_extends_under_the_occluder():
    ped, car, semantic = _occluded_pedestrian()
    instances = [
        InstanceAnnotation.single_mask(CAR, 0.95, car),
        InstanceAnnotation.single_mask(PEDESTRIANS, 0.9, ped),
    ]
    visible = [
        InstanceAnnotation.single_mask(CAR, 0.95, car),
        InstanceAnnotation.single_mask(PEDESTRIANS, 0.9, ped - car),
    ]
    panoptic = fuse_panoptic(semantic, visible)
    amodal = fuse_amodal_panoptic(semantic, instances, panoptic=panoptic)
    ped_segment = amodal.instances[1]
    assert ped_segment.category == PEDESTRIANS
    assert (panoptic.ids[(ped_segment.amodal & car).dense] == 13001).all()
    assert amodal.segment_ids == (13001, 11001)


def test_amodal_fusion_without_occlusion_matches_visible():
    car = _mask(slice(2, 4), slice(1, 4))
    semantic = _semantic([(car, CAR)])
    instances = [InstanceAnnotation.single_mask(CAR, 0.9, car)]
    amodal = fuse_amodal_panoptic(semantic, instances)
    assert amodal.instances[0].amodal == car
    assert fuse_amodal_panoptic(semantic, []).instances == ()


def test_empty_branches_pass_semantic_through():
    semantic = _semantic()
    outputs = run_oafusion(BranchOutputs(semantic, (), ()))
    assert outputs.semantic is semantic
    assert outputs.instance == () and outputs.amodal_instance == ()
    assert outputs.amodal_panoptic.instances == ()


def test_single_unoccluded_object():
    car = _mask(slice(2, 4), slice(1, 4))
    branches = BranchOutputs(_semantic([(car, CAR)]), (Detection(car, 0.97),), (Detection(car, 0.97),))
    outputs = run_oafusion(branches)
    assert outputs.instance == outputs.amodal_instance
    assert outputs.instance[0].category == CAR


def test_score_threshold_filters_detections():
    car = _mask(slice(2, 4), slice(1, 4))
    branches = BranchOutputs(_semantic([(car, CAR)]), (Detection(car, 0.9),), (Detection(car, 0.9),))
    assert run_oafusion(branches).instance == ()
    assert len(run_oafusion(branches, score_threshold=0.5).instance) == 1
    assert FusionConfig().score_threshold == 0.95


def test_occluded_pedestrian_is_classified_by_its_amodal_vote():
    ped, car, semantic = _occluded_pedestrian()
    branches = BranchOutputs(
        semantic,
        (Detection(car, 0.99), Detection(ped - car, 0.98)),
        (Detection(car, 0.99), Detection(ped, 0.98)),
    )
    outputs = run_oafusion(branches)
    assert [a.category for a in outputs.amodal_instance] == [CAR, PEDESTRIANS]


def test_probability_input_is_reduced_by_argmax():
    probs = np.zeros((*SHAPE, 18))
    probs[..., ROAD] = 1.0
    outputs = run_oafusion(BranchOutputs(ProbTensor(probs), (), ()))
    assert (outputs.semantic.labels == ROAD).all()


def test_dimension_mismatch_is_rejected():
    with pytest.raises(ValueError, match="differ from semantic output"):
        BranchOutputs(_semantic(), (Detection(BinaryMask.empty(2, 2), 0.9),), ())


IDENTITY_SCENES = 100


@pytest.mark.slow
def test_ground_truth_branches_reproduce_ground_truth():
    assert FusionConfig().score_threshold == 0.95
    scenes = synth_dataset(SynthSpec(max_objects=6, occlusion_prob=0.7, seed=300), IDENTITY_SCENES)
    gts = {k: s.gt for k, s in scenes.items()}
    fused = {k: run_oafusion(BranchOutputs.from_ground_truth(gt)) for k, gt in gts.items()}
    report = evaluate_oass(fused, gts)
    for key in METRIC_KEYS:
        assert getattr(report, key) == 1.0, key

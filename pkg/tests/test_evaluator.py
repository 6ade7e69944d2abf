import os
import pickle
import time

import numpy as np
import pytest

from src.metrics.evaluator import evaluate_image, evaluate_oass
from src.metrics.reports import METRIC_KEYS, ClassReport, OassReport
from src.models.bundle import OassOutputs
from src.models.instances import InstanceAnnotation
from src.models.maps import PanopticMap, SemanticMap
from src.models.masks import BinaryMask
from src.synth.scene import SynthSpec, synth_dataset


def _bundle(car_cols=slice(0, 3)):
    labels = np.zeros((2, 6), dtype=np.uint8)
    labels[0, car_cols] = 13
    ids = np.where(labels == 13, 13001, 1).astype(np.uint32)
    car = InstanceAnnotation.single_mask(13, 1.0, BinaryMask.from_dense(labels == 13))
    return OassOutputs.from_ground_truth(SemanticMap(labels, 18), [car], PanopticMap.from_ids(ids))


@pytest.fixture(scope="module")
def synth_gts():
    scenes = synth_dataset(SynthSpec(height=32, width=32, max_objects=3, seed=5), 4)
    return {image_id: scene.gt for image_id, scene in scenes.items()}


def test_identical_dataset_scores_one(synth_gts):
    report = evaluate_oass(synth_gts, synth_gts)
    for key in METRIC_KEYS:
        assert getattr(report, key) == pytest.approx(1.0)


def test_missing_pairing_names_the_image():
    gts = {"a": _bundle(), "b": _bundle()}
    with pytest.raises(ValueError, match="no prediction for image 'b'"):
        evaluate_oass({"a": _bundle()}, gts)
    with pytest.raises(ValueError, match="no ground truth for image 'c'"):
        evaluate_oass({**gts, "c": _bundle()}, gts)


def test_image_errors_carry_the_id():
    gt = _bundle()
    labels = np.zeros((3, 6), dtype=np.uint8)
    small = OassOutputs.from_ground_truth(
        SemanticMap(labels, 18), [], PanopticMap.from_ids(np.ones((3, 6), dtype=np.uint32))
    )
    with pytest.raises(ValueError, match="image 'x'"):
        evaluate_oass({"x": small}, {"x": gt})
    with pytest.raises(ValueError, match="image 'x'"):
        evaluate_oass({"w": gt, "x": small}, {"w": gt, "x": gt}, threads=2)


def test_report_does_not_depend_on_threads(synth_gts):
    preds = {k: _shifted(v) for k, v in synth_gts.items()}
    single = evaluate_oass(preds, synth_gts, threads=1)
    multi = evaluate_oass(preds, synth_gts, threads=3)
    assert single == multi


def _shifted(gt: OassOutputs) -> OassOutputs:
    """Same bundle with the semantic map rolled one column."""
    labels = np.roll(gt.semantic.labels, 1, axis=1)
    return OassOutputs(
        semantic=SemanticMap(labels, gt.semantic.num_classes),
        instance=gt.instance,
        amodal_instance=gt.amodal_instance,
        panoptic=gt.panoptic,
        amodal_panoptic=gt.amodal_panoptic,
    )


def test_partial_car_lowers_instance_metrics():
    stats = evaluate_image(_bundle(slice(0, 2)), _bundle(slice(0, 4)))
    report = OassReport(
        iou=stats.confusion.report(),
        ap=ClassReport.from_values({}),
        aap=ClassReport.from_values({}),
        pq=stats.pq.report(),
        apq=stats.apq.report(),
    )
    assert report.iou.per_class[13] == pytest.approx(0.5)
    assert report.pq.per_class[13] == 0.0
    assert report.apq.per_class[13] == 0.0


def test_report_json_round_trip():
    report = OassReport(
        iou=ClassReport.from_values({0: 0.5, 1: 2 / 3}),
        ap=ClassReport.from_values({13: 0.6}),
        aap=ClassReport.from_values({}),
        pq=ClassReport.from_values({13: 0.6}),
        apq=ClassReport.from_values({11: 0.6}),
    )
    data = report.to_json_dict()
    assert data["miou"] == pytest.approx(7 / 12)
    assert data["per_class"]["ap"] == {"13": 0.6}
    assert OassReport.from_json_dict(data) == report
    data["mpq"] = 0.1
    with pytest.raises(ValueError, match="disagrees"):
        OassReport.from_json_dict(data)


@pytest.mark.slow
@pytest.mark.skipif((os.cpu_count() or 1) < 8, reason="needs at least 8 cores")
def test_eight_workers_speed_up_full_size_evaluation():
    spec = SynthSpec(height=400, width=2048, max_objects=6, min_size=40, perturbation=2, seed=70)
    scenes = synth_dataset(spec, 8)
    # independent copies, so no replica reuses masks decoded for another
    preds = {f"{k}_{r}": pickle.loads(pickle.dumps(s.pred)) for k, s in scenes.items() for r in range(8)}
    gts = {f"{k}_{r}": pickle.loads(pickle.dumps(s.gt)) for k, s in scenes.items() for r in range(8)}

    start = time.perf_counter()
    single = evaluate_oass(preds, gts, threads=1)
    serial = time.perf_counter() - start
    start = time.perf_counter()
    multi = evaluate_oass(preds, gts, threads=8)
    parallel = time.perf_counter() - start

    assert single == multi
    assert serial / parallel >= 3.0

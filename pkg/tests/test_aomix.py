import math

import numpy as np
import pytest

from src.augment.aomix import (
    AoMixConfig,
    AoMixStrategy,
    build_patch_mask,
    build_random_mask,
    class_mix,
    mask_source_image,
    random_pad,
    random_scale,
    run_aomix,
)
from src.models.maps import SemanticMap
from src.models.masks import BinaryMask


def _mask(rows, cols, shape):
    dense = np.zeros(shape, dtype=bool)
    dense[rows, cols] = True
    return BinaryMask.from_dense(dense)


def _fixed_scale(scale, **kwargs):
    return AoMixConfig(scale_min=scale, scale_max=scale, **kwargs)


@pytest.fixture
def source():
    """16×16 RGB source with a sky/road split and two objects."""
    rng = np.random.default_rng(0)
    image = rng.integers(1, 255, size=(16, 16, 3), dtype=np.uint8)
    labels = np.zeros((16, 16), dtype=np.uint8)
    labels[:6] = 10
    car = _mask(slice(8, 12), slice(2, 8), (16, 16))
    ped = _mask(slice(6, 14), slice(11, 14), (16, 16))
    labels[car.dense] = 13
    labels[ped.dense] = 11
    return image, SemanticMap(labels, 18), [car, ped]


def test_config_validation():
    with pytest.raises(ValueError):
        AoMixConfig(scale_min=0.9, scale_max=0.1)
    with pytest.raises(ValueError):
        AoMixConfig(fill_value=(0, 0, 300))
    cfg = AoMixConfig()
    assert (cfg.scale_min, cfg.scale_max) == (0.1, 0.8)


def test_random_scale_to_half_height():
    mask = _mask(slice(20, 30), slice(40, 45), (100, 100))
    scaled = random_scale(mask, _fixed_scale(0.5), np.random.default_rng(0))
    top, left, bottom, right = scaled.bbox()
    assert bottom - top == 50
    assert right - left == 25


def test_random_scale_shrinks_wide_content_on_both_axes():
    mask = _mask(slice(0, 2), slice(0, 20), (100, 40))
    scaled = random_scale(mask, _fixed_scale(0.5), np.random.default_rng(0))
    top, left, bottom, right = scaled.bbox()
    assert (bottom - top, right - left) == (4, 40)
    assert scaled.area == 160


def test_random_scale_identity():
    mask = _mask(slice(10, 30), slice(5, 17), (100, 100))
    assert random_scale(mask, _fixed_scale(0.2), np.random.default_rng(3)) == mask


def test_random_scale_rejects_empty():
    with pytest.raises(ValueError, match="empty"):
        random_scale(BinaryMask.empty(4, 4), AoMixConfig(), np.random.default_rng(0))


def test_random_pad_zero_slack_and_determinism():
    full = _mask(slice(0, 4), slice(0, 4), (4, 4))
    assert random_pad(full, 4, 4, np.random.default_rng(9)) == full
    small = _mask(slice(0, 2), slice(0, 3), (8, 8))
    a = random_pad(small, 8, 8, np.random.default_rng(5))
    b = random_pad(small, 8, 8, np.random.default_rng(5))
    assert a == b and a.area == small.area


def test_random_pad_rejects_oversized_content():
    with pytest.raises(ValueError, match="does not fit"):
        random_pad(_mask(slice(0, 6), slice(0, 2), (6, 6)), 4, 4, np.random.default_rng(0))


def test_random_mask_is_binary_union():
    mask = _mask(slice(0, 4), slice(0, 4), (8, 8))
    cfg = _fixed_scale(0.5)
    merged = build_random_mask([mask, mask, mask], cfg, np.random.default_rng(1))
    assert merged.dense.dtype == bool
    assert 16 <= merged.area <= 48
    single = build_random_mask([mask], cfg, np.random.default_rng(2))
    rng = np.random.default_rng(2)
    expected = random_pad(random_scale(mask, cfg, rng), 8, 8, rng)
    assert single == expected
    with pytest.raises(ValueError, match="at least one"):
        build_random_mask([], cfg, np.random.default_rng(0))


def test_masking_touches_only_the_intersection(source):
    image, _, amodal = source
    disjoint = _mask(slice(0, 4), slice(0, 4), (16, 16))
    assert np.array_equal(mask_source_image(image, amodal, disjoint, AoMixConfig()), image)

    everywhere = _mask(slice(0, 16), slice(0, 16), (16, 16))
    masked = mask_source_image(image, amodal, everywhere, AoMixConfig(fill_value=(0, 0, 0)))
    things = amodal[0].dense | amodal[1].dense
    assert (masked[things] == 0).all()
    assert np.array_equal(masked[~things], image[~things])


def test_whole_image_variant_fills_all_of_the_random_mask(source):
    image, _, amodal = source
    region = _mask(slice(0, 3), slice(0, 16), (16, 16))
    masked = mask_source_image(image, amodal, region, AoMixConfig(strategy=AoMixStrategy.WHOLE_IMAGE))
    assert (masked[:3] == 0).all()


def test_class_mix_uniform_source_transplants_everything():
    labels = SemanticMap(np.full((4, 4), 2, dtype=np.uint8), 18)
    src = np.full((4, 4, 3), 7, dtype=np.uint8)
    tgt = np.full((4, 4, 3), 200, dtype=np.uint8)
    result = class_mix(src, labels, tgt, AoMixConfig(), np.random.default_rng(0))
    assert result.provenance.all()
    assert np.array_equal(result.mixed_image, src)
    assert result.selected_classes == (2,)


def test_class_mix_selects_half_of_the_classes(source):
    image, labels, _ = source
    assert len(labels.classes_present()) == 4
    target = np.zeros_like(image)
    result = class_mix(image, labels, target, AoMixConfig(), np.random.default_rng(4))
    assert len(result.selected_classes) == 2
    pasted = np.isin(labels.labels, result.selected_classes)
    assert np.array_equal(result.provenance, pasted)
    assert (result.mixed_label.labels[~pasted] == 255).all()
    assert np.array_equal(result.mixed_label.labels[pasted], labels.labels[pasted])


def test_class_mix_uses_target_pseudo_labels(source):
    image, labels, _ = source
    target_label = SemanticMap(np.full((16, 16), 8, dtype=np.uint8), 18)
    result = class_mix(image, labels, image, AoMixConfig(), np.random.default_rng(4), target_label)
    assert (result.mixed_label.labels[~result.provenance] == 8).all()


def test_run_aomix_is_deterministic_per_seed(source):
    image, labels, amodal = source
    target = np.full_like(image, 90)
    a = run_aomix(image, labels, amodal, target, amodal, AoMixConfig(seed=3))
    b = run_aomix(image, labels, amodal, target, amodal, AoMixConfig(seed=3))
    assert np.array_equal(a.mixed_image, b.mixed_image)
    assert a.random_mask == b.random_mask
    masks = {run_aomix(image, labels, amodal, target, amodal, AoMixConfig(seed=s)).random_mask for s in range(6)}
    assert len(masks) > 1


def test_run_aomix_strategies(source):
    image, labels, amodal = source
    target = np.full_like(image, 90)
    default = run_aomix(image, labels, amodal, target, amodal, AoMixConfig(seed=1))
    source_only = run_aomix(
        image, labels, amodal, target, amodal, AoMixConfig(seed=1, strategy=AoMixStrategy.SOURCE_ONLY)
    )
    mixed_only = run_aomix(
        image, labels, amodal, target, amodal, AoMixConfig(seed=1, strategy=AoMixStrategy.MIXED_ONLY)
    )
    pasted = source_only.provenance
    assert np.array_equal(source_only.mixed_image[pasted], image[pasted])
    assert np.array_equal(mixed_only.masked_source, image)
    assert np.array_equal(mixed_only.mixed_image, default.mixed_image)


def test_patch_strategy_ignores_amodal_masks(source):
    image, labels, amodal = source
    cfg = AoMixConfig(seed=2, strategy=AoMixStrategy.PATCH, patch_size=4)
    result = run_aomix(image, labels, amodal, image, [], cfg)
    assert result.random_mask == build_patch_mask(16, 16, cfg, np.random.default_rng(2))


def test_empty_batch_leaves_source_unmasked(source):
    image, labels, amodal = source
    result = run_aomix(image, labels, amodal, image, [BinaryMask.empty(16, 16)], AoMixConfig(seed=0))
    assert result.random_mask.is_empty
    assert np.array_equal(result.masked_source, image)


def test_dimension_mismatch(source):
    image, labels, amodal = source
    with pytest.raises(ValueError):
        run_aomix(image, labels, amodal, np.zeros((8, 8, 3), dtype=np.uint8), amodal, AoMixConfig())


@pytest.mark.slow
def test_mix_invariants_hold_across_seeds(source):
    image, labels, amodal = source
    things = amodal[0].dense | amodal[1].dense
    expected_classes = math.ceil(len(labels.classes_present()) * AoMixConfig().class_fraction)
    targets = np.random.default_rng(99)
    for seed in range(500):
        target = targets.integers(0, 256, size=image.shape, dtype=np.uint8)
        result = run_aomix(image, labels, amodal, target, amodal, AoMixConfig(seed=seed))
        m_r = result.random_mask.dense
        assert m_r.dtype == bool and m_r.shape == (16, 16), seed
        changed = (result.masked_source != image).any(axis=2)
        assert np.array_equal(changed, m_r & things), seed
        assert (result.masked_source[changed] == 0).all(), seed
        assert result.mixed_image.shape == image.shape and result.mixed_image.dtype == np.uint8, seed
        pasted = result.provenance
        assert np.array_equal(result.mixed_image[pasted], result.masked_source[pasted]), seed
        assert np.array_equal(result.mixed_image[~pasted], target[~pasted]), seed
        assert len(result.selected_classes) == expected_classes, seed
        again = run_aomix(image, labels, amodal, target, amodal, AoMixConfig(seed=seed))
        assert np.array_equal(again.mixed_image, result.mixed_image), seed

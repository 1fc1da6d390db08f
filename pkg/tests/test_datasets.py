import numpy as np
import pytest

from pcakit.datasets import (
    DatasetView,
    LabeledSample,
    generate_synthetic_dataset,
    split_per_class,
    validate_prob_vector,
)
from pcakit.dynamics import TrainConfig, features, train_with_dynamics
from pcakit.images import RasterImage


def test_generation_deterministic_bitwise():
    a = generate_synthetic_dataset(10, 20, 32, seed=1)
    b = generate_synthetic_dataset(10, 20, 32, seed=1)
    for sa, sb in zip(a.samples, b.samples):
        assert sa.sample_id == sb.sample_id and sa.label == sb.label
        assert sa.image.pixels.tobytes() == sb.image.pixels.tobytes()


def test_counts_forced():
    view = generate_synthetic_dataset(2, 1, 8, seed=3)
    assert len(view) == 2
    assert sorted(s.label for s in view.samples) == [0, 1]


def test_seeds_differ():
    a = generate_synthetic_dataset(3, 2, 8, seed=1)
    b = generate_synthetic_dataset(3, 2, 8, seed=2)
    assert a.samples[0].image.pixels.tobytes() != b.samples[0].image.pixels.tobytes()


def test_per_class_prefix_property():
    small = generate_synthetic_dataset(4, 5, 16, seed=11)
    large = generate_synthetic_dataset(4, 9, 16, seed=11)
    for c in range(4):
        for j in range(5):
            a = small.samples[c * 5 + j]
            b = large.samples[c * 9 + j]
            assert a.label == b.label == c
            assert a.image.pixels.tobytes() == b.image.pixels.tobytes()


def test_toy_trainer_reaches_held_out_accuracy():
    # frozen learnability example: default schedule on the (10, 100, 32, seed=1) set
    full = generate_synthetic_dataset(10, 150, 32, seed=1)
    train, held_out = split_per_class(full, 100)
    assert len(train) == 1000 and len(held_out) == 500
    model, _ = train_with_dynamics(train, TrainConfig(seed=0))
    acc = float(np.mean(np.argmax(model.logits(features(held_out)), 1) == held_out.labels()))
    assert acc >= 0.80


def test_split_per_class_disjoint_ids():
    full = generate_synthetic_dataset(3, 6, 8, seed=2)
    train, test = split_per_class(full, 4)
    assert {s.sample_id for s in train} & {s.sample_id for s in test} == set()
    assert len(train) == 12 and len(test) == 6


def test_view_validation():
    img = RasterImage(np.zeros((2, 2, 1), dtype=np.float32))
    with pytest.raises(ValueError, match="unique"):
        DatasetView((LabeledSample(img, 0, 1), LabeledSample(img, 1, 1)), 2)
    with pytest.raises(ValueError, match="out of range"):
        DatasetView((LabeledSample(img, 5, 0),), 2)
    with pytest.raises(ValueError):
        DatasetView((), 2)


def test_view_lookup_and_subset():
    view = generate_synthetic_dataset(2, 3, 8, seed=4)
    assert view.by_id(4).sample_id == 4
    with pytest.raises(KeyError):
        view.by_id(99)
    sub = view.subset([5, 0])
    assert [s.sample_id for s in sub.samples] == [5, 0]


def test_content_hash_tracks_pixels():
    a = generate_synthetic_dataset(2, 2, 8, seed=1)
    b = generate_synthetic_dataset(2, 2, 8, seed=1)
    c = generate_synthetic_dataset(2, 2, 8, seed=9)
    assert a.content_hash() == b.content_hash() != c.content_hash()


def test_validate_prob_vector():
    assert validate_prob_vector([0.25, 0.75]).sum() == 1.0
    with pytest.raises(ValueError):
        validate_prob_vector([0.5, 0.6])
    with pytest.raises(ValueError):
        validate_prob_vector([-0.1, 1.1])
    with pytest.raises(ValueError):
        validate_prob_vector([[0.5, 0.5]])
    with pytest.raises(ValueError):
        validate_prob_vector([0.5, 0.5], num_classes=3)

import numpy as np
import pytest

from asa.datagen import (
    CorpusConfig,
    FrameDataset,
    SpeakerSpec,
    build_corpus,
    generate_corpus,
    sample_speaker,
    sample_utterances,
)
from asa.errors import ShapeError
from asa.formats import dataset_bytes


def simple_spec(shift=None, angle=0.0, k=3, dim=4, n=100):
    means = 10.0 * np.eye(k, dim)
    return SpeakerSpec(means, np.ones(k), np.zeros(dim) if shift is None else shift, angle, n)


def test_identity_transform_matches_pooled_distribution():
    spec = simple_spec()
    x = np.random.default_rng(0).normal(size=(5, 4))
    np.testing.assert_array_equal(spec.transform(x), x)
    # same draws through two identical speakers give identical data
    a = sample_speaker(spec, np.random.default_rng(1), "a")
    b = sample_speaker(simple_spec(), np.random.default_rng(1), "b")
    np.testing.assert_array_equal(a.features, b.features)


def test_class_means_follow_law_of_large_numbers():
    spec = simple_spec(shift=np.array([1.0, -2.0, 0.5, 0.0]), n=10_000)
    d = sample_speaker(spec, np.random.default_rng(3), "s")
    for k in range(3):
        emp = d.features[d.labels == k].mean(axis=0)
        expected = spec.class_means[k] + spec.speaker_shift
        assert np.all(np.abs(emp - expected) < 3 * spec.class_scales[k] / np.sqrt(10_000))


def test_rotation_preserves_norm_in_plane():
    spec = simple_spec(angle=0.7)
    x = np.random.default_rng(0).normal(size=(20, 4))
    y = spec.transform(x)
    np.testing.assert_allclose(np.linalg.norm(y[:, :2], axis=1), np.linalg.norm(x[:, :2], axis=1))
    np.testing.assert_array_equal(y[:, 2:], x[:, 2:])


def test_generate_corpus_is_deterministic():
    specs = [simple_spec(), simple_spec(shift=np.ones(4))]
    a = generate_corpus(specs, seed=5)
    b = generate_corpus(specs, seed=5)
    assert [dataset_bytes(d) for d in a] == [dataset_bytes(d) for d in b]
    assert dataset_bytes(generate_corpus(specs, seed=6)[0]) != dataset_bytes(a[0])


def test_degenerate_specs_rejected():
    with pytest.raises(ShapeError):
        generate_corpus([simple_spec(n=0)], seed=0)
    with pytest.raises(ShapeError):
        generate_corpus([], seed=0)
    with pytest.raises(ShapeError):
        SpeakerSpec(np.zeros((0, 3)), np.ones(0), np.zeros(3))


def test_separation_margin_enforced():
    with pytest.raises(ShapeError):
        SpeakerSpec(np.array([[0.0, 0.0], [3.0, 0.0]]), np.ones(2), np.zeros(2))
    SpeakerSpec(np.array([[0.0, 0.0], [4.0, 0.0]]), np.ones(2), np.zeros(2))


def test_dataset_rejects_bad_labels():
    with pytest.raises(ShapeError):
        FrameDataset(np.zeros((2, 3)), [0, 5], "s", 3)
    with pytest.raises(ShapeError):
        FrameDataset(np.zeros((2, 3)), [0], "s", 3)


def test_head_gives_nested_prefixes():
    d = sample_speaker(simple_spec(), np.random.default_rng(0), "s")
    np.testing.assert_array_equal(d.head(50).features, d.features[:50])
    np.testing.assert_array_equal(d.head(100).features[:50], d.head(50).features)
    with pytest.raises(ShapeError):
        d.head(len(d) + 1)


def test_utterances_are_runs_over_few_senones():
    spec = SpeakerSpec(10.0 * np.eye(6, 8), np.ones(6), np.zeros(8))
    d = sample_utterances(spec, np.random.default_rng(0), "t", 200, 20, 2)
    assert len(d) == 200
    for u in range(10):
        assert len(set(d.labels[20 * u:20 * (u + 1)])) <= 2


def test_default_corpus_shapes():
    c = build_corpus(CorpusConfig())
    assert len(c.si_train) == 8 * 2000 and len(c.target_test) == 2000 and len(c.target_adapt) == 400
    assert c.si_train.input_dim == 20 and c.si_train.num_senones == 10
    # small adaptation sets cover only part of the senone set
    assert len(set(c.target_adapt.head(50).labels)) < 10


@pytest.mark.parametrize("seed", range(3))
def test_default_spec_is_separable_by_nearest_class_mean(seed):
    c = build_corpus(CorpusConfig(seed=seed))
    means = c.target_spec.class_means
    X, y = c.si_heldout.features, c.si_heldout.labels
    pred = np.argmin(((X[:, None, :] - means[None]) ** 2).sum(-1), axis=1)
    assert np.mean(pred != y) < 0.05

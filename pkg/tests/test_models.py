import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from asa.errors import ShapeError
from asa.models import (
    AcousticModel,
    Discriminator,
    ModelRole,
    checksum,
    classify_senones,
    clone_model,
    discriminate,
    extract_features,
    init_acoustic_network,
    init_discriminator,
    senone_logits,
    split_model,
)
from asa.nn import DenseLayer, Network, forward, init_network, softmax


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 4), st.integers(0, 10_000))
def test_split_composition_reproduces_full_network(n_h, seed):
    full = init_acoustic_network(6, [8, 7, 5, 4], 3, seed)
    X = np.random.default_rng(seed).normal(size=(9, 6))
    m = split_model(full, n_h)
    np.testing.assert_array_equal(classify_senones(m, X), softmax(forward(full, X)[0]))


def test_split_at_all_hidden_layers():
    full = init_acoustic_network(6, [8, 8, 8, 8], 5, seed=0)
    m = split_model(full, 4)
    assert len(m.feature_extractor.layers) == 4
    assert len(m.senone_classifier.layers) == 1
    assert m.feature_dim == 8 and m.num_senones == 5 and m.input_dim == 6


@pytest.mark.parametrize("n_h", [0, 5, -1])
def test_split_rejects_out_of_range(n_h):
    full = init_acoustic_network(6, [8, 8, 8, 8], 5, seed=0)
    with pytest.raises(ShapeError):
        split_model(full, n_h)


def test_split_does_not_alias_the_full_network():
    full = init_acoustic_network(4, [5, 5], 3, seed=1)
    m = split_model(full, 1)
    m.feature_extractor.layers[0].weight[:] = 0.0
    assert np.any(full.layers[0].weight)


def test_clone_is_independent_and_changes_role():
    si = split_model(init_acoustic_network(4, [5, 5], 3, seed=2), 2)
    before = checksum(si.parameters())
    sd = clone_model(si)
    assert sd.role is ModelRole.SD and si.role is ModelRole.SI
    assert checksum(sd.parameters()) == before
    sd.senone_classifier.layers[0].bias += 1.0
    assert checksum(si.parameters()) == before
    assert checksum(sd.parameters()) != before


def test_acoustic_model_validation():
    f = init_network([4, 5], "tanh", seed=0)
    with pytest.raises(ShapeError):
        AcousticModel(f, init_network([6, 3], "identity", seed=0), 1)
    with pytest.raises(ShapeError):
        AcousticModel(f, init_network([5, 3], "tanh", seed=0), 1)
    with pytest.raises(ShapeError):
        AcousticModel(f, init_network([5, 3], "identity", seed=0), 2)


def test_logits_and_posteriors():
    m = split_model(init_acoustic_network(4, [6, 6], 3, seed=3), 1)
    X = np.random.default_rng(0).normal(size=(5, 4))
    p = classify_senones(m, X)
    np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-12)
    np.testing.assert_array_equal(p, softmax(senone_logits(m, X)))
    assert extract_features(m, X).shape == (5, 6)


def test_features_reject_wrong_width():
    m = split_model(init_acoustic_network(4, [6], 3, seed=3), 1)
    with pytest.raises(ShapeError):
        extract_features(m, np.zeros((2, 5)))


def test_discriminator_needs_sigmoid_unit():
    with pytest.raises(ShapeError):
        Discriminator(init_network([4, 2], "sigmoid", seed=0))
    with pytest.raises(ShapeError):
        Discriminator(init_network([4, 1], "tanh", seed=0))
    d = init_discriminator(4, (8, 8), seed=0)
    assert d.input_dim == 4 and d.net.activations == ["tanh", "tanh", "sigmoid"]


def test_discriminate_is_clamped():
    big = Discriminator(Network([DenseLayer([[1e4]], [0.0], "sigmoid")]))
    p = discriminate(big, [[10.0], [-10.0]])
    assert 0.0 < p[1] < p[0] < 1.0


def test_checksum_tracks_every_byte():
    m = split_model(init_acoustic_network(3, [4], 2, seed=0), 1)
    a = checksum(m.parameters())
    m.feature_extractor.layers[0].weight[0, 0] = np.nextafter(m.feature_extractor.layers[0].weight[0, 0], 9)
    assert checksum(m.parameters()) != a

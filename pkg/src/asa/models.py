"""Acoustic models split into feature extractor / senone classifier, and discriminators."""

from __future__ import annotations

import copy
import hashlib
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .errors import ShapeError
from .nn import LOG_EPS, Network, as_batch, forward, init_network, softmax


class ModelRole(str, Enum):
    SI = "SI"
    SD = "SD"


@dataclass
class AcousticModel:
    """An extractor ``M_f`` (first ``split_index`` hidden layers) and a classifier ``M_y``.

    The classifier's last layer emits logits; the softmax head is applied by
    :func:`classify_senones` so that the loss can use the fused softmax/CE
    gradient.
    """

    feature_extractor: Network
    senone_classifier: Network
    split_index: int
    role: ModelRole = ModelRole.SI

    def __post_init__(self):
        if self.feature_extractor.output_dim != self.senone_classifier.input_dim:
            raise ShapeError(
                f"extractor emits {self.feature_extractor.output_dim} features but "
                f"classifier expects {self.senone_classifier.input_dim}"
            )
        if self.senone_classifier.layers[-1].activation != "identity":
            raise ShapeError("classifier output layer must emit logits (identity activation)")
        if self.split_index != len(self.feature_extractor.layers):
            raise ShapeError("split_index must equal the number of extractor layers")

    @property
    def num_senones(self) -> int:
        return self.senone_classifier.output_dim

    @property
    def input_dim(self) -> int:
        return self.feature_extractor.input_dim

    @property
    def feature_dim(self) -> int:
        return self.feature_extractor.output_dim

    def full_network(self) -> Network:
        return Network(list(self.feature_extractor.layers) + list(self.senone_classifier.layers))

    def parameters(self) -> list[np.ndarray]:
        return self.feature_extractor.parameters() + self.senone_classifier.parameters()


@dataclass
class Discriminator:
    net: Network

    def __post_init__(self):
        if self.net.output_dim != 1 or self.net.layers[-1].activation != "sigmoid":
            raise ShapeError("a discriminator must end in a single sigmoid unit")

    @property
    def input_dim(self) -> int:
        return self.net.input_dim


def init_acoustic_network(
    input_dim: int, hidden: Sequence[int], num_senones: int, seed: int, activation: str = "tanh"
) -> Network:
    sizes = [input_dim, *hidden, num_senones]
    acts = [activation] * len(hidden) + ["identity"]
    return init_network(sizes, acts, seed)


def init_discriminator(input_dim: int, hidden: Sequence[int], seed: int, activation: str = "tanh") -> Discriminator:
    sizes = [input_dim, *hidden, 1]
    acts = [activation] * len(hidden) + ["sigmoid"]
    return Discriminator(init_network(sizes, acts, seed))


def split_model(full: Network, n_h: int) -> AcousticModel:
    """Cut ``full`` after its ``n_h``-th hidden layer."""
    n_hidden = len(full.layers) - 1
    if not 1 <= n_h <= n_hidden:
        raise ShapeError(f"n_h must be in [1, {n_hidden}], got {n_h}")
    full = full.copy()
    return AcousticModel(Network(full.layers[:n_h]), Network(full.layers[n_h:]), n_h)


def clone_model(m: AcousticModel, role: ModelRole = ModelRole.SD) -> AcousticModel:
    out = copy.deepcopy(m)
    out.role = role
    return out


def extract_features(m: AcousticModel, X) -> np.ndarray:
    X = as_batch(X, m.input_dim)
    return forward(m.feature_extractor, X)[0]


def senone_logits(m: AcousticModel, X) -> np.ndarray:
    return forward(m.senone_classifier, extract_features(m, X))[0]


def classify_senones(m: AcousticModel, X) -> np.ndarray:
    return softmax(senone_logits(m, X))


def clamp_prob(p: np.ndarray) -> np.ndarray:
    return np.clip(p, LOG_EPS, 1.0 - LOG_EPS)


def discriminate(d: Discriminator, F) -> np.ndarray:
    """Posterior that each row of ``F`` came from the SD model, clamped away from 0 and 1."""
    F = as_batch(F, d.input_dim)
    return clamp_prob(forward(d.net, F)[0][:, 0])


def checksum(params: Sequence[np.ndarray]) -> str:
    h = hashlib.sha256()
    for p in params:
        h.update(np.ascontiguousarray(p, dtype="<f8").tobytes())
    return h.hexdigest()

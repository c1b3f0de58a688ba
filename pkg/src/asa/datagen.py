"""Synthetic multi-speaker frame corpora.

Every speaker shares the same class-conditional Gaussians (one per senone).
A speaker's frames are ``R(theta) @ (mean_k + scale_k * z) + shift``, where
``R(theta)`` rotates the plane spanned by the first two coordinates. The
SI speakers get small random transforms and the target speaker a large one,
so an SI model trained on the pool degrades on the target.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Sequence

import numpy as np

from .errors import ShapeError
from .losses import check_labels

# frames are rotated in the plane of these two coordinates
ROTATION_PLANE = (0, 1)
SEPARATION_FACTOR = 4.0


@dataclass
class FrameDataset:
    features: np.ndarray
    labels: np.ndarray
    speaker_id: str
    num_senones: int

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.features.ndim != 2:
            raise ShapeError("features must be a 2-D array")
        self.labels = check_labels(self.labels, self.num_senones)
        if self.labels.shape[0] != self.features.shape[0]:
            raise ShapeError(
                f"{self.features.shape[0]} frames but {self.labels.shape[0]} labels"
            )

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def input_dim(self) -> int:
        return self.features.shape[1]

    def head(self, n: int) -> "FrameDataset":
        """First ``n`` frames; nested prefixes make nested adaptation sets."""
        if n > len(self):
            raise ShapeError(f"requested {n} frames from a set of {len(self)}")
        return FrameDataset(self.features[:n], self.labels[:n], self.speaker_id, self.num_senones)

    @staticmethod
    def concat(parts: Sequence["FrameDataset"], speaker_id: str) -> "FrameDataset":
        if not parts:
            raise ShapeError("nothing to concatenate")
        return FrameDataset(
            np.concatenate([p.features for p in parts]),
            np.concatenate([p.labels for p in parts]),
            speaker_id,
            parts[0].num_senones,
        )


@dataclass
class SpeakerSpec:
    class_means: np.ndarray
    class_scales: np.ndarray
    speaker_shift: np.ndarray
    speaker_rotation_angle: float = 0.0
    frames_per_class: int = 100

    def __post_init__(self):
        self.class_means = np.asarray(self.class_means, dtype=np.float64)
        self.class_scales = np.asarray(self.class_scales, dtype=np.float64)
        self.speaker_shift = np.asarray(self.speaker_shift, dtype=np.float64)
        if self.class_means.ndim != 2 or self.class_means.shape[0] == 0:
            raise ShapeError("need at least one class mean")
        if self.frames_per_class < 0:
            raise ShapeError("frames_per_class must be non-negative")
        k, dim = self.class_means.shape
        if self.class_scales.shape != (k,) or np.any(self.class_scales <= 0):
            raise ShapeError("need one positive scale per class")
        if self.speaker_shift.shape != (dim,):
            raise ShapeError("speaker_shift must match the feature dimension")
        if dim < 2 and self.speaker_rotation_angle != 0.0:
            raise ShapeError("rotation needs at least two feature dimensions")
        min_sep = SEPARATION_FACTOR * self.class_scales.max()
        for i, j in combinations(range(k), 2):
            if np.linalg.norm(self.class_means[i] - self.class_means[j]) < min_sep:
                raise ShapeError(f"class means {i} and {j} are closer than {min_sep:.3g}")

    @property
    def num_classes(self) -> int:
        return self.class_means.shape[0]

    @property
    def dim(self) -> int:
        return self.class_means.shape[1]

    def transform(self, x: np.ndarray) -> np.ndarray:
        x = x.copy()
        if self.speaker_rotation_angle:
            a, b = ROTATION_PLANE
            c, s = np.cos(self.speaker_rotation_angle), np.sin(self.speaker_rotation_angle)
            xa, xb = x[:, a].copy(), x[:, b].copy()
            x[:, a] = c * xa - s * xb
            x[:, b] = s * xa + c * xb
        return x + self.speaker_shift


def sample_speaker(spec: SpeakerSpec, rng: np.random.Generator, speaker_id: str,
                   frames_per_class: int | None = None) -> FrameDataset:
    n = spec.frames_per_class if frames_per_class is None else frames_per_class
    labels = np.repeat(np.arange(spec.num_classes), n)
    z = rng.standard_normal((labels.size, spec.dim))
    x = spec.class_means[labels] + spec.class_scales[labels, None] * z
    order = rng.permutation(labels.size)
    return FrameDataset(spec.transform(x[order]), labels[order], speaker_id, spec.num_classes)


def sample_utterances(spec: SpeakerSpec, rng: np.random.Generator, speaker_id: str, total_frames: int,
                      utterance_frames: int, utterance_senones: int) -> FrameDataset:
    """Frames grouped into utterances, each a run over a few randomly chosen senones.

    Prefixes of the result cover only part of the senone set, like a small
    number of adaptation utterances does.
    """
    if not 1 <= utterance_senones <= spec.num_classes or utterance_frames < utterance_senones:
        raise ShapeError("invalid utterance shape")
    labels = []
    while len(labels) < total_frames:
        classes = rng.choice(spec.num_classes, size=utterance_senones, replace=False)
        cuts = np.sort(rng.choice(np.arange(1, utterance_frames), size=utterance_senones - 1, replace=False))
        for k, run in zip(classes, np.diff(np.concatenate([[0], cuts, [utterance_frames]]))):
            labels += [k] * int(run)
    labels = np.array(labels[:total_frames], dtype=np.int64)
    z = rng.standard_normal((labels.size, spec.dim))
    x = spec.class_means[labels] + spec.class_scales[labels, None] * z
    return FrameDataset(spec.transform(x), labels, speaker_id, spec.num_classes)


def generate_corpus(specs: Sequence[SpeakerSpec], seed: int,
                    speaker_ids: Sequence[str] | None = None) -> list[FrameDataset]:
    """One shuffled dataset per speaker, deterministic in ``seed``."""
    if not specs:
        raise ShapeError("need at least one speaker")
    if speaker_ids is None:
        speaker_ids = [f"spk{i:02d}" for i in range(len(specs))]
    if any(s.frames_per_class == 0 for s in specs):
        raise ShapeError("degenerate speaker spec with zero frames")
    shapes = {s.class_means.shape for s in specs}
    if len(shapes) != 1:
        raise ShapeError("all speakers must share class count and dimension")
    children = np.random.SeedSequence(seed).spawn(len(specs))
    return [
        sample_speaker(spec, np.random.default_rng(child), sid)
        for spec, child, sid in zip(specs, children, speaker_ids)
    ]


@dataclass
class CorpusConfig:
    input_dim: int = 20
    num_senones: int = 10
    n_si_speakers: int = 8
    si_frames: int = 2000
    si_heldout_frames: int = 500
    adapt_pool_frames: int = 400
    target_test_frames: int = 2000
    mean_spread: float = 0.8
    scale_range: tuple[float, float] = (0.95, 1.05)
    si_shift: float = 0.5
    si_rotation: float = 0.1
    target_shift: float = 2.5
    target_rotation: float = 0.6
    # adaptation pool structure; utterance_frames=0 draws i.i.d. balanced frames
    utterance_frames: int = 20
    utterance_senones: int = 3
    seed: int = 0


@dataclass
class Corpus:
    si_train: FrameDataset
    si_heldout: FrameDataset
    target_adapt: FrameDataset
    target_test: FrameDataset
    target_spec: SpeakerSpec
    si_specs: list[SpeakerSpec] = field(default_factory=list)


def draw_class_model(cfg: CorpusConfig, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    lo, hi = cfg.scale_range
    scales = rng.uniform(lo, hi, size=cfg.num_senones)
    min_sep = SEPARATION_FACTOR * scales.max()
    for _ in range(1000):
        means = cfg.mean_spread * rng.standard_normal((cfg.num_senones, cfg.input_dim))
        d = np.linalg.norm(means[:, None] - means[None], axis=-1)
        if d[np.triu_indices(cfg.num_senones, 1)].min() >= min_sep:
            return means, scales
    raise ShapeError("could not place class means with the required separation; raise mean_spread")


def _random_direction(rng: np.random.Generator, dim: int) -> np.ndarray:
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def per_class(total: int, num_senones: int) -> int:
    if total % num_senones:
        raise ShapeError(f"{total} frames do not split evenly over {num_senones} classes")
    return total // num_senones


def build_corpus(cfg: CorpusConfig) -> Corpus:
    """SI training pool, SI held-out pool, target adaptation pool and target test set."""
    if cfg.n_si_speakers < 2:
        raise ShapeError("SI training needs at least two speakers")
    ss = np.random.SeedSequence(cfg.seed)
    model_seq, spk_seq, draw_seq = ss.spawn(3)
    means, scales = draw_class_model(cfg, np.random.default_rng(model_seq))
    srng = np.random.default_rng(spk_seq)
    si_specs = [
        SpeakerSpec(
            means, scales,
            cfg.si_shift * srng.uniform(0, 1) * _random_direction(srng, cfg.input_dim),
            cfg.si_rotation * srng.uniform(-1, 1),
        )
        for _ in range(cfg.n_si_speakers)
    ]
    target = SpeakerSpec(
        means, scales,
        cfg.target_shift * _random_direction(srng, cfg.input_dim),
        cfg.target_rotation * srng.choice([-1.0, 1.0]),
    )
    drng = np.random.default_rng(draw_seq)
    k = cfg.num_senones
    si_train = [sample_speaker(s, drng, f"si{i:02d}", per_class(cfg.si_frames, k)) for i, s in enumerate(si_specs)]
    si_held = [sample_speaker(s, drng, f"si{i:02d}", per_class(cfg.si_heldout_frames, k)) for i, s in enumerate(si_specs)]
    if cfg.utterance_frames:
        adapt = sample_utterances(target, drng, "target", cfg.adapt_pool_frames,
                                  cfg.utterance_frames, cfg.utterance_senones)
    else:
        adapt = sample_speaker(target, drng, "target", per_class(cfg.adapt_pool_frames, k))
    test = sample_speaker(target, drng, "target", per_class(cfg.target_test_frames, k))
    return Corpus(
        si_train=FrameDataset.concat(si_train, "si"),
        si_heldout=FrameDataset.concat(si_held, "si"),
        target_adapt=adapt,
        target_test=test,
        target_spec=target,
        si_specs=si_specs,
    )

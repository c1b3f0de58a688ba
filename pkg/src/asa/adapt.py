"""SI training and the four speaker-adaptation procedures.

All procedures share one minibatch loop: epoch-level shuffling drawn from the
run seed, the short final batch kept as is, plain SGD. The SI model is only
ever read.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .datagen import FrameDataset
from .errors import ShapeError, TrainingDiverged
from .losses import disc_loss, disc_loss_sp, kld_target, one_hot, soft_cross_entropy
from .models import (
    AcousticModel,
    Discriminator,
    ModelRole,
    classify_senones,
    clone_model,
    extract_features,
    init_acoustic_network,
    init_discriminator,
    split_model,
)
from .nn import Gradients, Network, backward, forward, grl_backward, sgd_step, softmax, softmax_backward

METHODS = ("finetune", "kld", "asa", "asa_sp")
SUPERVISION = ("supervised", "unsupervised")

# independent random streams derived from one run seed
_SHUFFLE_STREAM = 0
_DISC_STREAM = 1


@dataclass
class AdaptConfig:
    method: str = "asa"
    lam: float = 1.0
    rho: float = 0.0
    mu: float = 0.1
    epochs: int = 20
    batch_size: int = 32
    seed: int = 0
    supervision: str = "supervised"
    n_h: int | None = None
    disc_hidden: tuple[int, ...] = (64, 64)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ShapeError(f"unknown method {self.method!r}")
        if self.supervision not in SUPERVISION:
            raise ShapeError(f"unknown supervision mode {self.supervision!r}")
        if self.lam < 0:
            raise ShapeError("lambda must be non-negative")
        if not 0.0 <= self.rho <= 1.0:
            raise ShapeError("rho must lie in [0, 1]")
        if self.mu < 0 or self.epochs < 0 or self.batch_size < 1:
            raise ShapeError("mu and epochs must be non-negative, batch_size positive")
        self.disc_hidden = tuple(int(h) for h in self.disc_hidden)


@dataclass
class TrainTrace:
    senone_loss: list[float] = field(default_factory=list)
    disc_loss: list[float] = field(default_factory=list)
    update_norm: list[float] = field(default_factory=list)

    def record(self, senone: float, disc: float, norm: float) -> None:
        for v in (senone, disc, norm):
            if not np.isfinite(v):
                raise TrainingDiverged(f"non-finite value {v} in epoch {len(self.senone_loss)}")
        self.senone_loss.append(senone)
        self.disc_loss.append(disc)
        self.update_norm.append(norm)


@dataclass
class StepResult:
    """Gradients and losses of one minibatch; ``grads_d`` is None for non-adversarial methods."""

    grads_f: Gradients
    grads_y: Gradients
    grads_d: Gradients | None
    senone_loss: float
    disc_loss: float


def _check_finite(*values: float) -> None:
    for v in values:
        if not np.isfinite(v):
            raise TrainingDiverged(f"loss became non-finite ({v})")


def _minibatches(n: int, batch_size: int, rng: np.random.Generator):
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start:start + batch_size]


def _fit(models: Sequence[Network], data_x: np.ndarray, data_y: np.ndarray, epochs: int,
         batch_size: int, mu: float, rng: np.random.Generator,
         step: Callable[[np.ndarray, np.ndarray], tuple[list[Gradients], float, float]],
         trace: TrainTrace | None) -> None:
    """Run ``epochs`` of SGD; ``step`` returns one Gradients per entry of ``models``."""
    for _ in range(epochs):
        s_sum = d_sum = 0.0
        sq_norm = 0.0
        nb = 0
        for idx in _minibatches(len(data_x), batch_size, rng):
            grads, ls, ld = step(data_x[idx], data_y[idx])
            _check_finite(ls, ld)
            for net, g in zip(models, grads):
                sgd_step(net, g, mu)
                step_norm = np.float64(mu) * g.norm()
                if not np.isfinite(step_norm) or step_norm > 1e150:
                    raise TrainingDiverged(f"parameter update norm blew up ({step_norm:.3g})")
                sq_norm += step_norm ** 2
            s_sum += ls
            d_sum += ld
            nb += 1
        if trace is not None:
            trace.record(s_sum / max(nb, 1), d_sum / max(nb, 1), float(np.sqrt(sq_norm)))


# ---------------------------------------------------------------- SI model

def train_si(dataset: FrameDataset, hidden: Sequence[int], epochs: int, mu: float, seed: int,
             n_h: int | None = None, batch_size: int = 64, activation: str = "tanh",
             trace: TrainTrace | None = None) -> AcousticModel:
    """Train a full network on frame cross-entropy, then split it at ``n_h``."""
    if len(dataset) == 0:
        raise ShapeError("cannot train on an empty dataset")
    hidden = list(hidden)
    n_h = len(hidden) if n_h is None else n_h
    if not 1 <= n_h <= len(hidden):
        raise ShapeError(f"n_h must be in [1, {len(hidden)}]")
    net = init_acoustic_network(dataset.input_dim, hidden, dataset.num_senones, seed, activation)
    rng = np.random.default_rng([seed, _SHUFFLE_STREAM])

    def step(x, y):
        logits, cache = forward(net, x)
        loss = soft_cross_entropy(softmax(logits), one_hot(y, dataset.num_senones))
        grads, _ = backward(net, cache, loss.grad)
        return [grads], loss.value, 0.0

    _fit([net], dataset.features, dataset.labels, epochs, batch_size, mu, rng, step, trace)
    return split_model(net, n_h)


def pseudo_label(si: AcousticModel, X) -> np.ndarray:
    """Per-frame argmax of the SI posteriors; ties go to the lowest senone index."""
    return np.argmax(classify_senones(si, X), axis=1)


# ------------------------------------------------------- per-batch gradients

def _check_inputs(si: AcousticModel, data: FrameDataset, cfg: AdaptConfig) -> None:
    if data.input_dim != si.input_dim:
        raise ShapeError(f"dataset has {data.input_dim}-dim frames, model expects {si.input_dim}")
    if data.num_senones != si.num_senones:
        raise ShapeError(f"dataset has {data.num_senones} senones, model has {si.num_senones}")
    if cfg.n_h is not None and cfg.n_h != si.split_index:
        raise ShapeError(f"config n_h={cfg.n_h} but the SI model is split at {si.split_index}")


def adaptation_labels(si: AcousticModel, data: FrameDataset, cfg: AdaptConfig) -> np.ndarray:
    if cfg.supervision == "supervised":
        return data.labels
    return pseudo_label(si, data.features)


def senone_gradients(sd: AcousticModel, x: np.ndarray, targets: np.ndarray) -> StepResult:
    """Cross-entropy of the SD model against (soft) targets, backpropagated through both parts."""
    feats, cache_f = forward(sd.feature_extractor, x)
    logits, cache_y = forward(sd.senone_classifier, feats)
    loss = soft_cross_entropy(softmax(logits), targets)
    grads_y, d_feats = backward(sd.senone_classifier, cache_y, loss.grad)
    grads_f, _ = backward(sd.feature_extractor, cache_f, d_feats)
    return StepResult(grads_f, grads_y, None, loss.value, 0.0)


def _disc_branch(d: Discriminator, inp_sd: np.ndarray, inp_si: np.ndarray, loss_fn):
    """Discriminator loss on both branches; returns (loss, grads_d, dL/d inp_sd)."""
    out_sd, cache_sd = forward(d.net, inp_sd)
    out_si, cache_si = forward(d.net, inp_si)
    loss = loss_fn(out_sd[:, 0], out_si[:, 0])
    g_sd, d_inp_sd = backward(d.net, cache_sd, loss.grad_sd[:, None])
    g_si, _ = backward(d.net, cache_si, loss.grad_si[:, None])
    return loss.value, g_sd + g_si, d_inp_sd


def asa_gradients(sd: AcousticModel, si: AcousticModel, d: Discriminator, x: np.ndarray,
                  targets: np.ndarray, lam: float) -> StepResult:
    """One ASA minibatch on deep features.

    ``grads_f`` is d/d theta_f of ``L_senone - lam * L_disc`` (the reversed
    discriminator gradient enters through the GRL on the SD feature branch);
    ``grads_y`` is d L_senone / d theta_y; ``grads_d`` is d L_disc / d theta_d.
    """
    f_sd, cache_f = forward(sd.feature_extractor, x)
    f_si = extract_features(si, x)
    logits, cache_y = forward(sd.senone_classifier, f_sd)
    sen = soft_cross_entropy(softmax(logits), targets)
    grads_y, d_feat_senone = backward(sd.senone_classifier, cache_y, sen.grad)
    ld, grads_d, d_feat_disc = _disc_branch(d, f_sd, f_si, disc_loss)
    grads_f, _ = backward(sd.feature_extractor, cache_f, d_feat_senone + grl_backward(d_feat_disc, lam))
    return StepResult(grads_f, grads_y, grads_d, sen.value, ld)


def asa_sp_gradients(sd: AcousticModel, si: AcousticModel, d: Discriminator, x: np.ndarray,
                     targets: np.ndarray, lam: float) -> StepResult:
    """One ASA-SP minibatch: the discriminator reads senone posterior vectors.

    The reversed discriminator gradient passes back through the SD softmax, so
    both ``grads_f`` and ``grads_y`` are gradients of ``L_senone - lam * L_disc``.
    """
    f_sd, cache_f = forward(sd.feature_extractor, x)
    logits, cache_y = forward(sd.senone_classifier, f_sd)
    p_sd = softmax(logits)
    p_si = classify_senones(si, x)
    sen = soft_cross_entropy(p_sd, targets)
    ld, grads_d, d_post_disc = _disc_branch(d, p_sd, p_si, disc_loss_sp)
    d_logits = sen.grad + softmax_backward(p_sd, grl_backward(d_post_disc, lam))
    grads_y, d_feats = backward(sd.senone_classifier, cache_y, d_logits)
    grads_f, _ = backward(sd.feature_extractor, cache_f, d_feats)
    return StepResult(grads_f, grads_y, grads_d, sen.value, ld)


# ------------------------------------------------------------ procedures

def _shuffle_rng(cfg: AdaptConfig) -> np.random.Generator:
    return np.random.default_rng([cfg.seed, _SHUFFLE_STREAM])


def _targets_fn(si: AcousticModel, cfg: AdaptConfig, num_senones: int):
    if cfg.method == "kld":
        return lambda x, y: kld_target(y, classify_senones(si, x), cfg.rho)
    return lambda x, y: one_hot(y, num_senones)


def _senone_only(si: AcousticModel, data: FrameDataset, cfg: AdaptConfig,
                 trace: TrainTrace | None) -> AcousticModel:
    _check_inputs(si, data, cfg)
    sd = clone_model(si, ModelRole.SD)
    labels = adaptation_labels(si, data, cfg)
    targets = _targets_fn(si, cfg, si.num_senones)

    def step(x, y):
        r = senone_gradients(sd, x, targets(x, y))
        return [r.grads_f, r.grads_y], r.senone_loss, 0.0

    _fit([sd.feature_extractor, sd.senone_classifier], data.features, labels,
         cfg.epochs, cfg.batch_size, cfg.mu, _shuffle_rng(cfg), step, trace)
    return sd


def fine_tune(si: AcousticModel, adapt_data: FrameDataset, cfg: AdaptConfig,
              trace: TrainTrace | None = None) -> AcousticModel:
    """Plain cross-entropy adaptation of a clone of ``si``."""
    if cfg.method != "finetune":
        raise ShapeError("fine_tune needs method='finetune'")
    return _senone_only(si, adapt_data, cfg, trace)


def kld_adapt(si: AcousticModel, adapt_data: FrameDataset, cfg: AdaptConfig,
              trace: TrainTrace | None = None) -> AcousticModel:
    """Cross-entropy against targets interpolated with the frozen SI posteriors."""
    if cfg.method != "kld":
        raise ShapeError("kld_adapt needs method='kld'")
    return _senone_only(si, adapt_data, cfg, trace)


def _adversarial(si: AcousticModel, data: FrameDataset, cfg: AdaptConfig, disc_in: int,
                 grad_fn, trace: TrainTrace | None) -> tuple[AcousticModel, Discriminator]:
    _check_inputs(si, data, cfg)
    sd = clone_model(si, ModelRole.SD)
    d = init_discriminator(disc_in, cfg.disc_hidden, seed=[cfg.seed, _DISC_STREAM])
    labels = adaptation_labels(si, data, cfg)

    def step(x, y):
        r = grad_fn(sd, si, d, x, one_hot(y, si.num_senones), cfg.lam)
        return [r.grads_f, r.grads_y, r.grads_d], r.senone_loss, r.disc_loss

    _fit([sd.feature_extractor, sd.senone_classifier, d.net], data.features, labels,
         cfg.epochs, cfg.batch_size, cfg.mu, _shuffle_rng(cfg), step, trace)
    return sd, d


def asa_adapt(si: AcousticModel, adapt_data: FrameDataset, cfg: AdaptConfig,
              trace: TrainTrace | None = None) -> tuple[AcousticModel, Discriminator]:
    """Adversarial adaptation on the deep features at the SI split point.

    Returns the SD model and the trained discriminator; only the SD model is
    needed for recognition.
    """
    if cfg.method != "asa":
        raise ShapeError("asa_adapt needs method='asa'")
    return _adversarial(si, adapt_data, cfg, si.feature_dim, asa_gradients, trace)


def asa_sp_adapt(si: AcousticModel, adapt_data: FrameDataset, cfg: AdaptConfig,
                 trace: TrainTrace | None = None) -> tuple[AcousticModel, Discriminator]:
    """Adversarial adaptation on the senone posterior vectors."""
    if cfg.method != "asa_sp":
        raise ShapeError("asa_sp_adapt needs method='asa_sp'")
    return _adversarial(si, adapt_data, cfg, si.num_senones, asa_sp_gradients, trace)


@dataclass
class AdaptResult:
    sd: AcousticModel
    disc: Discriminator | None
    trace: TrainTrace


def adapt(si: AcousticModel, adapt_data: FrameDataset, cfg: AdaptConfig) -> AdaptResult:
    """Dispatch on ``cfg.method``."""
    trace = TrainTrace()
    disc = None
    if cfg.method == "finetune":
        sd = fine_tune(si, adapt_data, cfg, trace)
    elif cfg.method == "kld":
        sd = kld_adapt(si, adapt_data, cfg, trace)
    elif cfg.method == "asa":
        sd, disc = asa_adapt(si, adapt_data, cfg, trace)
    else:
        sd, disc = asa_sp_adapt(si, adapt_data, cfg, trace)
    return AdaptResult(sd, disc, trace)

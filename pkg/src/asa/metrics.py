"""Evaluation metrics: frame error rate, a post-hoc discriminator probe, and MMD."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .datagen import FrameDataset
from .errors import ShapeError
from .losses import disc_loss
from .models import AcousticModel, classify_senones, init_discriminator
from .nn import as_batch, backward, forward, sgd_step


def frame_error_rate(m: AcousticModel, test: FrameDataset) -> float:
    if test.input_dim != m.input_dim or test.num_senones != m.num_senones:
        raise ShapeError("test set does not match the model dimensions")
    if len(test) == 0:
        return 0.0
    pred = np.argmax(classify_senones(m, test.features), axis=1)
    return float(np.mean(pred != test.labels))


@dataclass
class ProbeConfig:
    hidden: tuple[int, ...] = (32, 32)
    epochs: int = 200
    mu: float = 0.1
    batch_size: int = 64
    train_fraction: float = 0.5
    max_frames: int | None = 1000
    standardize: bool = True


def discriminator_probe(f_sd, f_si, probe_cfg: ProbeConfig | None = None, seed: int = 0) -> float:
    """Balanced accuracy of a freshly trained SD-vs-SI discriminator on held-out rows.

    Row ``t`` of ``f_sd`` and of ``f_si`` should come from the same frame; a
    frame's two versions always land in the same split. Inputs are
    standardised with statistics of the training split.
    """
    cfg = probe_cfg or ProbeConfig()
    f_sd = as_batch(f_sd)
    f_si = as_batch(f_si)
    if f_sd.shape[1] != f_si.shape[1]:
        raise ShapeError("probe inputs differ in feature dimension")
    rng = np.random.default_rng(seed)
    n = min(len(f_sd), len(f_si))
    order = rng.permutation(n)
    if cfg.max_frames is not None:
        order = order[:cfg.max_frames]
    n_train = int(round(cfg.train_fraction * len(order)))
    if n_train < 2 or len(order) - n_train < 2:
        raise ShapeError(f"too few frames ({n}) to split for the probe")
    tr, ev = order[:n_train], order[n_train:]

    pooled = np.concatenate([f_sd[tr], f_si[tr]])
    mean = pooled.mean(axis=0)
    std = pooled.std(axis=0)
    std[std < 1e-8] = 1.0
    if not cfg.standardize:
        mean, std = np.zeros_like(mean), np.ones_like(std)
    a_tr, b_tr = (f_sd[tr] - mean) / std, (f_si[tr] - mean) / std
    a_ev, b_ev = (f_sd[ev] - mean) / std, (f_si[ev] - mean) / std

    d = init_discriminator(f_sd.shape[1], cfg.hidden, seed=[seed, 7])
    for _ in range(cfg.epochs):
        perm = rng.permutation(n_train)
        for s in range(0, n_train, cfg.batch_size):
            idx = perm[s:s + cfg.batch_size]
            out_a, cache_a = forward(d.net, a_tr[idx])
            out_b, cache_b = forward(d.net, b_tr[idx])
            loss = disc_loss(out_a[:, 0], out_b[:, 0])
            ga, _ = backward(d.net, cache_a, loss.grad_sd[:, None])
            gb, _ = backward(d.net, cache_b, loss.grad_si[:, None])
            sgd_step(d.net, ga + gb, cfg.mu)
    hit_sd = np.mean(forward(d.net, a_ev)[0][:, 0] > 0.5)
    hit_si = np.mean(forward(d.net, b_ev)[0][:, 0] <= 0.5)
    return float(0.5 * (hit_sd + hit_si))


def mmd(f_a, f_b, bandwidth: float) -> float:
    """Unbiased squared MMD with kernel ``exp(-|x - y|^2 / (2 bandwidth^2))``.

    For equal sizes this is the paired U-statistic, which also drops the
    ``k(a_i, b_i)`` diagonal of the cross term, so a sample against itself
    scores 0. Unequal sizes use the full cross mean. Symmetric in its
    arguments. Can dip slightly below zero for samples from one distribution,
    as any unbiased estimate does.
    """
    f_a = as_batch(f_a)
    f_b = as_batch(f_b)
    if f_a.shape[1] != f_b.shape[1]:
        raise ShapeError("samples differ in feature dimension")
    if bandwidth <= 0:
        raise ShapeError("bandwidth must be positive")
    m, n = len(f_a), len(f_b)
    if m < 2 or n < 2:
        raise ShapeError("need at least two rows in each sample")
    gamma = 0.5 / bandwidth**2
    k_aa = np.exp(-gamma * cdist(f_a, f_a, "sqeuclidean"))
    k_bb = np.exp(-gamma * cdist(f_b, f_b, "sqeuclidean"))
    k_ab = np.exp(-gamma * cdist(f_a, f_b, "sqeuclidean"))
    term_a = (k_aa.sum() - np.trace(k_aa)) / (m * (m - 1))
    term_b = (k_bb.sum() - np.trace(k_bb)) / (n * (n - 1))
    # float addition commutes, so averaging both orientations makes the result
    # bitwise symmetric under swapping the arguments
    k_ba = np.ascontiguousarray(k_ab.T)
    if m == n:
        cross = ((k_ab.sum() - np.trace(k_ab)) + (k_ba.sum() - np.trace(k_ba))) / (m * (m - 1))
    else:
        cross = k_ab.mean() + k_ba.mean()
    return float((term_a + term_b) - cross)


def median_bandwidth(f_a, f_b, max_rows: int = 500) -> float:
    """Median pairwise distance of the pooled sample (first ``max_rows`` of each)."""
    pooled = np.concatenate([as_batch(f_a)[:max_rows], as_batch(f_b)[:max_rows]])
    d = cdist(pooled, pooled)
    med = float(np.median(d[np.triu_indices(len(pooled), 1)]))
    return med if med > 0 else 1.0

"""Senone cross-entropy, SD/SI discrimination losses, and the KLD baseline target."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .nn import LOG_EPS


@dataclass
class LossValue:
    value: float
    grad: np.ndarray


@dataclass
class DiscLossValue:
    """Discrimination loss with gradients w.r.t. both discriminator-output vectors."""

    value: float
    grad_sd: np.ndarray
    grad_si: np.ndarray


def check_labels(labels, num_senones: int) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.ndim != 1:
        raise ShapeError("labels must be a 1-D sequence")
    if labels.size and (labels.min() < 0 or labels.max() >= num_senones):
        raise ShapeError(f"labels must lie in [0, {num_senones})")
    return labels.astype(np.int64)


def one_hot(labels, num_senones: int) -> np.ndarray:
    labels = check_labels(labels, num_senones)
    out = np.zeros((labels.size, num_senones))
    out[np.arange(labels.size), labels] = 1.0
    return out


def soft_cross_entropy(posteriors: np.ndarray, targets: np.ndarray) -> LossValue:
    """Mean cross-entropy against soft target rows.

    ``grad`` is taken w.r.t. the pre-softmax logits, ``(p - target) / T``,
    which is exact whenever each target row sums to one.
    """
    p = np.asarray(posteriors, dtype=np.float64)
    if p.shape != targets.shape:
        raise ShapeError(f"posteriors {p.shape} and targets {targets.shape} differ in shape")
    T = p.shape[0]
    if T == 0:
        return LossValue(0.0, np.zeros_like(p))
    logp = np.log(np.maximum(p, LOG_EPS))
    value = -float(np.sum(targets * logp)) / T
    return LossValue(value, (p - targets) / T)


def senone_loss(posteriors, labels) -> LossValue:
    p = np.asarray(posteriors, dtype=np.float64)
    labels = np.asarray(labels)
    if p.ndim != 2 or p.shape[0] != labels.shape[0]:
        raise ShapeError(f"{p.shape[0] if p.ndim == 2 else '?'} posterior rows vs {labels.shape[0]} labels")
    return soft_cross_entropy(p, one_hot(labels, p.shape[1]))


def _disc_loss(p_sd, p_si) -> DiscLossValue:
    p_sd = np.asarray(p_sd, dtype=np.float64).reshape(-1)
    p_si = np.asarray(p_si, dtype=np.float64).reshape(-1)
    if p_sd.shape != p_si.shape:
        raise ShapeError(f"length mismatch: {p_sd.size} SD vs {p_si.size} SI outputs")
    T = p_sd.size
    if T == 0:
        return DiscLossValue(0.0, np.zeros(0), np.zeros(0))
    p_sd = np.clip(p_sd, LOG_EPS, 1.0 - LOG_EPS)
    p_si = np.clip(p_si, LOG_EPS, 1.0 - LOG_EPS)
    value = -float(np.sum(np.log(p_sd) + np.log1p(-p_si))) / T
    return DiscLossValue(value, -1.0 / (T * p_sd), 1.0 / (T * (1.0 - p_si)))


def disc_loss(p_sd, p_si) -> DiscLossValue:
    """Cross-entropy of a discriminator labelling SD-origin inputs 1 and SI-origin inputs 0."""
    return _disc_loss(p_sd, p_si)


def disc_loss_sp(p_sd, p_si) -> DiscLossValue:
    """Same loss, for a discriminator that was fed senone posterior vectors."""
    return _disc_loss(p_sd, p_si)


def kld_target(labels, si_posteriors, rho: float) -> np.ndarray:
    """Targets ``(1 - rho) * onehot(y) + rho * p_SI``."""
    if not 0.0 <= rho <= 1.0:
        raise ShapeError(f"rho must lie in [0, 1], got {rho}")
    q = np.asarray(si_posteriors, dtype=np.float64)
    labels = np.asarray(labels)
    if q.ndim != 2 or q.shape[0] != labels.shape[0]:
        raise ShapeError("SI posteriors and labels disagree in length")
    return (1.0 - rho) * one_hot(labels, q.shape[1]) + rho * q


def _check_distribution(v: np.ndarray, name: str) -> None:
    if v.ndim != 1 or np.any(v < 0) or not np.isclose(v.sum(), 1.0, atol=1e-9):
        raise ShapeError(f"{name} is not a probability distribution")


def kl_divergence(p, q) -> float:
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ShapeError("distributions differ in length")
    _check_distribution(p, "p")
    _check_distribution(q, "q")
    q = np.maximum(q, LOG_EPS)
    nz = p > 0
    return max(float(np.sum(p[nz] * np.log(p[nz] / q[nz]))), 0.0)

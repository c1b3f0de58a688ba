"""Central finite differences for checking backprop against its definition."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

FD_EPS = 1e-5


def numeric_grad(f: Callable[[], float], param: np.ndarray, eps: float = FD_EPS) -> np.ndarray:
    """d f / d param by central differences; ``param`` is perturbed in place and restored."""
    grad = np.zeros_like(param)
    flat = param.reshape(-1)
    g = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        hi = f()
        flat[i] = orig - eps
        lo = f()
        flat[i] = orig
        g[i] = (hi - lo) / (2 * eps)
    return grad


def relative_error(a: np.ndarray, b: np.ndarray) -> float:
    """``|a - b| / (|a| + |b|)`` in the 2-norm, 0 when both vanish."""
    denom = np.linalg.norm(a) + np.linalg.norm(b)
    if denom < 1e-300:
        return 0.0
    return float(np.linalg.norm(a - b) / denom)


def max_relative_error(f: Callable[[], float], params: Sequence[np.ndarray],
                       analytic: Sequence[np.ndarray], eps: float = FD_EPS) -> float:
    return max(relative_error(g, numeric_grad(f, p, eps)) for p, g in zip(params, analytic))


# ----------------------------------------------- checks of whole components

def network_error(sizes: Sequence[int], activations, seed: int, batch: int = 6) -> float:
    """Backprop of ``sum(net(x) * proj)`` w.r.t. every parameter and the input."""
    from .nn import backward, forward, init_network

    rng = np.random.default_rng(seed)
    net = init_network(sizes, activations, seed)
    for layer in net.layers:
        layer.bias[:] = rng.normal(scale=0.3, size=layer.bias.shape)
    x = rng.normal(size=(batch, sizes[0]))
    proj = rng.normal(size=(batch, sizes[-1]))

    def f():
        return float(np.sum(forward(net, x)[0] * proj))

    _, cache = forward(net, x)
    grads, grad_in = backward(net, cache, proj)
    return max(max_relative_error(f, net.parameters(), grads.arrays()), max_relative_error(f, [x], [grad_in]))


def loss_errors(seed: int, frames: int = 5, classes: int = 4) -> dict[str, float]:
    """Senone, soft-target and discrimination loss gradients against finite differences."""
    from .losses import disc_loss, disc_loss_sp, one_hot, soft_cross_entropy
    from .nn import softmax, softmax_backward

    rng = np.random.default_rng(seed)
    z = rng.normal(scale=2.0, size=(frames, classes))
    hard = one_hot(rng.integers(0, classes, frames), classes)
    soft = softmax(rng.normal(size=(frames, classes)))
    out = {}
    for name, t in (("senone", hard), ("soft_target", soft)):
        out[name] = max_relative_error(lambda: soft_cross_entropy(softmax(z), t).value, [z],
                                       [soft_cross_entropy(softmax(z), t).grad])
    g = rng.normal(size=(frames, classes))
    out["softmax"] = max_relative_error(lambda: float(np.sum(softmax(z) * g)), [z], [softmax_backward(softmax(z), g)])
    p_sd, p_si = rng.uniform(0.05, 0.95, frames), rng.uniform(0.05, 0.95, frames)
    for name, fn in (("disc", disc_loss), ("disc_sp", disc_loss_sp)):
        v = fn(p_sd, p_si)
        out[name] = max_relative_error(lambda: fn(p_sd, p_si).value, [p_sd, p_si], [v.grad_sd, v.grad_si])
    return out


def adversarial_errors(seed: int, method: str = "asa", lam: float = 1.0) -> dict[str, float]:
    """One ASA or ASA-SP minibatch gradient against finite differences of its objectives.

    For ``asa``: extractor vs ``L_sen - lam * L_disc``, classifier vs ``L_sen``,
    discriminator vs ``L_disc``. For ``asa_sp`` both SD parts are checked
    against ``L_sen - lam * L_disc`` on posterior vectors.
    """
    from .adapt import asa_gradients, asa_sp_gradients
    from .losses import disc_loss, disc_loss_sp, one_hot, soft_cross_entropy
    from .models import clone_model, init_acoustic_network, init_discriminator, split_model
    from .nn import forward, softmax

    rng = np.random.default_rng(seed)
    dim, k, batch = 5, 4, 6
    si = split_model(init_acoustic_network(dim, [6, 5], k, seed), 2)
    sd = clone_model(si)
    for p in sd.parameters():
        p += rng.normal(scale=0.2, size=p.shape)
    sp = method == "asa_sp"
    d = init_discriminator(k if sp else si.feature_dim, (5,), seed=seed + 1)
    x = rng.normal(size=(batch, dim))
    targets = one_hot(rng.integers(0, k, batch), k)

    def post(m):
        f = forward(m.feature_extractor, x)[0]
        return f, softmax(forward(m.senone_classifier, f)[0])

    def sen():
        return soft_cross_entropy(post(sd)[1], targets).value

    def disc():
        i = 1 if sp else 0
        a, b = post(sd)[i], post(si)[i]
        return (disc_loss_sp if sp else disc_loss)(forward(d.net, a)[0][:, 0], forward(d.net, b)[0][:, 0]).value

    def adv():
        return sen() - lam * disc()

    fn = asa_sp_gradients if sp else asa_gradients
    r = fn(sd, si, d, x, targets, lam)
    return {
        "extractor": max_relative_error(adv, sd.feature_extractor.parameters(), r.grads_f.arrays()),
        "classifier": max_relative_error(adv if sp else sen, sd.senone_classifier.parameters(), r.grads_y.arrays()),
        "discriminator": max_relative_error(disc, d.net.parameters(), r.grads_d.arrays()),
    }

"""Finite-difference verification of analytic gradients.

Every check runs in double precision: build a layer, project its output onto
a fixed random tensor R (loss = sum(out * R), whose gradient at the output is
exactly R), backpropagate analytically, and compare against central
differences on the same scalar loss for the input and every parameter.
Non-smooth layers get inputs placed away from their kinks (leaky_relu away
from 0; maxpool cells with comfortably distinct entries), and dropout fixes
its mask by reseeding the rng identically for every loss evaluation.

``check_model`` spot-checks the full training loss (cross-entropy + kernel
and activity penalties) of a reduced network against central differences on
randomly sampled parameters.
"""

from __future__ import annotations

import numpy as np

from .layers import (
    TRAIN,
    BatchNorm,
    Conv2d,
    Dense,
    Dropout,
    Gru,
    LeakyRelu,
    MaxPool2x2,
    Softmax,
    softmax,
)
from .model import ModelConfig, build_azarnet
from .rng import Rng
from .training import cross_entropy_loss, one_hot, regularization_penalty

FD_STEP = 1e-5
LAYER_TOLERANCE = 1e-4
MODEL_TOLERANCE = 1e-3


def rel_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Norm-based relative disagreement, safe near zero."""
    diff = np.linalg.norm((analytic - numeric).ravel())
    scale = np.linalg.norm(analytic.ravel()) + np.linalg.norm(numeric.ravel())
    return float(diff / max(scale, 1e-12))


def fd_grad(loss_fn, x: np.ndarray, h: float = FD_STEP) -> np.ndarray:
    """Central-difference gradient of ``loss_fn()`` w.r.t. ``x``, which the
    closure must read live (entries are perturbed in place and restored)."""
    grad = np.zeros_like(x)
    flat_x = x.reshape(-1)
    flat_g = grad.reshape(-1)
    for i in range(flat_x.size):
        orig = flat_x[i]
        flat_x[i] = orig + h
        fp = loss_fn()
        flat_x[i] = orig - h
        fm = loss_fn()
        flat_x[i] = orig
        flat_g[i] = (fp - fm) / (2.0 * h)
    return grad


def _signed_away_from_zero(rng: Rng, shape, margin: float = 0.1) -> np.ndarray:
    """Uniform magnitudes in [margin, 1) with random signs: keeps finite
    differences clear of piecewise kinks at 0."""
    mag = rng.uniform(shape, margin, 1.0)
    sign = np.where(rng.uniform(shape) < 0.5, -1.0, 1.0)
    return mag * sign


def _check_layer(layer, x: np.ndarray, rng: Rng, mask_seed: int | None = None) -> float:
    """Project-and-compare for one layer; returns the max relative error over
    the input gradient and all parameter gradients."""

    def run():
        return layer.forward(x, TRAIN, Rng(mask_seed) if mask_seed is not None else None)

    out = run()
    proj = rng.uniform(out.shape, -1.0, 1.0)

    def loss():
        return float((run() * proj).sum())

    gin = layer.backward(proj)
    analytic = {"<input>": gin.copy()}
    for name, g in layer.grads().items():
        analytic[name] = g.copy()

    errs = [rel_error(analytic["<input>"], fd_grad(loss, x))]
    for name, p in layer.params().items():
        errs.append(rel_error(analytic[name], fd_grad(loss, p)))
    return max(errs)


def check_conv2d(seed: int = 0) -> float:
    rng = Rng(seed)
    layer = Conv2d(2, 3, name="gc_conv")
    layer.init_params(rng.spawn(1), np.float64)
    x = rng.uniform((2, 6, 5, 2), -1.0, 1.0)
    return _check_layer(layer, x, rng.spawn(2))


def check_maxpool(seed: int = 0) -> float:
    rng = Rng(seed)
    layer = MaxPool2x2(name="gc_pool")
    # Grid values plus a distinct per-cell-position offset: entries within any
    # 2x2 cell differ by >= 0.013, far beyond the finite-difference step.
    base = rng.integers(100, (2, 6, 4, 3)).astype(np.float64) * 0.1
    offs = np.zeros((1, 6, 4, 1))
    for i in range(6):
        for j in range(4):
            offs[0, i, j, 0] = ((i % 2) * 2 + (j % 2)) * 0.013
    x = base + offs
    return _check_layer(layer, x, rng.spawn(2))


def check_batchnorm(seed: int = 0) -> float:
    rng = Rng(seed)
    layer = BatchNorm(3, name="gc_bn")
    layer.init_params(rng.spawn(1), np.float64)
    # Non-trivial gamma/beta so their gradients are exercised off the identity.
    layer.gamma += rng.uniform((3,), -0.5, 0.5)
    layer.beta += rng.uniform((3,), -0.5, 0.5)
    x = rng.uniform((4, 3, 2, 3), -2.0, 2.0)
    return _check_layer(layer, x, rng.spawn(2))


def check_dropout(seed: int = 0) -> float:
    rng = Rng(seed)
    layer = Dropout(0.4, name="gc_drop")
    x = rng.uniform((3, 5, 4, 2), -1.0, 1.0)
    return _check_layer(layer, x, rng.spawn(2), mask_seed=seed + 1)


def check_leaky_relu(seed: int = 0) -> float:
    rng = Rng(seed)
    layer = LeakyRelu(0.1, name="gc_leaky")
    x = _signed_away_from_zero(rng, (3, 4, 5))
    return _check_layer(layer, x, rng.spawn(2))


def check_gru(seed: int = 0) -> float:
    rng = Rng(seed)
    errs = []
    for i, return_sequences in enumerate((True, False)):
        layer = Gru(3, 4, return_sequences, name="gc_gru")
        layer.init_params(rng.spawn(10 + i), np.float64)
        layer.b_input += rng.uniform((12,), -0.3, 0.3)
        layer.b_recurrent += rng.uniform((12,), -0.3, 0.3)
        x = rng.uniform((2, 5, 3), -1.0, 1.0)
        errs.append(_check_layer(layer, x, rng.spawn(20 + i)))
    return max(errs)


def check_dense(seed: int = 0) -> float:
    rng = Rng(seed)
    layer = Dense(4, 3, name="gc_fc")
    layer.init_params(rng.spawn(1), np.float64)
    layer.b += rng.uniform((3,), -0.5, 0.5)
    x = rng.uniform((5, 4), -1.0, 1.0)
    return _check_layer(layer, x, rng.spawn(2))


def check_softmax_xent(seed: int = 0) -> float:
    """Fused softmax + cross-entropy: analytic gradient (p - d)/B at the logits."""
    rng = Rng(seed)
    logits = rng.uniform((4, 5), -2.0, 2.0)
    labels = np.array([int(rng.integers(5)) for _ in range(4)])
    targets = one_hot(labels, 5).astype(np.float64)

    def loss():
        return cross_entropy_loss(softmax(logits), targets)

    analytic = (softmax(logits) - targets) / logits.shape[0]
    return rel_error(analytic, fd_grad(loss, logits))


def check_softmax(seed: int = 0) -> float:
    """Standalone softmax layer backward under a random projection."""
    rng = Rng(seed)
    layer = Softmax(name="gc_softmax")
    x = rng.uniform((3, 6), -2.0, 2.0)
    return _check_layer(layer, x, rng.spawn(2))


LAYER_CHECKS = {
    "conv2d": check_conv2d,
    "maxpool": check_maxpool,
    "batchnorm": check_batchnorm,
    "dropout": check_dropout,
    "leaky_relu": check_leaky_relu,
    "gru": check_gru,
    "dense": check_dense,
    "softmax": check_softmax,
    "softmax_xent": check_softmax_xent,
}


def run_layer_suite(seed: int = 0) -> dict:
    """Max relative error per layer type."""
    return {name: fn(seed) for name, fn in LAYER_CHECKS.items()}


def reduced_config(seed: int = 0) -> ModelConfig:
    """A miniature of the full architecture, cheap enough for scalar FD."""
    return ModelConfig(
        input_shape=(16, 16, 1),
        conv_filters=(3, 4),
        dropout_rates=(0.1, 0.2),
        gru_units=(5, 6),
        bottleneck=4,
        classes=3,
        seed=seed,
    )


def check_model(seed: int = 0, n_samples: int = 24) -> float:
    """End-to-end spot check: total training loss (cross-entropy + kernel +
    activity penalties) vs central differences on ``n_samples`` randomly
    chosen parameters of a reduced model.  Returns the max scalar rel. error."""
    rng = Rng(seed)
    model = build_azarnet(reduced_config(seed), rng.spawn(1), dtype=np.float64)
    batch = 2
    x = rng.uniform((batch,) + model.config.input_shape, 0.0, 80.0)
    labels = np.array([int(rng.integers(model.config.classes)) for _ in range(batch)])
    targets = one_hot(labels, model.config.classes).astype(np.float64)
    mask_seed = seed + 7919

    def loss():
        probs = model.forward(x, TRAIN, Rng(mask_seed))
        return cross_entropy_loss(probs, targets) + regularization_penalty(
            model, model.activity_outputs()
        )

    probs = model.forward(x, TRAIN, Rng(mask_seed))
    model.backward((probs - targets) / batch)
    grads = {k: g.copy() for k, g in model.gradients().items()}

    params = model.parameters()
    entries = [(name, i) for name, p in params.items() for i in range(p.size)]
    picks = rng.permutation(len(entries))[:n_samples]
    h = FD_STEP
    worst = 0.0
    for k in picks:
        name, i = entries[int(k)]
        flat = params[name].reshape(-1)
        orig = flat[i]
        flat[i] = orig + h
        fp = loss()
        flat[i] = orig - h
        fm = loss()
        flat[i] = orig
        numeric = (fp - fm) / (2.0 * h)
        analytic = grads[name].reshape(-1)[i]
        err = abs(analytic - numeric) / max(abs(analytic) + abs(numeric), 1e-6)
        worst = max(worst, err)
    return worst

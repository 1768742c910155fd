"""Loss, regularization penalty, Adam, stratified splitting, training loop.

The optimized loss is cross-entropy plus an L1+L2 penalty on conv/GRU kernels
and on their output activations (batch-mean); biases and batchnorm parameters
are exempt.  Validation loss is plain cross-entropy on infer-mode forwards
(no dropout, running batchnorm stats), which is also what early stopping
monitors.  The best-validation parameter snapshot is restored before
``train`` returns.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .dataset import CLASS_NAMES, ManifestRecord
from .errors import ConfigError, DataError, DimensionError, TrainingDiverged
from .layers import INFER, TRAIN
from .model import Model
from .rng import Rng

LOG_CLAMP = 1e-12


@dataclass
class TrainConfig:
    batch_size: int = 16
    max_epochs: int = 100
    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    early_stop_patience: int = 10
    split_fraction: float = 0.8
    seed: int = 0
    # Optional extra stop: end training once infer-mode accuracy on the full
    # training set reaches this value (checked at epoch end).  None disables.
    target_train_acc: float | None = None

    def validate(self) -> None:
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.max_epochs < 1:
            raise ConfigError(f"max_epochs must be >= 1, got {self.max_epochs}")
        if not 0.0 < self.split_fraction < 1.0:
            raise ConfigError(f"split_fraction must be in (0,1), got {self.split_fraction}")
        if self.learning_rate < 0.0:
            raise ConfigError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if self.early_stop_patience < 1:
            raise ConfigError(f"early_stop_patience must be >= 1, got {self.early_stop_patience}")
        if self.target_train_acc is not None and not 0.0 < self.target_train_acc <= 1.0:
            raise ConfigError(f"target_train_acc must be in (0,1], got {self.target_train_acc}")


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    train_acc: float
    val_loss: float | None
    val_acc: float | None


@dataclass
class TrainingHistory:
    epochs: list = field(default_factory=list)
    best_epoch: int | None = None
    stopped_early: bool = False

    def write_csv(self, path) -> None:
        def fmt(v):
            return "" if v is None else f"{v:.9g}"

        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch", "train_loss", "train_acc", "val_loss", "val_acc"])
            for e in self.epochs:
                writer.writerow(
                    [e.epoch, fmt(e.train_loss), fmt(e.train_acc), fmt(e.val_loss), fmt(e.val_acc)]
                )


def one_hot(labels: np.ndarray, classes: int) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.ndim != 1:
        raise DimensionError(f"labels must be 1-D, got shape {labels.shape}")
    if labels.size and (labels.min() < 0 or labels.max() >= classes):
        raise DimensionError(f"labels must be in 0..{classes - 1}")
    out = np.zeros((labels.shape[0], classes), dtype=np.float32)
    out[np.arange(labels.shape[0]), labels] = 1.0
    return out


def cross_entropy_loss(probs: np.ndarray, targets: np.ndarray) -> float:
    """Mean over the batch of -sum_j d_j log(max(p_j, 1e-12))."""
    if probs.shape != targets.shape or probs.ndim != 2:
        raise DimensionError(f"probs {probs.shape} vs targets {targets.shape}")
    logp = np.log(np.maximum(probs, LOG_CLAMP))
    return float(-(targets * logp).sum(axis=1).mean())


def regularization_penalty(model: Model, activations) -> float:
    """L1+L2 penalty on kernels plus batch-mean L1+L2 penalty on the cached
    conv/GRU outputs (``model.activity_outputs()`` after a train-mode forward)."""
    l1, l2 = model.config.l1, model.config.l2
    total = 0.0
    for w in model.penalized_kernels().values():
        total += l1 * float(np.abs(w).sum()) + l2 * float((w * w).sum())
    for a in activations:
        total += (l1 * float(np.abs(a).sum()) + l2 * float((a * a).sum())) / a.shape[0]
    return total


@dataclass
class AdamState:
    m: dict
    v: dict
    step: int = 0

    @classmethod
    def for_params(cls, params: dict) -> "AdamState":
        return cls(
            m={k: np.zeros_like(p) for k, p in params.items()},
            v={k: np.zeros_like(p) for k, p in params.items()},
        )


def adam_step(params: dict, grads: dict, state: AdamState, cfg: TrainConfig) -> None:
    """One bias-corrected Adam update, in place on the parameter tensors."""
    state.step += 1
    b1, b2 = cfg.adam_beta1, cfg.adam_beta2
    c1 = 1.0 - b1**state.step
    c2 = 1.0 - b2**state.step
    for key, p in params.items():
        g = grads[key]
        if g.shape != p.shape:
            raise DimensionError(f"{key}: gradient shape {g.shape} != parameter shape {p.shape}")
        m, v = state.m[key], state.v[key]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p -= cfg.learning_rate * (m / c1) / (np.sqrt(v / c2) + cfg.adam_eps)


def stratified_split(records, fraction: float = 0.8, rng: Rng | None = None):
    """Per class: shuffle, send round((1-fraction)*n) records to test, rest to
    train.  Every class must be present; returns (train, test) record lists."""
    if not 0.0 < fraction < 1.0:
        raise ConfigError(f"fraction must be in (0,1), got {fraction}")
    if rng is None:
        rng = Rng(0)
    by_class: dict = {name: [] for name in CLASS_NAMES}
    for rec in records:
        label = rec.label if isinstance(rec, ManifestRecord) else rec["label"]
        if label not in by_class:
            raise DataError(f"unknown class {label!r}")
        by_class[label].append(rec)
    train, test = [], []
    for name in CLASS_NAMES:
        group = by_class[name]
        if not group:
            raise DataError(f"class {name} has no samples")
        order = rng.permutation(len(group))
        shuffled = [group[i] for i in order]
        n_test = int(round((1.0 - fraction) * len(group)))
        test.extend(shuffled[:n_test])
        train.extend(shuffled[n_test:])
    return train, test


def predict_probs(model: Model, x: np.ndarray, batch_size: int = 16) -> np.ndarray:
    """Infer-mode class probabilities, batched to bound memory."""
    chunks = [
        model.forward(x[i : i + batch_size], INFER) for i in range(0, x.shape[0], batch_size)
    ]
    return np.concatenate(chunks, axis=0)


def evaluate(model: Model, x: np.ndarray, y: np.ndarray, batch_size: int = 16):
    """(cross-entropy loss, accuracy) of infer-mode predictions."""
    probs = predict_probs(model, x, batch_size)
    loss = cross_entropy_loss(probs, one_hot(y, probs.shape[1]))
    acc = float((probs.argmax(axis=1) == np.asarray(y)).mean())
    return loss, acc


def train(model: Model, train_data, val_data, cfg: TrainConfig, log=None) -> TrainingHistory:
    """Run the training loop over in-memory arrays.

    ``train_data``/``val_data`` are (spectrograms [N,H,W,C] float32, labels
    [N] int) pairs; ``val_data`` may be None.  Per epoch: shuffle, iterate
    batches, train-mode forward, loss = cross-entropy + penalty, backward,
    Adam step.  ``log``, if given, is called with each epoch's ``EpochStats``.

    Early stopping watches validation loss with the configured patience, and
    the best-validation snapshot is restored on return — unless the
    ``target_train_acc`` stop fired, in which case the weights that reached
    the target are kept.
    """
    cfg.validate()
    x_tr, y_tr = train_data
    x_tr = np.asarray(x_tr)
    y_tr = np.asarray(y_tr)
    if x_tr.shape[0] == 0:
        raise DataError("empty training set")
    if x_tr.shape[0] != y_tr.shape[0]:
        raise DimensionError(f"{x_tr.shape[0]} inputs but {y_tr.shape[0]} labels")
    if val_data is not None:
        x_val, y_val = val_data
        x_val = np.asarray(x_val)
        y_val = np.asarray(y_val)
        if x_val.shape[0] == 0:
            raise DataError("empty validation set")

    n = x_tr.shape[0]
    classes = model.config.classes
    params = model.parameters()
    state = AdamState.for_params(params)
    base_rng = Rng(cfg.seed)
    shuffle_rng = base_rng.spawn(1)
    dropout_rng = base_rng.spawn(2)

    history = TrainingHistory()
    best_val = np.inf
    best_snap = None
    best_epoch = None
    epochs_since_best = 0
    target_reached = False

    for epoch in range(1, cfg.max_epochs + 1):
        order = shuffle_rng.permutation(n)
        loss_sum = 0.0
        correct = 0
        for batch_idx, start in enumerate(range(0, n, cfg.batch_size)):
            sel = order[start : start + cfg.batch_size]
            xb = x_tr[sel]
            yb = y_tr[sel]
            targets = one_hot(yb, classes)
            probs = model.forward(xb, TRAIN, dropout_rng)
            loss = cross_entropy_loss(probs, targets) + regularization_penalty(
                model, model.activity_outputs()
            )
            if not np.isfinite(loss):
                raise TrainingDiverged(epoch, batch_idx, loss)
            model.backward((probs - targets) / xb.shape[0])
            adam_step(params, model.gradients(), state, cfg)
            loss_sum += loss * xb.shape[0]
            correct += int((probs.argmax(axis=1) == yb).sum())

        train_loss = loss_sum / n
        train_acc = correct / n
        if val_data is not None:
            val_loss, val_acc = evaluate(model, x_val, y_val, cfg.batch_size)
        else:
            val_loss = val_acc = None
        stats = EpochStats(epoch, train_loss, train_acc, val_loss, val_acc)
        history.epochs.append(stats)
        if log is not None:
            log(stats)

        if val_loss is not None:
            if val_loss < best_val:
                best_val = val_loss
                best_snap = model.snapshot()
                best_epoch = epoch
                epochs_since_best = 0
            else:
                epochs_since_best += 1
                if epochs_since_best >= cfg.early_stop_patience:
                    history.stopped_early = True
                    break
        if cfg.target_train_acc is not None:
            _, full_acc = evaluate(model, x_tr, y_tr, cfg.batch_size)
            if full_acc >= cfg.target_train_acc:
                target_reached = True
                break

    if best_snap is not None and not target_reached:
        model.restore(best_snap)
    history.best_epoch = best_epoch
    return history

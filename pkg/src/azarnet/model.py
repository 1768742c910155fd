"""Model assembly, forward/backward orchestration, parameter audit, checkpoints.

The architecture is a fixed recipe over ``ModelConfig``: five blocks of
[conv 3x3 same -> LeakyReLU -> dropout -> batchnorm -> maxpool 2x2], a
time-major reshape of the final feature map into a sequence, a stack of GRUs
(all but the last returning sequences), a narrow bottleneck dense layer with
LeakyReLU, and a softmax classifier head.  With the default configuration the
parameter audit totals 106043.

Checkpoints (``.aznet``) are a little-endian container: 8-byte magic, u32
header length, JSON header (format, version, config, class names, tensor
directory with offsets), then concatenated tensor blocks in the shared binary
tensor encoding.  They round-trip parameters AND batchnorm running statistics
bit-exactly.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .dataset import CLASS_NAMES
from .errors import CheckpointError, ConfigError, CorruptFileError, StateError
from .layers import (
    INFER,
    TRAIN,
    BatchNorm,
    Conv2d,
    Dense,
    Dropout,
    Gru,
    Layer,
    LeakyRelu,
    MaxPool2x2,
    Reshape,
    Softmax,
)
from .numerics import tensor_from_bytes, tensor_to_bytes
from .rng import Rng

CHECKPOINT_MAGIC = b"AZNET001"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class ModelConfig:
    """Architecture hyperparameters; the defaults are the published network."""

    input_shape: tuple = (256, 256, 1)
    conv_filters: tuple = (16, 32, 32, 32, 64)
    dropout_rates: tuple = (0.1, 0.2, 0.3, 0.3, 0.4)
    gru_units: tuple = (50, 100)
    bottleneck: int = 5
    classes: int = 7
    leaky_alpha: float = 0.1
    bn_momentum: float = 0.8
    bn_eps: float = 1e-3
    l1: float = 0.01
    l2: float = 0.01
    seed: int = 0

    def validate(self) -> None:
        if len(self.input_shape) != 3 or any(d < 1 for d in self.input_shape):
            raise ConfigError(f"input_shape must be (H, W, C) positive, got {self.input_shape}")
        if not self.conv_filters:
            raise ConfigError("need at least one conv block")
        if len(self.conv_filters) != len(self.dropout_rates):
            raise ConfigError(
                f"{len(self.conv_filters)} conv filters but {len(self.dropout_rates)} dropout rates"
            )
        if any(f < 1 for f in self.conv_filters):
            raise ConfigError(f"conv filters must be positive, got {self.conv_filters}")
        if any(not 0.0 <= r < 1.0 for r in self.dropout_rates):
            raise ConfigError(f"dropout rates must be in [0,1), got {self.dropout_rates}")
        if not self.gru_units or any(u < 1 for u in self.gru_units):
            raise ConfigError(f"gru_units must be nonempty positive, got {self.gru_units}")
        if self.bottleneck < 1 or self.classes < 2:
            raise ConfigError(
                f"bottleneck must be >= 1 and classes >= 2, got {self.bottleneck}/{self.classes}"
            )
        if not 0.0 <= self.bn_momentum < 1.0 or self.bn_eps <= 0.0:
            raise ConfigError(
                f"bn_momentum must be in [0,1) and bn_eps > 0, got {self.bn_momentum}/{self.bn_eps}"
            )
        if self.l1 < 0.0 or self.l2 < 0.0:
            raise ConfigError(f"penalty weights must be >= 0, got l1={self.l1}, l2={self.l2}")
        h, w, _ = self.input_shape
        div = 1 << len(self.conv_filters)
        if h % div or w % div:
            raise ConfigError(
                f"input {h}x{w} must be divisible by 2^{len(self.conv_filters)} = {div} "
                "so the pooled feature map reshapes cleanly into a sequence"
            )

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("input_shape", "conv_filters", "dropout_rates", "gru_units"):
            d[key] = list(d[key])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {f.name for f in cls.__dataclass_fields__.values()}
        unknown = d.keys() - known
        if unknown:
            raise ConfigError(f"unknown config field(s): {sorted(unknown)}")
        d = dict(d)
        for key in ("input_shape", "conv_filters", "dropout_rates", "gru_units"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)


class Model:
    """Ordered layer stack plus the class vocabulary it predicts over."""

    def __init__(self, config: ModelConfig, layers: list, class_names: tuple):
        self.config = config
        self.layers: list[Layer] = layers
        self.class_names = tuple(class_names)

    def forward(self, x: np.ndarray, mode: str = INFER, rng: Rng | None = None) -> np.ndarray:
        for layer in self.layers:
            x = layer.forward(x, mode, rng)
        return x

    def backward(self, dlogits: np.ndarray) -> np.ndarray:
        """Backpropagate from the pre-softmax gradient (softmax is fused with
        the cross-entropy loss, so ``dlogits`` is typically (p - d)/B).

        Activity-penalty gradients are injected where each penalized output
        was produced, and kernel-penalty gradients are added at the end, so
        the resulting ``gradients()`` are for the full training loss.
        """
        if not isinstance(self.layers[-1], Softmax):
            raise StateError("model backward expects a softmax-terminated stack")
        l1, l2 = self.config.l1, self.config.l2
        g = dlogits
        for layer in reversed(self.layers[:-1]):
            if layer.activity_reg:
                a = layer.out_cache
                if a is None:
                    raise StateError(f"{layer.name}: activity cache missing; run a train-mode forward")
                b = a.shape[0]
                pen = a * (2.0 * l2 / b)  # (l1*sign(a) + 2*l2*a) / b, low-temp form
                sgn = np.sign(a)
                sgn *= l1 / b
                pen += sgn
                g = np.add(g, pen, out=pen)
            g = layer.backward(g)
        for layer in self.layers:
            grads = layer.grads()
            for name, w in layer.penalized_kernels().items():
                grads[name] += l1 * np.sign(w) + 2.0 * l2 * w
        return g

    def parameters(self) -> dict:
        """Live references to every trainable tensor, prefixed by layer name."""
        return {
            f"{layer.name}/{k}": v for layer in self.layers for k, v in layer.params().items()
        }

    def gradients(self) -> dict:
        return {f"{layer.name}/{k}": v for layer in self.layers for k, v in layer.grads().items()}

    def state_tensors(self) -> dict:
        """Parameters plus running statistics — everything a checkpoint carries."""
        return {f"{layer.name}/{k}": v for layer in self.layers for k, v in layer.state().items()}

    def penalized_kernels(self) -> dict:
        return {
            f"{layer.name}/{k}": v
            for layer in self.layers
            for k, v in layer.penalized_kernels().items()
        }

    def activity_outputs(self) -> list:
        """Cached outputs of activity-penalized layers from the last train-mode forward."""
        outs = []
        for layer in self.layers:
            if layer.activity_reg:
                if layer.out_cache is None:
                    raise StateError(f"{layer.name}: activity cache missing; run a train-mode forward")
                outs.append(layer.out_cache)
        return outs

    def snapshot(self) -> dict:
        return {name: arr.copy() for name, arr in self.state_tensors().items()}

    def restore(self, snap: dict) -> None:
        for name, arr in self.state_tensors().items():
            arr[...] = snap[name]

    def count_params(self) -> tuple:
        """Architecture-table rows [(layer_name, count)] and the grand total."""
        rows = [
            (layer.table_name, layer.param_count())
            for layer in self.layers
            if layer.table_name is not None
        ]
        total = sum(layer.param_count() for layer in self.layers)
        return rows, total

    def output_shapes(self) -> list:
        """Per-sample output shape per architecture-table row."""
        shape = self.config.input_shape
        rows = []
        for layer in self.layers:
            shape = layer.out_shape(shape)
            if layer.table_name is not None:
                rows.append((layer.table_name, shape))
        return rows


def build_azarnet(
    cfg: ModelConfig,
    rng: Rng | None = None,
    class_names: tuple | None = None,
    dtype=np.float32,
) -> Model:
    """Assemble and initialize the network.

    Weights are Glorot-uniform from ``rng`` (drawn in layer order, so a seed
    pins every parameter), biases and beta start at zero, gamma at one,
    running stats at (0, 1).
    """
    cfg.validate()
    if rng is None:
        rng = Rng(cfg.seed)
    if class_names is None:
        if cfg.classes == len(CLASS_NAMES):
            class_names = CLASS_NAMES
        else:
            class_names = tuple(f"class_{i}" for i in range(cfg.classes))
    if len(class_names) != cfg.classes:
        raise ConfigError(f"{len(class_names)} class names for {cfg.classes} classes")

    h, w, ch = cfg.input_shape
    layers: list[Layer] = []
    for i, (filters, rate) in enumerate(zip(cfg.conv_filters, cfg.dropout_rates), start=1):
        layers.append(Conv2d(ch, filters, name=f"conv{i}"))
        layers.append(LeakyRelu(cfg.leaky_alpha, name=f"leaky{i}"))
        layers.append(Dropout(rate, name=f"drop{i}"))
        layers.append(BatchNorm(filters, cfg.bn_momentum, cfg.bn_eps, name=f"bn{i}"))
        layers.append(MaxPool2x2(name=f"pool{i}"))
        ch = filters
        h, w = h // 2, w // 2
    # Flatten [time, frequency, channel] row-major: time blocks stay outermost,
    # so the GRU walks the sequence in time order.
    layers.append(Reshape((h * w, ch), name="reshape"))
    feat = ch
    for i, units in enumerate(cfg.gru_units, start=1):
        last = i == len(cfg.gru_units)
        layers.append(Gru(feat, units, return_sequences=not last, name=f"gru{i}"))
        feat = units
    layers.append(Dense(feat, cfg.bottleneck, name="fc1"))
    layers.append(LeakyRelu(cfg.leaky_alpha, name="leaky_fc"))
    layers.append(Dense(cfg.bottleneck, cfg.classes, classifier=True, name="fc2"))
    layers.append(Softmax(name="softmax"))

    for layer in layers:
        layer.init_params(rng, dtype)
    return Model(cfg, layers, class_names)


def save_checkpoint(model: Model, path) -> None:
    directory = []
    blocks = []
    offset = 0
    for name, arr in model.state_tensors().items():
        blob = tensor_to_bytes(arr)
        directory.append({"name": name, "offset": offset, "nbytes": len(blob)})
        blocks.append(blob)
        offset += len(blob)
    header = {
        "format": "aznet",
        "version": CHECKPOINT_VERSION,
        "config": model.config.to_dict(),
        "class_names": list(model.class_names),
        "tensors": directory,
    }
    payload = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", len(payload)))
        fh.write(payload)
        for blob in blocks:
            fh.write(blob)


def load_checkpoint(path) -> Model:
    data = Path(path).read_bytes()
    if len(data) < len(CHECKPOINT_MAGIC) + 4 or data[: len(CHECKPOINT_MAGIC)] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint (bad magic)")
    hlen = struct.unpack_from("<I", data, len(CHECKPOINT_MAGIC))[0]
    body = len(CHECKPOINT_MAGIC) + 4
    if body + hlen > len(data):
        raise CheckpointError(f"{path}: truncated header")
    try:
        header = json.loads(data[body : body + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"{path}: unreadable header: {e}") from e
    if header.get("format") != "aznet" or header.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"{path}: unsupported checkpoint format/version "
            f"{header.get('format')!r}/{header.get('version')!r}"
        )
    try:
        cfg = ModelConfig.from_dict(header["config"])
        class_names = tuple(header["class_names"])
        entries = {e["name"]: e for e in header["tensors"]}
    except (KeyError, TypeError) as e:
        raise CheckpointError(f"{path}: malformed header: {e}") from e

    model = build_azarnet(cfg, class_names=class_names)
    base = body + hlen
    for name, arr in model.state_tensors().items():
        entry = entries.get(name)
        if entry is None:
            raise CheckpointError(f"{path}: missing tensor {name!r}")
        start = base + entry["offset"]
        end = start + entry["nbytes"]
        if end > len(data):
            raise CheckpointError(f"{path}: tensor {name!r} extends past end of file")
        try:
            tensor = tensor_from_bytes(data[start:end], name)
        except CorruptFileError as e:
            raise CheckpointError(f"{path}: {e}") from e
        if tensor.shape != arr.shape:
            raise CheckpointError(
                f"{path}: tensor {name!r} has shape {tensor.shape}, expected {arr.shape}"
            )
        arr[...] = tensor
    return model

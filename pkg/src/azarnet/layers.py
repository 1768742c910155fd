"""Differentiable layers: forward semantics, backward semantics, parameters.

Each layer is a parameter container plus a pair of pure functions.  A
train-mode ``forward`` stashes exactly what ``backward`` needs on the
instance; ``backward`` consumes that cache and stores parameter gradients on
the instance (``grads()``), returning the input gradient.  Calling
``backward`` without a preceding train-mode forward raises ``StateError``.
Infer-mode forwards cache nothing and are pure functions of (parameters,
input).

Conventions:

* activations are NHWC / batch-leading; per-sample shapes in ``out_shape``;
* ``table_name`` is the row label in the architecture summary; ``None`` marks
  layers that conventionally do not get their own row (activations, softmax);
* dtype follows the parameters (float32 for real models, float64 under the
  gradient checker).
"""

from __future__ import annotations

import numpy as np

from . import kernels
from .errors import ConfigError, DimensionError, StateError
from .rng import Rng

TRAIN = "train"
INFER = "infer"


def leaky_relu(x: np.ndarray, alpha: float = 0.1) -> np.ndarray:
    """f(v) = v for v > 0, else alpha*v.  Requires alpha <= 1 so that the
    single-pass identity max(v, alpha*v) holds."""
    out = x * alpha
    np.maximum(x, out, out=out)
    return out


def sigmoid(x: np.ndarray) -> np.ndarray:
    """Logistic function, stable for large |x| in either direction."""
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softmax(x: np.ndarray) -> np.ndarray:
    """Row-wise softmax over the last axis, computed with max subtraction."""
    z = x - x.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def glorot_uniform(rng: Rng, shape: tuple, fan_in: int, fan_out: int, dtype) -> np.ndarray:
    limit = float(np.sqrt(6.0 / (fan_in + fan_out)))
    return rng.uniform(shape, -limit, limit).astype(dtype)


class Layer:
    """Base interface; concrete layers override what applies to them."""

    table_name: str | None = None
    activity_reg = False  # output enters the activity penalty in train mode

    def __init__(self, name: str):
        self.name = name

    def init_params(self, rng: Rng, dtype) -> None:
        pass

    def forward(self, x: np.ndarray, mode: str = INFER, rng: Rng | None = None) -> np.ndarray:
        raise NotImplementedError

    def backward(self, gy: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def params(self) -> dict:
        """Trainable tensors, by short name."""
        return {}

    def grads(self) -> dict:
        """Gradients matching params(), filled in by backward()."""
        return {}

    def state(self) -> dict:
        """Everything a checkpoint must carry (params + running stats)."""
        return self.params()

    def penalized_kernels(self) -> dict:
        """Weight tensors that enter the kernel penalty (biases never do)."""
        return {}

    def param_count(self) -> int:
        return sum(int(t.size) for t in self.state().values())

    def out_shape(self, shape: tuple) -> tuple:
        return shape

    def _need(self, cache, what: str):
        if cache is None:
            raise StateError(f"{self.name}: backward needs a train-mode forward ({what} missing)")
        return cache


class Conv2d(Layer):
    """3x3 (configurable) same-padded cross-correlation with bias."""

    activity_reg = True

    def __init__(self, in_ch: int, out_ch: int, kernel_size: int = 3, name: str = "conv"):
        super().__init__(name)
        if kernel_size < 1 or kernel_size % 2 == 0:
            raise ConfigError(f"{name}: kernel_size must be odd so same-padding is symmetric")
        self.in_ch, self.out_ch, self.k = in_ch, out_ch, kernel_size
        self.table_name = f"2D Convolution ({kernel_size}*{kernel_size})({out_ch})"
        self.kernel = np.zeros((kernel_size, kernel_size, in_ch, out_ch), dtype=np.float32)
        self.bias = np.zeros(out_ch, dtype=np.float32)
        self.g_kernel = np.zeros_like(self.kernel)
        self.g_bias = np.zeros_like(self.bias)
        self._xp = None
        self.out_cache = None

    def init_params(self, rng: Rng, dtype) -> None:
        k = self.k
        self.kernel = glorot_uniform(
            rng,
            (k, k, self.in_ch, self.out_ch),
            k * k * self.in_ch,
            k * k * self.out_ch,
            dtype,
        )
        self.bias = np.zeros(self.out_ch, dtype=dtype)
        self.g_kernel = np.zeros_like(self.kernel)
        self.g_bias = np.zeros_like(self.bias)

    def forward(self, x, mode=INFER, rng=None):
        if x.ndim != 4 or x.shape[3] != self.in_ch:
            raise DimensionError(
                f"{self.name}: expected [B,H,W,{self.in_ch}] input, got shape {x.shape}"
            )
        xp = kernels.pad_same(x, self.k, self.k)
        y = kernels.conv2d_forward(xp, self.kernel, self.bias)
        if mode == TRAIN:
            self._xp = xp
            self.out_cache = y
        return y

    def backward(self, gy):
        xp = self._need(self._xp, "padded input")
        gx, self.g_kernel, self.g_bias = kernels.conv2d_backward(xp, self.kernel, gy)
        return gx

    def params(self):
        return {"kernel": self.kernel, "bias": self.bias}

    def grads(self):
        return {"kernel": self.g_kernel, "bias": self.g_bias}

    def penalized_kernels(self):
        return {"kernel": self.kernel}

    def out_shape(self, shape):
        return (shape[0], shape[1], self.out_ch)


class LeakyRelu(Layer):
    def __init__(self, alpha: float = 0.1, name: str = "leaky"):
        super().__init__(name)
        self.alpha = alpha
        self._pos = None

    def forward(self, x, mode=INFER, rng=None):
        if mode == TRAIN:
            self._pos = x > 0
        return leaky_relu(x, self.alpha)

    def backward(self, gy):
        pos = self._need(self._pos, "sign mask")
        gx = gy * self.alpha
        np.copyto(gx, gy, where=pos)
        return gx


class Dropout(Layer):
    """Inverted dropout: zero with probability ``rate``, scale survivors by
    1/(1-rate) so train-mode expectation matches infer mode (which is the
    identity)."""

    def __init__(self, rate: float, name: str = "drop"):
        super().__init__(name)
        if not 0.0 <= rate < 1.0:
            raise ConfigError(f"{self.name}: dropout rate must be in [0,1), got {rate}")
        self.rate = rate
        self.table_name = f"Dropout ({rate:g})"
        self._mask = None

    def forward(self, x, mode=INFER, rng=None):
        if mode != TRAIN or self.rate == 0.0:
            self._mask = True if mode == TRAIN else None
            return x
        if rng is None:
            raise StateError(f"{self.name}: train-mode dropout needs an rng")
        self._mask = rng.mask(x.shape, self.rate)
        out = x * self._mask
        out *= 1.0 / (1.0 - self.rate)
        return out

    def backward(self, gy):
        mask = self._need(self._mask, "mask")
        if mask is True:  # rate 0: identity
            return gy
        gx = gy * mask
        gx *= 1.0 / (1.0 - self.rate)
        return gx


class BatchNorm(Layer):
    """Per-channel normalization over all non-channel axes.

    Train mode uses biased batch statistics and updates the running stats as
    running <- momentum*running + (1-momentum)*batch; infer mode normalizes by
    the running stats.  The reported parameter count includes the two running
    tensors (4 per channel), matching the architecture table convention.
    """

    def __init__(self, ch: int, momentum: float = 0.8, eps: float = 1e-3, name: str = "bn"):
        super().__init__(name)
        self.ch, self.momentum, self.eps = ch, momentum, eps
        self.table_name = f"Batch Normalization ({momentum:g})"
        self.gamma = np.ones(ch, dtype=np.float32)
        self.beta = np.zeros(ch, dtype=np.float32)
        self.running_mean = np.zeros(ch, dtype=np.float32)
        self.running_var = np.ones(ch, dtype=np.float32)
        self.g_gamma = np.zeros_like(self.gamma)
        self.g_beta = np.zeros_like(self.beta)
        self._xhat = None
        self._istd = None

    def init_params(self, rng: Rng, dtype) -> None:
        self.gamma = np.ones(self.ch, dtype=dtype)
        self.beta = np.zeros(self.ch, dtype=dtype)
        self.running_mean = np.zeros(self.ch, dtype=dtype)
        self.running_var = np.ones(self.ch, dtype=dtype)
        self.g_gamma = np.zeros_like(self.gamma)
        self.g_beta = np.zeros_like(self.beta)

    def forward(self, x, mode=INFER, rng=None):
        if x.shape[-1] != self.ch:
            raise DimensionError(f"{self.name}: expected {self.ch} channels, got shape {x.shape}")
        axes = tuple(range(x.ndim - 1))
        if mode == TRAIN:
            n = int(np.prod([x.shape[a] for a in axes])) if axes else 1
            if n == 0:
                raise DimensionError(f"{self.name}: cannot normalize an empty batch")
            mu = x.mean(axis=axes)
            var = x.var(axis=axes)  # biased, matching the running-stat update
            istd = 1.0 / np.sqrt(var + self.eps)
            xhat = x - mu
            xhat *= istd
            m = self.momentum
            self.running_mean *= m
            self.running_mean += (1 - m) * mu.astype(self.running_mean.dtype)
            self.running_var *= m
            self.running_var += (1 - m) * var.astype(self.running_var.dtype)
            self._xhat, self._istd, self._axes, self._n = xhat, istd, axes, n
            out = xhat * self.gamma
            out += self.beta
            return out
        scale = self.gamma / np.sqrt(self.running_var + self.eps)
        out = x * scale
        out += self.beta - self.running_mean * scale
        return out

    def backward(self, gy):
        xhat = self._need(self._xhat, "batch statistics")
        axes, n = self._axes, self._n
        sub = "abcdef"[: gy.ndim - 1] + "z"  # reduce all non-channel axes
        self.g_beta = gy.sum(axis=axes)
        self.g_gamma = np.einsum(f"{sub},{sub}->z", gy, xhat)
        dx = gy * self.gamma  # dxhat, reused as the output buffer
        mean_dxhat = dx.sum(axis=axes, keepdims=True) / n
        mean_dxhat_xhat = np.einsum(f"{sub},{sub}->z", dx, xhat) / n
        dx -= mean_dxhat
        dx -= xhat * mean_dxhat_xhat
        dx *= self._istd
        return dx

    def params(self):
        return {"gamma": self.gamma, "beta": self.beta}

    def grads(self):
        return {"gamma": self.g_gamma, "beta": self.g_beta}

    def state(self):
        return {
            "gamma": self.gamma,
            "beta": self.beta,
            "running_mean": self.running_mean,
            "running_var": self.running_var,
        }


class MaxPool2x2(Layer):
    table_name = "2D Max Pooling (2*2)"

    def __init__(self, name: str = "pool"):
        super().__init__(name)
        self._arg = None

    def forward(self, x, mode=INFER, rng=None):
        y, arg = kernels.maxpool2x2_forward(x)
        if mode == TRAIN:
            self._arg = arg
        return y

    def backward(self, gy):
        arg = self._need(self._arg, "argmax record")
        return kernels.maxpool2x2_backward(gy, arg)

    def out_shape(self, shape):
        h, w, c = shape
        if h % 2 or w % 2:
            raise DimensionError(f"{self.name}: H and W must be even, got {shape}")
        return (h // 2, w // 2, c)


class Reshape(Layer):
    """Per-sample reshape preserving element order (batch axis untouched)."""

    table_name = "Reshape"

    def __init__(self, target: tuple, name: str = "reshape"):
        super().__init__(name)
        self.target = tuple(target)
        self._in_shape = None

    def forward(self, x, mode=INFER, rng=None):
        per_sample = int(np.prod(x.shape[1:]))
        if per_sample != int(np.prod(self.target)):
            raise DimensionError(
                f"{self.name}: cannot reshape per-sample {x.shape[1:]} to {self.target}"
            )
        if mode == TRAIN:
            self._in_shape = x.shape
        return x.reshape((x.shape[0],) + self.target)

    def backward(self, gy):
        in_shape = self._need(self._in_shape, "input shape")
        return gy.reshape(in_shape)

    def out_shape(self, shape):
        if int(np.prod(shape)) != int(np.prod(self.target)):
            raise DimensionError(f"{self.name}: cannot reshape {shape} to {self.target}")
        return self.target


class Gru(Layer):
    """Gated recurrent unit, reset-after form with two bias vectors.

    Gate layout along the 3n axis is z | r | h.  Per step:

        z = sigmoid(x Wz + bIz + h Uz + bRz)
        r = sigmoid(x Wr + bIr + h Ur + bRr)
        hcand = tanh(x Wh + bIh + r * (h Uh + bRh))
        h <- (1 - z) * hcand + z * h

    This is the only standard variant whose parameter count is
    3*(n*m + n*n + 2n).
    """

    activity_reg = True

    def __init__(self, input_dim: int, units: int, return_sequences: bool, name: str = "gru"):
        super().__init__(name)
        self.m, self.n, self.return_sequences = input_dim, units, return_sequences
        self.table_name = f"GRU ({units})"
        self.W = np.zeros((input_dim, 3 * units), dtype=np.float32)
        self.U = np.zeros((units, 3 * units), dtype=np.float32)
        self.b_input = np.zeros(3 * units, dtype=np.float32)
        self.b_recurrent = np.zeros(3 * units, dtype=np.float32)
        self._zero_grads()
        self._cache = None
        self.out_cache = None

    def _zero_grads(self):
        self.g_W = np.zeros_like(self.W)
        self.g_U = np.zeros_like(self.U)
        self.g_b_input = np.zeros_like(self.b_input)
        self.g_b_recurrent = np.zeros_like(self.b_recurrent)

    def init_params(self, rng: Rng, dtype) -> None:
        self.W = glorot_uniform(rng, (self.m, 3 * self.n), self.m, 3 * self.n, dtype)
        self.U = glorot_uniform(rng, (self.n, 3 * self.n), self.n, 3 * self.n, dtype)
        self.b_input = np.zeros(3 * self.n, dtype=dtype)
        self.b_recurrent = np.zeros(3 * self.n, dtype=dtype)
        self._zero_grads()

    def forward(self, x, mode=INFER, rng=None):
        if x.ndim != 3 or x.shape[2] != self.m:
            raise DimensionError(
                f"{self.name}: expected [B,T,{self.m}] sequence, got shape {x.shape}"
            )
        b, t_len, _ = x.shape
        n = self.n
        h = np.zeros((b, n), dtype=x.dtype)
        steps = []
        seq = np.empty((b, t_len, n), dtype=x.dtype) if self.return_sequences else None
        for t in range(t_len):
            x_t = x[:, t, :]
            gi = x_t @ self.W + self.b_input
            gr = h @ self.U + self.b_recurrent
            z = sigmoid(gi[:, :n] + gr[:, :n])
            r = sigmoid(gi[:, n : 2 * n] + gr[:, n : 2 * n])
            gr_h = gr[:, 2 * n :]
            hcand = np.tanh(gi[:, 2 * n :] + r * gr_h)
            h_new = (1.0 - z) * hcand + z * h
            if mode == TRAIN:
                steps.append((x_t, h, z, r, hcand, gr_h))
            h = h_new
            if self.return_sequences:
                seq[:, t, :] = h
        out = seq if self.return_sequences else h
        if mode == TRAIN:
            self._cache = steps
            self.out_cache = out
        return out

    def backward(self, gy):
        steps = self._need(self._cache, "per-step state")
        n = self.n
        t_len = len(steps)
        b = steps[0][0].shape[0]
        self._zero_grads()
        gx = np.empty((b, t_len, self.m), dtype=gy.dtype)
        dh_next = np.zeros((b, n), dtype=gy.dtype)
        dgi = np.empty((b, 3 * n), dtype=gy.dtype)
        dgr = np.empty((b, 3 * n), dtype=gy.dtype)
        for t in range(t_len - 1, -1, -1):
            x_t, h_prev, z, r, hcand, gr_h = steps[t]
            if self.return_sequences:
                dh = gy[:, t, :] + dh_next
            else:
                dh = gy + dh_next if t == t_len - 1 else dh_next
            dz = dh * (h_prev - hcand)
            dhcand = dh * (1.0 - z)
            da = dhcand * (1.0 - hcand * hcand)
            dr = da * gr_h
            dz_pre = dz * z * (1.0 - z)
            dr_pre = dr * r * (1.0 - r)
            dgi[:, :n] = dz_pre
            dgi[:, n : 2 * n] = dr_pre
            dgi[:, 2 * n :] = da
            dgr[:, :n] = dz_pre
            dgr[:, n : 2 * n] = dr_pre
            dgr[:, 2 * n :] = da * r
            self.g_W += x_t.T @ dgi
            self.g_U += h_prev.T @ dgr
            self.g_b_input += dgi.sum(axis=0)
            self.g_b_recurrent += dgr.sum(axis=0)
            gx[:, t, :] = dgi @ self.W.T
            dh_next = dh * z + dgr @ self.U.T
        return gx

    def params(self):
        return {
            "W": self.W,
            "U": self.U,
            "b_input": self.b_input,
            "b_recurrent": self.b_recurrent,
        }

    def grads(self):
        return {
            "W": self.g_W,
            "U": self.g_U,
            "b_input": self.g_b_input,
            "b_recurrent": self.g_b_recurrent,
        }

    def penalized_kernels(self):
        # Input kernel only: the kernel penalty does not touch the recurrent
        # kernel (U), mirroring how a per-layer kernel regularizer attaches.
        return {"W": self.W}

    def out_shape(self, shape):
        t_len, m = shape
        if m != self.m:
            raise DimensionError(f"{self.name}: expected feature dim {self.m}, got {shape}")
        return (t_len, self.n) if self.return_sequences else (self.n,)


class Dense(Layer):
    """x @ W + b; no activation (the model graph applies its own)."""

    def __init__(self, in_dim: int, out_dim: int, classifier: bool = False, name: str = "fc"):
        super().__init__(name)
        self.in_dim, self.out_dim = in_dim, out_dim
        self.table_name = f"FC ({out_dim})" + (" (classifier)" if classifier else "")
        self.W = np.zeros((in_dim, out_dim), dtype=np.float32)
        self.b = np.zeros(out_dim, dtype=np.float32)
        self.g_W = np.zeros_like(self.W)
        self.g_b = np.zeros_like(self.b)
        self._x = None

    def init_params(self, rng: Rng, dtype) -> None:
        self.W = glorot_uniform(rng, (self.in_dim, self.out_dim), self.in_dim, self.out_dim, dtype)
        self.b = np.zeros(self.out_dim, dtype=dtype)
        self.g_W = np.zeros_like(self.W)
        self.g_b = np.zeros_like(self.b)

    def forward(self, x, mode=INFER, rng=None):
        if x.ndim != 2 or x.shape[1] != self.in_dim:
            raise DimensionError(
                f"{self.name}: expected [B,{self.in_dim}] input, got shape {x.shape}"
            )
        if mode == TRAIN:
            self._x = x
        return x @ self.W + self.b

    def backward(self, gy):
        x = self._need(self._x, "input")
        self.g_W = x.T @ gy
        self.g_b = gy.sum(axis=0)
        return gy @ self.W.T

    def params(self):
        return {"W": self.W, "b": self.b}

    def grads(self):
        return {"W": self.g_W, "b": self.g_b}

    def out_shape(self, shape):
        return (self.out_dim,)


class Softmax(Layer):
    """Row softmax.  In training the cross-entropy gradient is fused at the
    logits (p - d), so the model's backward walk skips this layer; the
    standalone backward exists for the gradient checker."""

    def __init__(self, name: str = "softmax"):
        super().__init__(name)
        self._probs = None

    def forward(self, x, mode=INFER, rng=None):
        p = softmax(x)
        if mode == TRAIN:
            self._probs = p
        return p

    def backward(self, gy):
        p = self._need(self._probs, "probabilities")
        return p * (gy - (gy * p).sum(axis=-1, keepdims=True))

"""Backend dispatch for the hot kernels (3x3 same-conv and 2x2 maxpool).

Two interchangeable implementations exist:

* ``_ckernels`` — Cython extension, direct loop nests (preferred);
* ``_pykernels`` — pure numpy, shifted-matmul formulation (always available).

Import picks the compiled backend when it loads, else falls back to numpy.
The ``AZARNET_KERNELS`` environment variable forces a choice: ``numpy`` or
``cython`` (the latter raises if the extension is missing rather than
silently degrading).  ``BACKEND`` records the active choice.

All public functions preserve dtype (float32 or float64), accept batched
NHWC tensors, and take an optional ``impl`` module so tests and benchmarks
can pin a backend without touching the environment.

Conventions (shared by both backends, asserted against each other in tests):

* convolution is cross-correlation — no kernel flip;
* "same" padding means zeros, ``k // 2`` on each side for odd ``k``;
* maxpool ties go to the first element of the 2x2 cell in row-major order,
  and the recorded uint8 argmax (0..3) encodes (row << 1) | col.
"""

from __future__ import annotations

import os

import numpy as np

from ..errors import ConfigError, DimensionError
from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built for this interpreter/platform
    _ckernels = None

_FORCED = os.environ.get("AZARNET_KERNELS", "")
if _FORCED == "numpy":
    _impl = _pykernels
elif _FORCED == "cython":
    if _ckernels is None:
        raise ConfigError(
            "AZARNET_KERNELS=cython but the compiled extension is not available; "
            "build it (pip install -e . --no-build-isolation) or unset the variable"
        )
    _impl = _ckernels
elif _FORCED:
    raise ConfigError(f"AZARNET_KERNELS must be 'cython' or 'numpy', got {_FORCED!r}")
else:
    _impl = _ckernels if _ckernels is not None else _pykernels

BACKEND = "cython" if _impl is not _pykernels else "numpy"


def available_backends() -> dict:
    """Name → implementation module, for parametrised tests and benchmarks."""
    out = {"numpy": _pykernels}
    if _ckernels is not None:
        out["cython"] = _ckernels
    return out


def _as_c(x: np.ndarray) -> np.ndarray:
    if x.dtype not in (np.float32, np.float64):
        raise DimensionError(f"kernel ops take float32/float64 tensors, got {x.dtype}")
    return np.ascontiguousarray(x)


def pad_same(x: np.ndarray, kh: int, kw: int) -> np.ndarray:
    """Zero-pad NHWC batch so a valid k-tap correlation keeps H and W."""
    if x.ndim != 4:
        raise DimensionError(f"expected NHWC batch, got shape {x.shape}")
    ph, pw = kh // 2, kw // 2
    return np.pad(x, ((0, 0), (ph, ph), (pw, pw), (0, 0)))


def conv2d_forward(xp: np.ndarray, w: np.ndarray, bias: np.ndarray, impl=None) -> np.ndarray:
    """Valid correlation of the already-padded batch ``xp`` with ``w`` + bias.

    xp: [B, H+kh-1, W+kw-1, Ci], w: [kh, kw, Ci, Co], bias: [Co] → [B, H, W, Co].
    """
    if xp.ndim != 4 or w.ndim != 4 or bias.ndim != 1:
        raise DimensionError(
            f"conv2d_forward: bad ranks (input {xp.shape}, kernel {w.shape}, bias {bias.shape})"
        )
    if xp.shape[3] != w.shape[2]:
        raise DimensionError(
            f"conv2d_forward: input has {xp.shape[3]} channels but kernel expects {w.shape[2]}"
        )
    if bias.shape[0] != w.shape[3]:
        raise DimensionError(
            f"conv2d_forward: bias length {bias.shape[0]} != {w.shape[3]} output channels"
        )
    xp, w = _as_c(xp), _as_c(w)
    b, hp, wp = xp.shape[0], xp.shape[1], xp.shape[2]
    h, w_ = hp - w.shape[0] + 1, wp - w.shape[1] + 1
    if h <= 0 or w_ <= 0:
        raise DimensionError(f"conv2d_forward: kernel {w.shape[:2]} larger than input {(hp, wp)}")
    out = np.empty((b, h, w_, w.shape[3]), dtype=xp.dtype)
    out[...] = bias.astype(xp.dtype)
    (impl or _impl).conv_fwd(xp, w, out)
    return out


def conv2d_backward(xp: np.ndarray, w: np.ndarray, gy: np.ndarray, impl=None):
    """Gradients of the same-padded correlation.

    Takes the padded forward input, the kernel and the output gradient;
    returns (gx, gw, gb) with gx at the unpadded input shape.

    The input gradient of a same-padded correlation is itself a same-padded
    correlation of the output gradient with the kernel rotated 180 degrees and
    its channel axes swapped, so the forward kernel does double duty here.
    """
    xp, w, gy = _as_c(xp), _as_c(w), _as_c(gy)
    mod = impl or _impl
    rotated = np.ascontiguousarray(w[::-1, ::-1].transpose(0, 1, 3, 2))
    gx = conv2d_forward(
        pad_same(gy, w.shape[0], w.shape[1]),
        rotated,
        np.zeros(w.shape[2], dtype=w.dtype),
        impl=mod,
    )
    gw = np.zeros_like(w)
    gb = np.zeros(w.shape[3], dtype=w.dtype)
    mod.conv_bwd_params(xp, gy, gw, gb)
    return gx, gw, gb


def maxpool2x2_forward(x: np.ndarray, impl=None):
    """2x2/stride-2 max over NHWC; returns (pooled, uint8 argmax in 0..3)."""
    if x.ndim != 4:
        raise DimensionError(f"maxpool2x2_forward: expected NHWC batch, got shape {x.shape}")
    if x.shape[1] % 2 or x.shape[2] % 2:
        raise DimensionError(f"maxpool2x2_forward: H and W must be even, got {x.shape[1:3]}")
    x = _as_c(x)
    b, h, w, c = x.shape
    out = np.empty((b, h // 2, w // 2, c), dtype=x.dtype)
    arg = np.empty((b, h // 2, w // 2, c), dtype=np.uint8)
    (impl or _impl).pool_fwd(x, out, arg)
    return out, arg


def maxpool2x2_backward(gy: np.ndarray, arg: np.ndarray, impl=None) -> np.ndarray:
    """Scatter pooled gradients back to the argmax positions (others get 0)."""
    if gy.shape != arg.shape:
        raise DimensionError(f"maxpool2x2_backward: grad {gy.shape} vs argmax {arg.shape}")
    gy = _as_c(gy)
    arg = np.ascontiguousarray(arg, dtype=np.uint8)
    b, h2, w2, c = gy.shape
    gx = np.zeros((b, 2 * h2, 2 * w2, c), dtype=gy.dtype)
    (impl or _impl).pool_bwd(gy, arg, gx)
    return gx

"""Pure-numpy kernel implementations.

Fallback backend used when the compiled extension is unavailable (or when
forced via AZARNET_KERNELS=numpy).  Each function has the exact signature and
semantics of its counterpart in ``_ckernels`` and writes into preallocated
output arrays; the dispatch wrapper in ``kernels/__init__`` owns padding,
allocation and validation.

Convolutions are expressed as nine shifted matmuls (one per 3x3 tap) instead
of explicit pixel loops, so the heavy lifting stays inside BLAS.
"""

from __future__ import annotations

import numpy as np


def conv_fwd(xp: np.ndarray, w: np.ndarray, out: np.ndarray) -> None:
    """Valid cross-correlation of padded NHWC input with [KH,KW,Ci,Co] kernel.

    ``out`` must be pre-filled with the broadcast bias; taps accumulate on top.
    """
    kh_n, kw_n = w.shape[0], w.shape[1]
    h, w_ = out.shape[1], out.shape[2]
    for kh in range(kh_n):
        for kw in range(kw_n):
            out += xp[:, kh : kh + h, kw : kw + w_, :] @ w[kh, kw]


def conv_bwd_params(xp: np.ndarray, gy: np.ndarray, gw: np.ndarray, gb: np.ndarray) -> None:
    """Kernel and bias gradients.  ``gw`` and ``gb`` must be zero-initialised."""
    kh_n, kw_n = gw.shape[0], gw.shape[1]
    h, w_ = gy.shape[1], gy.shape[2]
    for kh in range(kh_n):
        for kw in range(kw_n):
            gw[kh, kw] += np.tensordot(
                xp[:, kh : kh + h, kw : kw + w_, :], gy, axes=([0, 1, 2], [0, 1, 2])
            )
    gb += gy.sum(axis=(0, 1, 2))


def _blocks(x: np.ndarray) -> np.ndarray:
    """View NHWC as [B, H/2, W/2, 4, C] where axis 3 enumerates the 2x2 cell
    in row-major order (0=top-left, 1=top-right, 2=bottom-left, 3=bottom-right)."""
    b, h, w, c = x.shape
    return x.reshape(b, h // 2, 2, w // 2, 2, c).transpose(0, 1, 3, 2, 4, 5).reshape(
        b, h // 2, w // 2, 4, c
    )


def pool_fwd(x: np.ndarray, out: np.ndarray, arg: np.ndarray) -> None:
    """2x2/stride-2 max pool; ``arg`` receives the within-cell winner index.

    np.argmax returns the first maximum, which fixes the tie rule the backward
    pass relies on.
    """
    blocks = _blocks(x)
    idx = blocks.argmax(axis=3)
    arg[...] = idx.astype(np.uint8)
    out[...] = np.take_along_axis(blocks, idx[:, :, :, None, :], axis=3)[:, :, :, 0, :]


def pool_bwd(gy: np.ndarray, arg: np.ndarray, gx: np.ndarray) -> None:
    """Route each pooled gradient to the cell position recorded in ``arg``."""
    b, h, w, c = gx.shape
    h2, w2 = h // 2, w // 2
    flat = np.zeros((b, h2, w2, 4, c), dtype=gy.dtype)
    np.put_along_axis(flat, arg[:, :, :, None, :].astype(np.intp), gy[:, :, :, None, :], axis=3)
    gx[...] = flat.reshape(b, h2, w2, 2, 2, c).transpose(0, 1, 3, 2, 4, 5).reshape(b, h, w, c)

"""Dense tensor primitives and the on-disk tensor encoding.

Tensors are plain C-contiguous numpy arrays, row-major with the last axis
fastest; that layout is fixed repository-wide so reshapes and file formats
mean the same thing everywhere.  Training runs in float32, gradient checking
in float64.

Binary tensor encoding (used by spectrogram caches and checkpoints)::

    8 bytes   magic "AZTN0001"
    u32 LE    rank
    rank*u32  dims, little-endian
    f32 LE    payload, row-major
"""

from __future__ import annotations

import struct
from typing import Callable

import numpy as np

from .errors import CorruptFileError, DimensionError

TENSOR_MAGIC = b"AZTN0001"


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product of two 2-D arrays with explicit shape validation."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != 2 or b.ndim != 2:
        raise DimensionError(f"matmul needs 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul inner dims disagree: {a.shape} x {b.shape}")
    return a @ b


def reshape(t: np.ndarray, new_shape) -> np.ndarray:
    """Row-major reshape; element count must be preserved."""
    t = np.asarray(t)
    new_shape = tuple(int(d) for d in new_shape)
    if int(np.prod(new_shape)) != t.size:
        raise DimensionError(f"cannot reshape {t.shape} ({t.size} elements) to {new_shape}")
    return t.reshape(new_shape)


def map_unary(t: np.ndarray, f: Callable[[float], float]) -> np.ndarray:
    """Elementwise application of a scalar function."""
    t = np.asarray(t)
    return np.vectorize(f, otypes=[np.float64])(t)


def reduce_sum(t: np.ndarray) -> float:
    """Sum of all elements."""
    return float(np.sum(t))


def write_tensor(path, arr: np.ndarray) -> None:
    """Write an array in the binary tensor encoding (payload cast to f32)."""
    with open(path, "wb") as f:
        f.write(tensor_to_bytes(arr))


def tensor_to_bytes(arr: np.ndarray) -> bytes:
    # asarray with order="C" keeps 0-d arrays 0-d (ascontiguousarray would
    # promote them to shape (1,) and corrupt the recorded rank)
    arr = np.asarray(arr, dtype="<f4", order="C")
    head = TENSOR_MAGIC + struct.pack("<I", arr.ndim)
    head += struct.pack(f"<{arr.ndim}I", *arr.shape)
    return head + arr.tobytes()


def read_tensor(path) -> np.ndarray:
    """Read a tensor file; raises CorruptFileError on any structural damage."""
    with open(path, "rb") as f:
        return tensor_from_bytes(f.read(), name=str(path))


def tensor_from_bytes(blob: bytes, name: str = "<bytes>") -> np.ndarray:
    if len(blob) < len(TENSOR_MAGIC) + 4:
        raise CorruptFileError(f"{name}: too short for a tensor header")
    if blob[:8] != TENSOR_MAGIC:
        raise CorruptFileError(f"{name}: bad magic {blob[:8]!r}, expected {TENSOR_MAGIC!r}")
    (rank,) = struct.unpack_from("<I", blob, 8)
    off = 12
    if len(blob) < off + 4 * rank:
        raise CorruptFileError(f"{name}: truncated dim list (rank {rank})")
    dims = struct.unpack_from(f"<{rank}I", blob, off)
    off += 4 * rank
    count = int(np.prod(dims)) if rank else 1
    payload = blob[off:]
    if len(payload) != 4 * count:
        raise CorruptFileError(
            f"{name}: payload is {len(payload)} bytes, expected {4 * count} for shape {dims}"
        )
    return np.frombuffer(payload, dtype="<f4").reshape(dims).copy()

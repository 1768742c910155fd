"""In-repo discrete Fourier transforms.

The analysis window of the spectrogram front end is 510 samples, and
510 = 2 * 3 * 5 * 17 is not a power of two, so a general-length transform is
required.  Power-of-two lengths use an iterative radix-2 Cooley-Tukey pass;
every other length goes through Bluestein's chirp-z algorithm, which turns a
length-n DFT into one circular convolution of power-of-two length
>= 2n - 1.  All transforms operate along the last axis and vectorize over
leading axes, in complex128.

Correctness is gated in the test suite against a naive O(n^2) DFT oracle.
"""

from __future__ import annotations

import numpy as np

_rev_cache: dict[int, np.ndarray] = {}
_chirp_cache: dict[int, tuple[np.ndarray, np.ndarray, int]] = {}


def next_pow2(n: int) -> int:
    return 1 << (n - 1).bit_length()


def _bit_reverse_indices(n: int) -> np.ndarray:
    if n not in _rev_cache:
        bits = n.bit_length() - 1
        idx = np.arange(n)
        rev = np.zeros(n, dtype=np.int64)
        for b in range(bits):
            rev |= ((idx >> b) & 1) << (bits - 1 - b)
        _rev_cache[n] = rev
    return _rev_cache[n]


def _fft_pow2(x: np.ndarray, inverse: bool = False) -> np.ndarray:
    """Iterative radix-2 transform; last axis length must be a power of two."""
    n = x.shape[-1]
    if n & (n - 1):
        raise ValueError(f"length {n} is not a power of two")
    out = np.ascontiguousarray(x[..., _bit_reverse_indices(n)], dtype=np.complex128)
    sign = 1.0 if inverse else -1.0
    m = 2
    while m <= n:
        half = m // 2
        tw = np.exp(sign * 2j * np.pi * np.arange(half) / m)
        v = out.reshape(out.shape[:-1] + (n // m, m))
        t = v[..., half:] * tw
        v[..., half:] = v[..., :half] - t
        v[..., :half] += t
        m *= 2
    if inverse:
        out /= n
    return out


def _bluestein(x: np.ndarray, inverse: bool = False) -> np.ndarray:
    """Chirp-z evaluation of an arbitrary-length DFT via one pow2 convolution."""
    n = x.shape[-1]
    if n not in _chirp_cache:
        k = np.arange(n)
        # exponent reduced mod 2n keeps the angle small and exact in f64
        chirp = np.exp(-1j * np.pi * ((k * k) % (2 * n)) / n)
        size = next_pow2(2 * n - 1)
        b = np.zeros(size, dtype=np.complex128)
        b[:n] = np.conj(chirp)
        b[size - n + 1:] = np.conj(chirp[1:][::-1])
        _chirp_cache[n] = (chirp, _fft_pow2(b), size)
    chirp, b_f, size = _chirp_cache[n]
    if inverse:
        x = np.conj(x)
    a = np.zeros(x.shape[:-1] + (size,), dtype=np.complex128)
    a[..., :n] = x * chirp
    conv = _fft_pow2(_fft_pow2(a) * b_f, inverse=True)
    out = conv[..., :n] * chirp
    if inverse:
        out = np.conj(out) / n
    return out


def fft(x: np.ndarray) -> np.ndarray:
    """Forward DFT along the last axis, any length."""
    x = np.asarray(x, dtype=np.complex128)
    n = x.shape[-1]
    if n & (n - 1) == 0:
        return _fft_pow2(x)
    return _bluestein(x)


def ifft(x: np.ndarray) -> np.ndarray:
    """Inverse DFT along the last axis, any length."""
    x = np.asarray(x, dtype=np.complex128)
    n = x.shape[-1]
    if n & (n - 1) == 0:
        return _fft_pow2(x, inverse=True)
    return _bluestein(x, inverse=True)


def rfft(x: np.ndarray) -> np.ndarray:
    """DFT of real input: bins 0 .. n//2 (the non-redundant half)."""
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[-1]
    return np.ascontiguousarray(fft(x)[..., : n // 2 + 1])

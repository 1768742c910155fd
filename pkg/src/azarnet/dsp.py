"""Spectrogram front end: fixed-length clip -> 256x256 shifted-dB matrix.

The analysis uses a 510-sample periodic Hann window with hop 514.  The hop
exceeding the window leaves a 4-sample gap between consecutive frames; that
is deliberate and exactly reproduces the published framing, because with
reflect-padded centering a 131072-sample clip then yields

    1 + floor(131072 / 514) = 256 frames

and a real FFT of 510 points yields 510//2 + 1 = 256 frequency bins, i.e. a
256x256 output, indexed [time, frequency].

Magnitudes are converted to decibels relative to the per-clip global maximum
(amplitude convention, 20*log10), clamped to [-80, 0] and shifted by +80, so
values land in [0, 80] with the loudest cell at exactly 80.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import fft
from .audio import CLIP_SAMPLES, SAMPLE_RATE, AudioClip, fix_length, load_wav, resample
from .errors import DimensionError
from .numerics import read_tensor, write_tensor

DB_FLOOR_AMIN = 1e-10
DB_RANGE = 80.0


def hann_window(n: int) -> np.ndarray:
    """Periodic Hann window of length n."""
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


@dataclass
class StftConfig:
    n_fft: int = 510
    hop: int = 514
    center: bool = True
    window: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.n_fft < 1 or self.hop < 1:
            raise ValueError(f"n_fft and hop must be >= 1, got {self.n_fft}, {self.hop}")
        if self.window is None:
            self.window = hann_window(self.n_fft)

    @property
    def n_bins(self) -> int:
        return self.n_fft // 2 + 1


def frame_count(n_samples: int, hop: int) -> int:
    """Number of analysis frames for a centered transform."""
    return 1 + n_samples // hop


def stft_magnitude(clip: AudioClip, cfg: StftConfig | None = None) -> np.ndarray:
    """Magnitude spectrogram of a fixed-length clip, shape [frames, bins].

    With centering, the signal is reflect-padded by n_fft//2 on both ends and
    frame t starts at t*hop in the padded signal.
    """
    cfg = cfg or StftConfig()
    x = np.asarray(clip.samples, dtype=np.float64)
    if len(x) != CLIP_SAMPLES:
        raise DimensionError(f"expected a {CLIP_SAMPLES}-sample clip, got {len(x)} samples")
    if cfg.center:
        x = np.pad(x, cfg.n_fft // 2, mode="reflect")
    n_frames = frame_count(CLIP_SAMPLES, cfg.hop)
    frames = np.lib.stride_tricks.sliding_window_view(x, cfg.n_fft)[:: cfg.hop][:n_frames]
    spectra = fft.rfft(frames * cfg.window)
    return np.abs(spectra)


def to_db_shifted(mag: np.ndarray) -> np.ndarray:
    """Shifted-dB scaling: [0, 80] float32 with the global max at exactly 80.

    A silent (all-zero) matrix maps to all zeros: with no signal there is no
    reference level, so everything sits at the floor of the range.
    """
    mag = np.asarray(mag, dtype=np.float64)
    peak = float(mag.max()) if mag.size else 0.0
    if peak <= DB_FLOOR_AMIN:
        return np.zeros(mag.shape, dtype=np.float32)
    db = 20.0 * np.log10(np.maximum(mag, DB_FLOOR_AMIN) / peak)
    db = np.clip(db, -DB_RANGE, 0.0) + DB_RANGE
    return db.astype(np.float32)


def preprocess(path, cfg: StftConfig | None = None) -> np.ndarray:
    """Audio file -> (256, 256) float32 spectrogram in [0, 80]."""
    clip = load_wav(path)
    clip = resample(clip, SAMPLE_RATE)
    clip = fix_length(clip, CLIP_SAMPLES)
    return to_db_shifted(stft_magnitude(clip, cfg))


def spectrogram_cache_path(cache_dir, audio_path) -> Path:
    """Cache file for one audio file: <stem>-<pathhash>.spec in cache_dir."""
    p = Path(audio_path)
    digest = hashlib.sha1(p.as_posix().encode("utf-8")).hexdigest()[:10]
    return Path(cache_dir) / f"{p.stem}-{digest}.spec"


def save_spectrogram(path, spec: np.ndarray) -> None:
    write_tensor(path, spec)


def load_spectrogram(path) -> np.ndarray:
    return read_tensor(path)

"""WAV loading and the fixed-length mono preprocessing steps.

Every clip that reaches the feature extractor is mono at 8192 Hz and exactly
131072 samples long (16.0 s); longer material is cut, shorter material is
zero-padded at the end.  The reader accepts PCM 16-bit and IEEE float 32-bit
RIFF/WAVE files with one or two channels; the writer always emits mono PCM
16-bit (int16 quantization uses a 32768 divisor, so a written file reads back
as exactly the quantized values and a second write/read round trip is the
identity).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import AudioFormatError, CorruptFileError

SAMPLE_RATE = 8192
CLIP_SAMPLES = 131072  # 16 s at 8192 Hz

_FMT_PCM = 1
_FMT_IEEE_FLOAT = 3


@dataclass
class AudioClip:
    """Mono sample buffer in [-1, 1] with its sample rate."""

    samples: np.ndarray
    sample_rate: int

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


def load_wav(path) -> AudioClip:
    """Read a RIFF/WAVE file into a mono clip scaled to [-1, 1].

    Stereo input is averaged down to mono.  Raises AudioFormatError for
    unsupported codecs/bit depths/channel counts and CorruptFileError for
    structural damage.
    """
    with open(path, "rb") as f:
        blob = f.read()
    if len(blob) < 12 or blob[:4] != b"RIFF" or blob[8:12] != b"WAVE":
        raise CorruptFileError(f"{path}: not a RIFF/WAVE file")

    fmt = None
    data = None
    off = 12
    while off + 8 <= len(blob):
        cid = blob[off:off + 4]
        (size,) = struct.unpack_from("<I", blob, off + 4)
        body = blob[off + 8:off + 8 + size]
        if len(body) < size:
            raise CorruptFileError(f"{path}: chunk {cid!r} truncated ({len(body)} of {size} bytes)")
        if cid == b"fmt ":
            if size < 16:
                raise CorruptFileError(f"{path}: fmt chunk too small ({size} bytes)")
            fmt = struct.unpack_from("<HHIIHH", body, 0)
        elif cid == b"data":
            data = body
        off += 8 + size + (size & 1)  # chunks are word-aligned

    if fmt is None or data is None:
        raise CorruptFileError(f"{path}: missing fmt or data chunk")
    audio_format, channels, rate, _byte_rate, _block_align, bits = fmt
    if channels not in (1, 2):
        raise AudioFormatError(f"{path}: {channels} channels unsupported (need mono or stereo)")
    if audio_format == _FMT_PCM and bits == 16:
        raw = np.frombuffer(data, dtype="<i2").astype(np.float64) / 32768.0
    elif audio_format == _FMT_IEEE_FLOAT and bits == 32:
        raw = np.frombuffer(data[: 4 * (len(data) // 4)], dtype="<f4").astype(np.float64)
        raw = np.clip(raw, -1.0, 1.0)
    else:
        raise AudioFormatError(
            f"{path}: unsupported codec (format tag {audio_format}, {bits}-bit); "
            "only PCM 16-bit and IEEE float 32-bit are readable"
        )
    if channels == 2:
        raw = raw[: 2 * (len(raw) // 2)].reshape(-1, 2).mean(axis=1)
    return AudioClip(samples=raw, sample_rate=int(rate))


def write_wav(path, samples: np.ndarray, sample_rate: int = SAMPLE_RATE) -> None:
    """Write mono PCM 16-bit, little-endian."""
    pcm = np.clip(np.round(np.asarray(samples, dtype=np.float64) * 32768.0), -32768, 32767)
    pcm = pcm.astype("<i2")
    payload = pcm.tobytes()
    hdr = b"RIFF" + struct.pack("<I", 36 + len(payload)) + b"WAVE"
    hdr += b"fmt " + struct.pack("<IHHIIHH", 16, _FMT_PCM, 1, sample_rate,
                                 sample_rate * 2, 2, 16)
    hdr += b"data" + struct.pack("<I", len(payload))
    with open(path, "wb") as f:
        f.write(hdr + payload)


def resample(clip: AudioClip, target_rate: int) -> AudioClip:
    """Linear-interpolation resampling; no-op when rates match."""
    if target_rate <= 0:
        raise ValueError(f"target_rate must be positive, got {target_rate}")
    if clip.sample_rate == target_rate:
        return clip
    n_out = int(round(len(clip.samples) * target_rate / clip.sample_rate))
    positions = np.arange(n_out) * (clip.sample_rate / target_rate)
    out = np.interp(positions, np.arange(len(clip.samples)), clip.samples)
    return AudioClip(samples=out, sample_rate=target_rate)


def fix_length(clip: AudioClip, n: int = CLIP_SAMPLES) -> AudioClip:
    """Cut to the first n samples, or zero-pad at the end if shorter."""
    s = clip.samples
    if len(s) >= n:
        out = s[:n].copy()
    else:
        out = np.zeros(n, dtype=np.float64)
        out[: len(s)] = s
    return AudioClip(samples=out, sample_rate=clip.sample_rate)

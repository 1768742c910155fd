"""Dataset plumbing: JSONL manifests and a deterministic synthetic corpus.

The real seven-class corpus the pipeline targets is not publicly available,
so desk-scale verification runs on synthetic "modes": each class is a fixed
pattern of scale intervals (in cents over a class tonic), and a clip is a
seeded random walk over that scale played as harmonically-rich notes.  The
classes are separable by construction — tonics and interval patterns chosen
for controllability at the pipeline's frequency resolution, not
musicologically faithful Dastgahs.

Every clip is a pure function of its ``SynthSpec`` (class id + 64-bit seed),
so datasets regenerate bit-identically.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .audio import CLIP_SAMPLES, SAMPLE_RATE, AudioClip, write_wav
from .errors import ConfigError, ManifestError
from .rng import Rng, combine_seed

CLASS_NAMES = ("Shour", "Homayoun", "Mahour", "Segah", "Chahargah", "Rastpanjgah", "Nava")

# One interval pattern per class: scale degrees in cents above the tonic.
# Pairwise distinct by construction.
SCALE_CENTS = (
    (0, 200, 400, 500, 700, 900, 1100),
    (0, 100, 300, 500, 700, 800, 1000),
    (0, 150, 350, 500, 700, 850, 1050),
    (0, 300, 400, 600, 700, 1000, 1100),
    (0, 100, 400, 600, 800, 900, 1150),
    (0, 250, 450, 550, 750, 950, 1150),
    (0, 200, 350, 600, 750, 900, 1050),
)

# Per-class tonic, spread evenly over two octaves (class k is 2k/7 octaves
# above 180 Hz).  Interval patterns alone cannot separate the classes here:
# at 8192 Hz with a 510-point window one frequency bin is ~16 Hz, which is
# ~120 cents at a 200 Hz tonic, wider than most pattern differences above.
# Distinct tonics put every class on its own harmonic comb — fundamentals
# ~2.5 bins apart between neighboring classes and upper harmonics many bins
# apart — which keeps the corpus separable by construction at this
# resolution.  The highest partial (top degree of the top class, third
# harmonic) stays under the 4096 Hz Nyquist limit.
CLASS_TONICS_HZ = tuple(180.0 * 2.0 ** (2.0 * k / 7.0) for k in range(len(CLASS_NAMES)))

_HARMONIC_AMPS = (1.0, 0.5, 0.25)  # fundamental + 2 overtones
_NOTE_RATE = 4  # notes per second
_FADE_SECONDS = 0.010
_PEAK = 0.9


@dataclass(frozen=True)
class ManifestRecord:
    """One corpus entry: audio path (relative to the manifest), class label,
    and an optional frozen split assignment."""

    path: str
    label: str
    split: str | None = None


@dataclass(frozen=True)
class SynthSpec:
    """Everything that determines a synthetic clip.

    ``tonic_hz`` defaults to the class tonic (``CLASS_TONICS_HZ``)."""

    class_id: int
    seed: int
    sample_rate: int = SAMPLE_RATE
    n_samples: int = CLIP_SAMPLES
    tonic_hz: float | None = None


def synth_clip(spec: SynthSpec) -> AudioClip:
    """Render one clip: a seeded random note sequence over the class scale.

    Each note's degree is drawn uniformly from the scale (independent draws,
    so every clip covers the whole pattern with similar weight).  Notes are
    ``1/_NOTE_RATE`` s long, each a fundamental plus two harmonics with mild
    per-note amplitude jitter and 10 ms linear fades; the whole clip is
    normalized to peak ``_PEAK``.
    """
    if not 0 <= spec.class_id < len(SCALE_CENTS):
        raise ConfigError(f"class_id must be in 0..{len(SCALE_CENTS) - 1}, got {spec.class_id}")
    rng = Rng(spec.seed)
    tonic = spec.tonic_hz if spec.tonic_hz is not None else CLASS_TONICS_HZ[spec.class_id]
    degrees = SCALE_CENTS[spec.class_id]
    note_len = spec.sample_rate // _NOTE_RATE
    n_notes = spec.n_samples // note_len
    if n_notes * note_len != spec.n_samples:
        raise ConfigError(f"{spec.n_samples} samples is not a whole number of notes")

    t = np.arange(note_len) / spec.sample_rate
    fade = int(round(_FADE_SECONDS * spec.sample_rate))
    env = np.ones(note_len)
    env[:fade] *= np.arange(1, fade + 1) / fade
    env[-fade:] *= np.arange(fade, 0, -1) / fade

    out = np.empty(spec.n_samples)
    for k in range(n_notes):
        pos = int(rng.integers(len(degrees)))
        f0 = tonic * 2.0 ** (degrees[pos] / 1200.0)
        note = np.zeros(note_len)
        for h, amp in enumerate(_HARMONIC_AMPS, start=1):
            jitter = 0.9 + 0.2 * rng.uniform()
            note += amp * jitter * np.sin(2.0 * np.pi * f0 * h * t)
        out[k * note_len : (k + 1) * note_len] = note * env
    out *= _PEAK / np.abs(out).max()
    return AudioClip(samples=out, sample_rate=spec.sample_rate)


def generate_dataset(n_per_class: int, base_seed: int, out_dir) -> Path:
    """Write ``7 * n_per_class`` WAV files plus a JSONL manifest; returns the
    manifest path.  Clip seeds are ``base_seed XOR hash(class_id, index)`` so
    any subset regenerates identically regardless of generation order."""
    if n_per_class < 1:
        raise ConfigError(f"n_per_class must be >= 1, got {n_per_class}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    records = []
    for class_id, label in enumerate(CLASS_NAMES):
        for idx in range(n_per_class):
            seed = base_seed ^ combine_seed(class_id, idx)
            clip = synth_clip(SynthSpec(class_id=class_id, seed=seed))
            fname = f"{label.lower()}_{idx:03d}.wav"
            write_wav(out_dir / fname, clip.samples, clip.sample_rate)
            records.append(ManifestRecord(path=fname, label=label))
    manifest_path = out_dir / "manifest.jsonl"
    write_manifest(records, manifest_path)
    return manifest_path


def write_manifest(records, path) -> None:
    """One JSON object per line, keys sorted, so output is byte-deterministic."""
    lines = []
    for rec in records:
        obj = {"path": rec.path, "label": rec.label}
        if rec.split is not None:
            obj["split"] = rec.split
        lines.append(json.dumps(obj, sort_keys=True))
    Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")


def load_manifest(path) -> list[ManifestRecord]:
    """Parse and validate a JSONL manifest; errors carry the line number."""
    path = Path(path)
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise ManifestError(f"{path}:{lineno}: invalid JSON: {e}") from e
            if not isinstance(obj, dict):
                raise ManifestError(f"{path}:{lineno}: expected an object, got {type(obj).__name__}")
            missing = {"path", "label"} - obj.keys()
            if missing:
                raise ManifestError(f"{path}:{lineno}: missing field(s) {sorted(missing)}")
            label = obj["label"]
            if label not in CLASS_NAMES:
                raise ManifestError(
                    f"{path}:{lineno}: unknown label {label!r} (expected one of {', '.join(CLASS_NAMES)})"
                )
            split = obj.get("split")
            if split is not None and split not in ("train", "test"):
                raise ManifestError(f"{path}:{lineno}: split must be 'train' or 'test', got {split!r}")
            records.append(ManifestRecord(path=str(obj["path"]), label=label, split=split))
    return records


def resolve_audio_path(manifest_path, record: ManifestRecord) -> Path:
    """Manifest paths are relative to the manifest file itself."""
    p = Path(record.path)
    return p if p.is_absolute() else Path(manifest_path).parent / p

"""Dastgah classification from audio: STFT front end, conv-recurrent net,
training/evaluation engine, and a deterministic synthetic dataset generator.

Layout:

* ``audio`` / ``dsp`` — WAV I/O, resampling, STFT magnitudes, shifted-dB
  spectrograms, spectrogram caching;
* ``fft`` — radix-2 + Bluestein FFT used by the STFT;
* ``kernels`` — compiled/numpy conv+pool backends;
* ``layers`` / ``model`` — network building blocks and the assembled stack;
* ``training`` / ``metrics`` — loss, Adam, splits, per-class P/R/F1;
* ``dataset`` — manifests and the synthetic corpus;
* ``gradcheck`` — finite-difference gradient verification;
* ``cli`` — the ``azarnet`` executable.
"""

from .audio import CLIP_SAMPLES, SAMPLE_RATE, AudioClip, fix_length, load_wav, resample, write_wav
from .dataset import (
    CLASS_NAMES,
    ManifestRecord,
    SynthSpec,
    generate_dataset,
    load_manifest,
    synth_clip,
    write_manifest,
)
from .dsp import StftConfig, preprocess, stft_magnitude, to_db_shifted
from .errors import (
    AudioFormatError,
    AzarNetError,
    CheckpointError,
    ConfigError,
    CorruptFileError,
    DataError,
    DimensionError,
    ManifestError,
    StateError,
    TrainingDiverged,
)
from .metrics import ClassReport, class_report, confusion_matrix, report_to_text
from .model import ModelConfig, build_azarnet, load_checkpoint, save_checkpoint
from .rng import Rng, combine_seed
from .training import (
    TrainConfig,
    TrainingHistory,
    cross_entropy_loss,
    evaluate,
    predict_probs,
    regularization_penalty,
    stratified_split,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "AudioClip",
    "AudioFormatError",
    "AzarNetError",
    "CheckpointError",
    "CLASS_NAMES",
    "ClassReport",
    "CLIP_SAMPLES",
    "ConfigError",
    "CorruptFileError",
    "DataError",
    "DimensionError",
    "ManifestError",
    "ManifestRecord",
    "ModelConfig",
    "Rng",
    "SAMPLE_RATE",
    "StateError",
    "StftConfig",
    "SynthSpec",
    "TrainConfig",
    "TrainingDiverged",
    "TrainingHistory",
    "build_azarnet",
    "class_report",
    "combine_seed",
    "confusion_matrix",
    "cross_entropy_loss",
    "evaluate",
    "fix_length",
    "generate_dataset",
    "load_checkpoint",
    "load_manifest",
    "load_wav",
    "predict_probs",
    "preprocess",
    "regularization_penalty",
    "report_to_text",
    "resample",
    "save_checkpoint",
    "stft_magnitude",
    "stratified_split",
    "synth_clip",
    "to_db_shifted",
    "train",
    "write_manifest",
    "write_wav",
]

"""Exception types shared across the package."""


class AzarNetError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(AzarNetError):
    """Shapes or sizes of operands do not line up."""


class AudioFormatError(AzarNetError):
    """WAV file uses an unsupported codec, bit depth, or channel count."""


class CorruptFileError(AzarNetError):
    """File is structurally damaged: truncated chunk, bad magic, short payload."""


class CheckpointError(AzarNetError):
    """Model checkpoint is missing, malformed, or from an unknown version."""


class ManifestError(AzarNetError):
    """Dataset manifest line failed to parse or validate."""


class ConfigError(AzarNetError):
    """Model or training configuration is internally inconsistent."""


class StateError(AzarNetError):
    """Operation needs state that is absent, e.g. backward without a cached
    train-mode forward."""


class DataError(AzarNetError):
    """Dataset content violates a precondition, e.g. a class with no samples."""


class TrainingDiverged(AzarNetError):
    """Loss became non-finite during training."""

    def __init__(self, epoch: int, batch: int, loss: float):
        super().__init__(f"non-finite loss {loss!r} at epoch {epoch}, batch {batch}")
        self.epoch = epoch
        self.batch = batch
        self.loss = loss

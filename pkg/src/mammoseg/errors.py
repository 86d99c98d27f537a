"""Exception types shared across stages."""


class MammosegError(Exception):
    pass


class PgmFormatError(MammosegError, ValueError):
    """Malformed netpbm header or payload."""


class PgmValueError(PgmFormatError):
    """A sample exceeds the declared max_value."""


class PgmTruncatedError(PgmFormatError):
    """Fewer samples than the header promises."""


class ModelFormatError(MammosegError, ValueError):
    """Unreadable or incompatible model file."""


class DegenerateInputError(MammosegError, ValueError):
    """Input carries no usable contrast (constant image, empty mask, ...)."""


class ConfigurationError(MammosegError, ValueError):
    pass


class TrainingError(MammosegError, RuntimeError):
    def __init__(self, message, epoch=None):
        super().__init__(message if epoch is None else f"{message} (epoch {epoch})")
        self.epoch = epoch


class StageError(MammosegError):
    """Wraps a failure with the name of the pipeline stage that raised it."""

    def __init__(self, stage, cause):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause

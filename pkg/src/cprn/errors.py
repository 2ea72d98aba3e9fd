"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Operand dimensions do not line up."""


class ConfigError(ValueError):
    """Invalid layer, model or run configuration."""


class UsageError(RuntimeError):
    """An API was called out of order (e.g. backward before any forward)."""


class ParseError(ValueError):
    """A file could not be parsed; ``offset`` is the byte position when known."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class CheckpointError(ValueError):
    """A checkpoint file is malformed or inconsistent with the model."""


class NumericalError(RuntimeError):
    """Non-finite values were produced; training/checking aborts."""

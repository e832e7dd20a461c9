"""Shared exception types."""


class ParseError(ValueError):
    """Malformed input file; carries the offending 1-based line number."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DimensionError(ValueError):
    """Operand shapes incompatible with the requested operation."""


class ConfigError(ValueError):
    """Inconsistent or unknown configuration."""


class TrainingError(RuntimeError):
    """Training aborted (non-finite loss or gradient)."""

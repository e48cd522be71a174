"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes, so every module raises one of them
rather than a bare ``ValueError``.
"""


class SepmarkError(Exception):
    """Base class for all package errors."""


class FormatError(SepmarkError, ValueError):
    """Malformed input data (corpus files, config files, model files)."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"{message} at line {line}"
        super().__init__(message)


class InvalidSequenceError(SepmarkError, ValueError):
    """A separator sequence violates the boundary or adjacency constraints."""

    def __init__(self, message, gap=None):
        self.gap = gap
        super().__init__(message)


class CapacityError(SepmarkError):
    """A gold annotation cannot be represented by the chosen scheme."""

    def __init__(self, message, pair=None):
        self.pair = pair
        super().__init__(message)


class EnumerationLimitError(SepmarkError):
    """An exhaustive oracle was asked to enumerate too many objects."""

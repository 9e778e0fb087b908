"""Exception hierarchy shared across the package."""


class NortError(Exception):
    """Base class for all package errors."""


class ShapeError(NortError):
    """Dimension mismatch between tensors, factors or vectors."""


class RangeError(NortError):
    """Index outside the tensor extents."""


class ConfigError(NortError):
    """Invalid solver / experiment configuration.

    CLI maps this to exit code 2.
    """


class NumericalError(NortError):
    """Numerical failure (e.g. SVD non-convergence). CLI exit code 3."""

    def __init__(self, msg, diagnostics=None):
        super().__init__(msg)
        self.diagnostics = diagnostics or {}


class ParseError(NortError):
    """Malformed input file; carries the byte offset of the failure."""

    def __init__(self, msg, offset=None):
        if offset is not None:
            msg = f"{msg} (byte offset {offset})"
        super().__init__(msg)
        self.offset = offset

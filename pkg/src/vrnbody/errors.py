"""Exception types shared across the package."""


class VrnError(Exception):
    """Base class for all package errors."""


class ConfigurationError(VrnError, ValueError):
    """An operation or network was configured with incompatible shapes or options."""


class UsageError(VrnError, ValueError):
    """A function was called in a way its contract does not allow."""


class ParseError(VrnError, ValueError):
    """A text file could not be parsed; carries the offending line number."""

    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)


class FormatError(VrnError, ValueError):
    """A binary file has a bad magic number, version or is truncated."""


class PreconditionError(VrnError, ValueError):
    """Input data violates a documented precondition (e.g. an open mesh)."""


class NonFiniteLossError(VrnError, RuntimeError):
    """Training produced a NaN or infinite loss."""

    def __init__(self, message, diagnostics=None):
        self.diagnostics = diagnostics or {}
        super().__init__(message)

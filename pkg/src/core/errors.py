"""
Exception hierarchy shared by every service.

Services raise these instead of bare ValueError so the command layer can map
them onto exit codes: configuration problems exit with 2, everything else
with 3.
"""

from typing import Optional


class ForgeError(Exception):
    """Base class for all errors raised by the toolkit."""


class InvalidArgumentError(ForgeError):
    """An operation received arguments outside its contract."""


class MatrixValidationError(ForgeError):
    """A matrix failed to parse, load, or pass the unitarity check."""

    def __init__(self, message: str, source: Optional[str] = None):
        self.source = source
        if source:
            message = f"{source}: {message}"
        super().__init__(message)


class ResourceLimitError(ForgeError):
    """A configured resource cap would be exceeded."""


class InternalConsistencyError(ForgeError):
    """A decomposition produced factors that do not reconstruct their input."""


class ConfigError(ForgeError):
    """The run configuration is invalid."""

    def __init__(self, message: str, field: Optional[str] = None, line: Optional[int] = None):
        self.field = field
        self.line = line
        prefix = ""
        if field:
            prefix += f"[{field}] "
        if line is not None:
            prefix += f"(line {line}) "
        super().__init__(prefix + message)

"""
Exception hierarchy for dampwave
"""
from typing import Any, Dict, Optional


class DampwaveError(Exception):
    """Base class for every error raised by dampwave."""


class InvalidConfigError(DampwaveError):
    """A configuration value is outside its admissible range."""


class ConfigParseError(InvalidConfigError):
    """The configuration document is not valid JSON."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class HypothesisViolationError(InvalidConfigError):
    """A structural hypothesis on the coefficients or nonlinearities fails."""

    def __init__(self, message: str, node: Optional[int] = None):
        super().__init__(message)
        self.node = node


class InvalidInputError(DampwaveError):
    """Arguments handed to a diagnostic are unusable."""


class OutOfWindowError(DampwaveError):
    """A history query fell outside the retained delay window."""


class NumericalError(DampwaveError):
    """A dense linear-algebra kernel failed."""

    def __init__(self, message: str, metadata: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.metadata = metadata or {}


class NotExponentiallyStableError(DampwaveError):
    """The generator has a non-negative spectral abscissa."""

    def __init__(self, abscissa: float, mode: str):
        super().__init__(
            f"generator for mode={mode} is not exponentially stable "
            f"(spectral abscissa {abscissa:.6e} >= 0)"
        )
        self.abscissa = abscissa
        self.mode = mode


EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DIVERGED = 2
EXIT_INTERNAL = 3


def exit_code_for(exc: BaseException) -> int:
    """Map an exception to the CLI exit code."""
    if isinstance(exc, (InvalidConfigError, InvalidInputError)):
        return EXIT_CONFIG
    return EXIT_INTERNAL

#!/usr/bin/env python3
"""
Exception hierarchy for SMALLDET.

Every error raised on purpose by the library derives from SmallDetError and
carries the exit code the command-line surface reports for it.
"""
from pathlib import Path
from typing import Optional, Union

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_PRECONDITION = 3
EXIT_VERDICT_FAILED = 4


class SmallDetError(Exception):
    """Base class for SMALLDET errors."""

    exit_code = 1


class UsageError(SmallDetError, ValueError):
    """Invalid arguments, grid settings or command options."""

    exit_code = EXIT_USAGE


class ConfigError(UsageError):
    """Malformed configuration file or unknown configuration key."""


class SpecFileError(UsageError):
    """Malformed covariance or matrix text file."""

    def __init__(
        self,
        message: str,
        path: Optional[Union[str, Path]] = None,
        line: Optional[int] = None,
    ):
        self.path = str(path) if path is not None else None
        self.line = line
        location = ""
        if self.path is not None:
            location = self.path
            if line is not None:
                location += f":{line}"
            location += ": "
        super().__init__(f"{location}{message}")


class PreconditionError(SmallDetError, ValueError):
    """A mathematical precondition of the requested computation is violated."""

    exit_code = EXIT_PRECONDITION


class NotPositiveSemidefiniteError(PreconditionError):
    """Covariance, Gram or adjugate input failed its definiteness check."""


class DimensionMismatchError(PreconditionError):
    """A dense covariance does not cover the requested entry ordering."""


class CorollaryHypothesisError(PreconditionError):
    """Some conditional residual variance d_k is zero."""


class GridRangeError(PreconditionError):
    """A threshold falls outside the grid of a product-law table."""

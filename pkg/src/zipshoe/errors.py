"""Exception hierarchy shared by all zipshoe modules."""

from __future__ import annotations


class ZipshoeError(Exception):
    """Base class for every error raised by this package."""


class AlphabetError(ZipshoeError, ValueError):
    """A symbol is not in the alphabet required at its position."""


class ConfigError(ZipshoeError, ValueError):
    """Model or system parameters violate a construction invariant."""


class PreconditionError(ZipshoeError, ValueError):
    pass


class ConvergenceError(ZipshoeError, ArithmeticError):
    pass


class CapExceededError(ZipshoeError):
    """An enumeration would exceed the configured size cap."""


class EscapeError(ZipshoeError, ValueError):
    """A point left the union of branch strips (the region where f is modeled)."""

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step


class DomainError(ZipshoeError, ValueError):
    pass


class PerturbationTooLargeError(ZipshoeError):
    """Strip recovery failed for a perturbed model."""

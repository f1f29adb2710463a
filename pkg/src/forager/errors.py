"""Exception types shared across the package."""

from __future__ import annotations


class SolverError(RuntimeError):
    """Base class for failures raised while advancing the system.

    ``partial`` is filled in by :func:`forager.solver.run` with whatever
    was computed before the failure, so callers can still write artifacts.
    """

    def __init__(self, message: str, t: float | None = None):
        super().__init__(message)
        self.t = t
        self.partial = None


class NonFinite(SolverError):
    pass


class DtUnderflow(SolverError):
    pass


class NegativityViolation(SolverError):
    pass


class EntropyDomain(ValueError):
    """A field is too close to zero for the logarithmic entropy."""


class InsufficientData(ValueError):
    pass


class ConfigError(ValueError):
    """Invalid experiment configuration; ``path`` is the dotted field path."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path

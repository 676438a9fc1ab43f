"""Exception types shared across the package."""
from __future__ import annotations


class SemalgError(Exception):
    """Base class for errors raised by this package."""


class GraphParseError(SemalgError):
    """Malformed graph text/JSON input; carries a 1-based line number."""

    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}")


class DataError(SemalgError):
    """Malformed or inconsistent numeric input data."""


class InternalError(SemalgError):
    """An internal invariant was violated; indicates a bug, not bad input."""


class SingularSystemError(SemalgError):
    """A parameter-recovery linear system was numerically singular."""

    def __init__(self, node: int):
        self.node = node
        super().__init__(f"singular recovery system at node {node}")


class IdenticallySingularError(SemalgError):
    """A symbolic system matrix has identically zero determinant."""


class NonInvertibleError(SemalgError):
    """I - Lambda is singular (possible only for cyclic graphs)."""


class CyclicGraphError(SemalgError):
    """Operation requires an acyclic graph."""


class NonGenericError(SemalgError):
    """Covariance matrix is non-generic for the requested recovery."""

    def __init__(self, message: str, residual: float | None = None):
        self.residual = residual
        super().__init__(message)


class NotConvergedError(SemalgError):
    """Maximum-likelihood fitting failed to converge; carries best attempt."""

    def __init__(self, message: str, best=None):
        self.best = best
        super().__init__(message)


class MissingRepresentativeError(SemalgError):
    """A cluster has no identifiable member to derive constraints from."""

"""Exception hierarchy shared by the package and mapped to CLI exit codes."""


class LatticeWeaveError(Exception):
    """Base class for all package errors."""


class SequenceError(LatticeWeaveError, ValueError):
    """Malformed or inconsistent construction sequence."""

    def __init__(self, message: str, line: int | None = None) -> None:
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class InvariantViolation(LatticeWeaveError):
    """A structural invariant failed (non-bipartite graph, bad region, ...)."""


class ResourceCapExceeded(LatticeWeaveError):
    """Requested computation exceeds a configured size cap."""

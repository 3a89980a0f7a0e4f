"""Semantic exception hierarchy.

Errors are split by who is at fault: the caller (bad inputs, broken
preconditions), the data (support or dimension mismatches), or the
computation itself (an object failed its own certification, a solver did
not converge).  Callers that want to distinguish these cases should catch
the specific class; everything derives from :class:`MixlabError`.
"""

from __future__ import annotations


class MixlabError(Exception):
    """Base class for all package-specific errors."""


class DimensionMismatchError(MixlabError, ValueError):
    """Operands live on different state spaces or have incompatible shapes."""


class SupportError(MixlabError, ValueError):
    """An absolute-continuity requirement failed; the message names a state."""


class InvariantViolationError(MixlabError):
    """A constructed object failed its internal certification.

    Carries the offending residual when one is available.
    """

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


class IrreducibilityError(MixlabError):
    """A conductance support graph is disconnected where connectivity is required."""


class ConfigurationError(MixlabError, ValueError):
    """Invalid user-facing configuration: seeds, grids, schemas, flags."""


class PreconditionError(MixlabError):
    """A documented operation precondition does not hold for these inputs."""


class SolverError(MixlabError, RuntimeError):
    """The linear-programming solver failed; carries the iteration count."""

    def __init__(self, message: str, iterations: int | None = None):
        super().__init__(message)
        self.iterations = iterations


class NumericError(MixlabError):
    """An underlying numerical routine (eigensolve, quadrature) broke down."""

"""Exception hierarchy shared across the package.

Two top-level families matter for the command line tool: bad input
(ValidationError, exit code 2) and a numerical routine failing to meet
its own tolerance (NumericalError, exit code 3).
"""


class RingsoiError(Exception):
    """Base class for all package-specific errors."""


class ValidationError(RingsoiError, ValueError):
    """Invalid parameters, domains, or malformed configuration."""


class DomainError(ValidationError):
    """Argument outside the mathematical domain of an operation."""


class ContractError(ValidationError):
    """Inputs that violate a documented call contract (mismatched grids etc.)."""


class SamplingError(ValidationError):
    """A time grid too coarse (or too ragged) for the requested analysis."""


class NumericalError(RingsoiError, RuntimeError):
    """A numerical routine could not reach its required tolerance."""


class TruncationError(NumericalError):
    """A truncated expansion leaves more tail mass than the tolerance allows."""


class ConsistencyError(NumericalError):
    """Internal cross-check failed (e.g. null space absent at a claimed root)."""


class DegeneracyError(NumericalError):
    """A root carries a higher-dimensional null space than expected."""

    def __init__(self, message, null_vectors=None):
        super().__init__(message)
        self.null_vectors = null_vectors

"""Exception types. Each carries the CLI exit code it maps to."""


class OpampError(Exception):
    exit_code = 1


class DomainError(OpampError, ValueError):
    """Bad argument value or malformed input."""

    exit_code = 2


class ParseError(DomainError):
    exit_code = 2


class PreconditionError(OpampError):
    """A mathematical precondition does not hold (e.g. bias already 1)."""

    exit_code = 3


class IrregularGraphError(PreconditionError):
    exit_code = 3


class CapacityError(OpampError):
    """Something would have to be materialized above a configured cap."""

    exit_code = 4


class ProviderError(CapacityError):
    """No auxiliary expander reaches the requested lambda within budget."""

    exit_code = 4


class CertificationError(OpampError):
    """The construction ran but its measured value misses the target."""

    exit_code = 5


class ConvergenceError(CertificationError):
    def __init__(self, message, estimate=None, residual=None, iterations=None):
        super().__init__(message)
        self.estimate = estimate
        self.residual = residual
        self.iterations = iterations

"""Exception taxonomy shared across the package.

Every error raised by the public API derives from SemistructError so callers
can catch one base type. The CLI maps these onto exit codes: configuration
and schema problems exit 2, data and shape problems exit 3, numerical
failures exit 4.
"""

from __future__ import annotations


class SemistructError(Exception):
    """Base class for all package-specific errors."""


class DimensionError(SemistructError):
    """Operand shapes are incompatible for the requested operation."""


class SingularSystemError(SemistructError):
    """A linear system is singular at the configured cutoff.

    Carries the numerical rank of the offending matrix when known.
    """

    def __init__(self, message: str, rank: int | None = None):
        super().__init__(message)
        self.rank = rank


class SpecError(SemistructError):
    """A term or model specification is internally inconsistent."""


class SchemaError(SemistructError):
    """Named columns or stored metadata do not match the provided data."""


class DataError(SemistructError):
    """Data values are unusable (non-finite, empty, wrong type)."""


class DegenerateError(SemistructError):
    """A quantity is undefined for this input (e.g. zero variance)."""


class PreconditionError(SemistructError):
    """A documented precondition of the operation does not hold."""

"""Exception hierarchy shared by all modules."""


class BekkError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(BekkError, ValueError):
    """Array shapes are inconsistent with the requested operation."""


class DomainError(BekkError, ValueError):
    """An input lies outside the domain where an operation is defined."""


class NumericalError(BekkError, ArithmeticError):
    """A numerical routine failed (non-convergence, non-finite values)."""


class InconsistencyError(NumericalError):
    """A result contradicts a property that theory guarantees."""


class ModelError(BekkError, ValueError):
    """A model definition failed validation.

    Parameters
    ----------
    field : str
        Name of the offending field (``"C"``, ``"A"``, ``"B"``, ...).
    message : str
        Human readable reason.
    """

    def __init__(self, field, message):
        self.field = field
        self.message = message
        super().__init__(f"{field}: {message}")


class CertificateFailure(BekkError):
    """The drift inequality was violated at a sampled state."""

    def __init__(self, message, witness=None):
        self.witness = witness
        super().__init__(message)

"""Exception hierarchy shared by every module."""


class CvqkdError(Exception):
    """Base class for all package errors."""


class InvalidInputError(CvqkdError, ValueError):
    """An argument is outside its documented domain."""


class DegenerateInputError(InvalidInputError):
    """Input data carries no information (e.g. all-zero quadratures)."""


class NumericalDomainError(CvqkdError, ArithmeticError):
    """A computed quantity left its physical domain."""


class BlockedChannelError(NumericalDomainError):
    """The channel transmits nothing, so estimators are undefined."""


class EstimationFailureError(NumericalDomainError):
    """Finite-size worst-case transmittance is not positive."""

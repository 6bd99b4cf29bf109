"""Exception types.

Input problems derive from :class:`ValidationError` (a ``ValueError``);
failures of the numerics themselves derive from :class:`NumericError`.
The CLI maps the first family to exit code 2 and the second to 3.
"""


class SeqReadoutError(Exception):
    """Base class for all package errors."""


class ValidationError(SeqReadoutError, ValueError):
    """An argument violates a documented precondition."""


class InvalidDimension(ValidationError):
    pass


class InvalidEfficiency(ValidationError):
    pass


class InvalidTime(ValidationError):
    pass


class InvalidProtocol(ValidationError):
    pass


class ShapeMismatch(ValidationError):
    """Lengths, sample rates or binnings of two inputs disagree."""


class EmptyInput(ValidationError):
    pass


class ConfigError(ValidationError):
    """Malformed or inconsistent experiment configuration."""


class NumericError(SeqReadoutError, ArithmeticError):
    """A computation could not produce a trustworthy result."""


class TruncationOverflow(NumericError):
    """Fock-space truncation or a sampling grid would lose probability mass."""


class NumericDivergence(NumericError):
    pass


class CoverageDeficit(NumericError):
    """Histogram edges leave too many samples outside the grid."""


class DegenerateNormalization(NumericError):
    pass


class DegenerateGeometry(NumericError):
    pass


class RankDeficientFit(NumericError):
    pass


class NonConvergence(NumericError):
    pass

"""Exception hierarchy.

Errors split into two families: ``CvdError`` for invalid input and
``GuardError`` for numeric guards (dimension caps, validity ranges) that
the command line maps to exit code 1.
"""


class CvdError(Exception):
    """Base class for all package errors."""


class GuardError(CvdError):
    """A numeric guard tripped; the inputs are valid but out of range."""


class InvalidLambda(CvdError, ValueError):
    pass


class TailTooHeavy(GuardError):
    def __init__(self, required_j_max, tail, tail_tol):
        self.required_j_max = required_j_max
        self.tail = tail
        self.tail_tol = tail_tol
        super().__init__(
            f"discarded tail {tail:.3e} exceeds tail_tol {tail_tol:.3e}; "
            f"j_max must be at least {required_j_max}"
        )


class NotSchmidtForm(CvdError):
    pass


class DimensionTooLarge(GuardError):
    pass


class EmptyProjection(CvdError):
    pass


class WrongSectorError(CvdError):
    pass


class ZeroSqueezing(CvdError, ValueError):
    pass


class NoiseTooLarge(GuardError):
    pass


class WindowEmpty(GuardError):
    pass


class UnstableStep(GuardError):
    pass


class ConfigError(CvdError):
    def __init__(self, message, line=None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)

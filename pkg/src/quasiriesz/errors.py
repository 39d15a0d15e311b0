"""Exception types shared across the package."""


class QuasiRieszError(Exception):
    """Base class for all package errors."""


class PrecisionExhausted(QuasiRieszError):
    """Float-mode expansion ran past the digits the representation can support."""


class NotAnIndicator(QuasiRieszError):
    """An integer combination of intervals does not take values in {0, 1}."""

    def __init__(self, message, witness=None, value=None):
        super().__init__(message)
        self.witness = witness
        self.value = value


class OutOfWindow(QuasiRieszError):
    pass


class MissingCertificate(QuasiRieszError):
    """An interval length has no m*alpha + n certificate."""


class ReconstructionFailure(QuasiRieszError):
    def __init__(self, message, j=None):
        super().__init__(message)
        self.j = j


class ConvergenceFailure(QuasiRieszError):
    pass


class MeasureMismatch(QuasiRieszError):
    pass


class NotMeanZero(QuasiRieszError):
    """A trigonometric polynomial with nonzero mean cannot be a coboundary."""


class ConfigError(QuasiRieszError):
    pass

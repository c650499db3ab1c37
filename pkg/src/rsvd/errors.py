"""Exception types raised across the package."""


class RSVDError(Exception):
    """Base class for all package errors."""


class SingularInput(RSVDError, ValueError):
    pass


class BadWHat(RSVDError, ValueError):
    pass


class NonRealTrace(RSVDError, ArithmeticError):
    pass


class StepTooLarge(RSVDError, RuntimeError):
    pass


class BadMu(RSVDError, ValueError):
    pass


class NonGenericSpectrum(RSVDError, ValueError):
    pass


class DomainViolation(RSVDError, ValueError):
    pass


class SingularCauchy(RSVDError, ArithmeticError):
    pass


class OffSlice(RSVDError, ValueError):
    pass


class DomainExit(RSVDError, RuntimeError):
    """The integrated state left the open domain at ``time``."""

    def __init__(self, time, message=""):
        self.time = time
        super().__init__(f"state left the domain at t={time:.6g}" + (f": {message}" if message else ""))


class ConfigError(RSVDError, ValueError):
    pass

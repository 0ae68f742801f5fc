"""Exception hierarchy shared by every htdbench module."""


class HTDError(Exception):
    """Base class for all errors raised by htdbench."""


class NumericInputError(HTDError, ValueError):
    """A numeric argument was NaN or infinite."""


class InputDomainError(HTDError, ValueError):
    """An argument lies outside the domain the operation accepts."""


class DegenerateObservationError(HTDError, ArithmeticError):
    """Every hypothesis assigned zero likelihood to an observation."""


class CapabilityError(HTDError, TypeError):
    """The model lacks a capability the caller requires."""


class UndefinedStatisticError(HTDError, ValueError):
    """A statistic was requested over an empty or zero-sized population."""


class FormatError(HTDError, ValueError):
    """A serialized file is malformed, truncated or of the wrong version."""


class ConfigurationError(HTDError, ValueError):
    """A configuration is missing, incomplete or inconsistent."""


class CalibrationFailure(HTDError):
    """Calibration did not reach its target band within the iteration cap."""

    def __init__(self, message, *, best=None, log=None):
        super().__init__(message)
        self.best = best
        self.log = log or []

"""Exception types raised across the package."""


class MixcalError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(MixcalError, ValueError):
    """A parameter lies outside its documented domain."""


class DimensionError(MixcalError, ValueError):
    """Vector or matrix shapes do not line up."""


class BracketError(MixcalError, ValueError):
    """A root-finding bracket does not contain a sign change."""


class DegenerateClassifierError(MixcalError, ValueError):
    """The weight vector is zero, so no direction (and no confidence) exists."""


class EmptyReportError(MixcalError, ValueError):
    """A reliability report was requested for an empty score set."""


class NumericalFailure(MixcalError, ArithmeticError):
    """Quadrature or a solver failed to converge.

    ``estimates`` holds the last two successive approximations when the
    failure came from node doubling; ``trial_index`` is filled in by the
    experiment harness when the failure happened inside a trial.
    """

    def __init__(self, message, estimates=None, trial_index=None):
        super().__init__(message)
        self.estimates = estimates
        self.trial_index = trial_index

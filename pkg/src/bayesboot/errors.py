"""Exception hierarchy shared by all modules."""


class BayesBootError(Exception):
    """Base class for every error raised by this package."""


class ParameterDomainError(BayesBootError, ValueError):
    """A parameter lies outside the domain where the operation is defined."""


class ArgumentOrderError(ParameterDomainError):
    pass


class DegeneratePosteriorError(ParameterDomainError):
    pass


class TiesUnsupportedError(ParameterDomainError):
    pass


class UnsupportedPriorError(ParameterDomainError):
    pass


class InsufficientDataError(ParameterDomainError):
    pass


class SingularDesignError(BayesBootError, ArithmeticError):
    pass


class CorrectionDomainError(BayesBootError, ArithmeticError):
    pass


class GridDomainError(ParameterDomainError):
    pass


class NumericError(BayesBootError, ArithmeticError):
    """Numerical procedure failed to reach its target accuracy.

    Attributes
    ----------
    achieved : float or None
        The accuracy actually reached, when meaningful.
    """

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class ReplicateError(BayesBootError):
    """An error raised while computing one bootstrap replicate."""

    def __init__(self, index, cause):
        super().__init__(f"replicate {index}: {cause}")
        self.index = index
        self.cause = cause

"""Exception hierarchy."""


class PhononMemError(Exception):
    """Base class for all package errors."""


class ValidationError(PhononMemError, ValueError):
    """Input failed a contract check (bad shape, bad value, bad config)."""


class InvalidDimensionError(ValidationError):
    pass


class ContractViolationError(ValidationError):
    pass


class NotPSDError(ContractViolationError):
    pass


class DomainError(ValidationError):
    pass


class InconsistentParametersError(ValidationError):
    pass


class SingularDesignError(ValidationError):
    """Measurement settings do not span the operator space."""


class InsufficientDataError(ValidationError):
    pass


class IngestionError(ValidationError):
    """A counts file has one or more invalid rows.

    ``violations`` holds one human readable message per problem, each
    prefixed with its line number.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("\n".join(self.violations))


class ConvergenceError(PhononMemError, RuntimeError):
    """An iterative solver hit its iteration cap.

    ``best`` carries the best iterate found so far.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class RangeWarning(UserWarning):
    """A parameter lies outside the range the scaling laws were validated on."""

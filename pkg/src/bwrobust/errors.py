"""Exception types shared across the package."""


class BwRobustError(Exception):
    """Base class for package errors."""


class DomainError(BwRobustError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ValidationError(BwRobustError, ValueError):
    """Invalid construction data or configuration.

    ``items`` carries one message per offending field when several checks
    fail at once (configuration parsing collects everything before raising).
    """

    def __init__(self, message, items=None):
        super().__init__(message)
        self.items = list(items) if items else [message]


class NumericsError(BwRobustError, RuntimeError):
    """A numerical routine failed to converge.

    ``partial`` holds the best available estimate so callers can report
    diagnostics instead of losing the run.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class InfeasibleError(BwRobustError, RuntimeError):
    """The optimization problem has no feasible point.

    ``bound`` is the best achievable value of the violated constraint.
    """

    def __init__(self, message, bound=None):
        super().__init__(message)
        self.bound = bound

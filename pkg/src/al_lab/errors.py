"""Exception hierarchy shared by every module."""


class LabError(Exception):
    """Base class for all errors raised by al_lab."""


class ConfigError(LabError, ValueError):
    """Invalid or inconsistent configuration."""


class InsufficientDataError(LabError, ValueError):
    """Fewer labelled points than the estimator needs (e.g. |S| < k)."""


class DegenerateInputError(LabError, ValueError):
    """Input violates a geometric precondition (duplicate coordinates, ...)."""


class ExhaustionError(LabError, RuntimeError):
    """The pool has no unqueried points left."""


class BudgetError(LabError, RuntimeError):
    """A combinatorial search would exceed its evaluation budget."""


class ConditioningError(LabError, RuntimeError):
    """Rejection sampling accepted too few draws."""


class CouplingViolation(LabError, AssertionError):
    """The open-point increment exceeded its dominating process."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace or []


class PreconditionError(LabError, ValueError):
    """A hypothesis required by a bound does not hold."""

# Exception and warning types shared across the package.


class DimensionError(ValueError):
    """A table's shape does not match the environment it is used with."""


class DomainError(ValueError):
    """An argument is outside the domain an operation is defined on."""


class IterationLimitError(RuntimeError):
    """An iterative solver hit its iteration cap before reaching tolerance."""


class ScheduleOverflowError(OverflowError):
    """A schedule entry grew past the range where exact integers exist."""


class ConfigValidationError(ValueError):
    """An experiment configuration failed validation.

    Carries the full list of violations so callers see every problem at once.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("invalid configuration: " + "; ".join(self.violations))


class AlignmentError(ValueError):
    """Run traces cannot be aligned on a common sample-cost axis."""


class DegenerateDesignWarning(UserWarning):
    """The requested accuracy is already met by the initial error bound."""


class ValidityRegimeWarning(UserWarning):
    """A designed schedule was requested outside its guaranteed regime."""

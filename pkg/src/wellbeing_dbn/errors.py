"""Exception hierarchy shared by every module."""


class WellbeingDbnError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(WellbeingDbnError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ModelError(WellbeingDbnError, ValueError):
    """A model, structure or factor is internally inconsistent."""


class UsageError(WellbeingDbnError, ValueError):
    """An operation was called in a way its contract does not allow."""


class DegenerateEvidenceError(WellbeingDbnError, ArithmeticError):
    """Evidence has zero probability under the model."""


class UndefinedStatisticError(WellbeingDbnError, ArithmeticError):
    """A test statistic is undefined for the given samples."""


class ValidationError(WellbeingDbnError, ValueError):
    """Input data failed validation.

    ``problems`` holds one human-readable message per violation so that a
    whole file can be reported in a single pass.
    """

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))

"""Exception hierarchy. Each family maps to one CLI exit code."""


class DemvarError(Exception):
    exit_code = 1


class ModelError(DemvarError):
    """Malformed or invalid model."""

    exit_code = 1


class ParseError(ModelError):
    def __init__(self, message, line, column=1):
        self.message = message
        self.line = line
        self.column = column
        super().__init__(f"line {line}, column {column}: {message}")


class AssumptionError(DemvarError):
    """A well-definedness precondition of the analysis does not hold."""

    exit_code = 2


class SingularSystemError(AssumptionError):
    """Linear system is singular; the model still contains an end component."""


class InfiniteExpectationError(AssumptionError):
    pass


class ZeroVarianceError(AssumptionError):
    pass


class BudgetError(DemvarError):
    """A configured size cap refused the computation."""

    exit_code = 3

    def __init__(self, message, required=None):
        self.required = required
        super().__init__(message)


class InvariantViolation(DemvarError):
    """An internal consistency check failed (a bug, not a user error)."""

    exit_code = 4

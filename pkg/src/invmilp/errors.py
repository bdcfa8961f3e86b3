"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: usage errors -> 1, data
inconsistencies -> 2, resource/numeric failures -> 3.
"""


class InvMilpError(Exception):
    pass


class StructureError(InvMilpError, ValueError):
    """Malformed problem or dimension mismatch."""


class UsageError(InvMilpError, ValueError):
    pass


class UnsupportedError(InvMilpError, ValueError):
    pass


class DataInconsistencyError(InvMilpError, ValueError):
    """Observed data contradicts the model (e.g. an expert point breaks a fixed row)."""


class ForwardProblemError(InvMilpError, RuntimeError):
    """A forward problem that must be solvable turned out infeasible or unbounded."""


class ResourceLimitError(InvMilpError, RuntimeError):
    def __init__(self, message, incumbent=None):
        super().__init__(message)
        self.incumbent = incumbent


class NumericError(InvMilpError, ArithmeticError):
    pass

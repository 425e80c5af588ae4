"""Exception hierarchy shared by the package.

The CLI maps each class to a process exit code.
"""


class SdsError(Exception):
    exit_code = 5


class DegenerateGeometryError(SdsError, ValueError):
    """Storm center and target coincide, so bearing is undefined."""

    exit_code = 3


class DomainError(SdsError, ValueError):
    exit_code = 3


class ShapeError(SdsError, ValueError):
    exit_code = 3


class FactorizationError(SdsError, ArithmeticError):
    exit_code = 5


class DataError(SdsError, ValueError):
    """Invalid input file or object. ``path`` names the offending field."""

    exit_code = 3

    def __init__(self, message, path=None):
        self.path = path
        if path:
            message = f"{path}: {message}"
        super().__init__(message)


class MappingError(DataError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class SolverError(SdsError, RuntimeError):
    exit_code = 4


class InfeasibleError(SolverError):
    def __init__(self, message, constraint_class=None):
        self.constraint_class = constraint_class
        super().__init__(message)


class InvariantError(SdsError, AssertionError):
    exit_code = 5

"""
Exception hierarchy shared by the library, the solvers and the CLI.

Every error carries the process exit code the CLI should return:
2 for infeasible inputs and violated preconditions, 3 for I/O and parse
failures, 4 when a solver budget ran out before a feasible point was found.
"""

from typing import Optional

import numpy as np


class ReshapingError(Exception):
    """Base class for all fsd_reshaping failures."""

    exit_code = 2


class DimensionError(ReshapingError, ValueError):
    """Weights or bounds do not match the scenario matrix."""


class InvalidParameterError(ReshapingError, ValueError):
    """A parameter lies outside its documented range."""


class PreconditionError(ReshapingError):
    """An operation's precondition does not hold (empty X, Q_ref(1) >= r, ...)."""


class InfeasibleAnchorError(PreconditionError):
    """The star-projection anchor violates the dominance or box constraints."""


class NonFiniteObjectiveError(ReshapingError, ArithmeticError):
    """The objective returned NaN or an infinity."""

    def __init__(self, message: str, point: Optional[np.ndarray] = None):
        if point is not None:
            point = np.array(point, dtype=float)
            message = f"{message} at x={np.array2string(point, precision=6)}"
        super().__init__(message)
        self.point = point


class DatasetError(ReshapingError):
    """A return file could not be parsed."""

    exit_code = 3

    def __init__(self, message: str, row: Optional[int] = None, column: Optional[str] = None):
        location = []
        if row is not None:
            location.append(f"row {row}")
        if column is not None:
            location.append(f"column '{column}'")
        if location:
            message = f"{message} ({', '.join(location)})"
        super().__init__(message)
        self.row = row
        self.column = column


class BudgetExhaustedError(ReshapingError):
    """The solver stopped on its budget without a feasible incumbent."""

    exit_code = 4

    def __init__(self, message: str, report_path: Optional[str] = None):
        super().__init__(message)
        self.report_path = report_path

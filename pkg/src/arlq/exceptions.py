"""Exception hierarchy shared by the estimators, inference and CLI."""

from __future__ import annotations


class ArlqError(Exception):
    """Base class for all errors raised by :mod:`arlq`."""


class DimensionError(ArlqError, ValueError):
    """Array shapes are inconsistent with the model."""


class DomainError(ArlqError, ValueError):
    """An argument lies outside the domain of a function (e.g. sigma2 <= 0)."""


class SingularityError(ArlqError, ArithmeticError):
    """A linear system in an update step is (numerically) singular.

    Attributes
    ----------
    condition_number : float
        2-norm condition number of the offending matrix.
    iteration : int or None
        Iteration of the fitting loop in which the failure happened.
    """

    def __init__(self, message: str, condition_number: float = float("inf"),
                 iteration: int | None = None):
        self.condition_number = condition_number
        self.iteration = iteration
        if iteration is not None:
            message = f"{message} (iteration {iteration})"
        super().__init__(message)


class DegenerateWeightsError(ArlqError, ArithmeticError):
    """All observation weights vanished, so no weighted update is defined."""

    def __init__(self, message: str, iteration: int | None = None):
        self.iteration = iteration
        if iteration is not None:
            message = f"{message} (iteration {iteration})"
        super().__init__(message)


class InferenceUnavailableError(ArlqError, ArithmeticError):
    """The Jacobian of the estimating equations cannot be inverted."""

    def __init__(self, message: str, condition_number: float = float("inf")):
        self.condition_number = condition_number
        super().__init__(message)


class NoValidQError(ArlqError, RuntimeError):
    """Every point of a q grid failed to produce a usable fit."""


class ConfigError(ArlqError, ValueError):
    """A configuration field is missing or invalid.

    Attributes
    ----------
    field : str
        Dotted name of the offending field.
    """

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class ParseError(ArlqError, ValueError):
    """Input file could not be parsed; carries the row/column coordinates."""

    def __init__(self, message: str, row: int | None = None,
                 column: str | None = None):
        self.row = row
        self.column = column
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        if where:
            message = f"{message} at {', '.join(where)}"
        super().__init__(message)

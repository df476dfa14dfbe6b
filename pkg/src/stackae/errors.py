"""Exception hierarchy.

Three families map onto the CLI exit codes: ``ConfigError`` (usage, 1),
``DataError`` (bad input data, 2) and ``TrainingError`` (runtime failure, 3).
"""
from __future__ import annotations


class StackAEError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(StackAEError, ValueError):
    """Invalid configuration or argument combination."""


class DataError(StackAEError, ValueError):
    """Input data violates a precondition."""


class TrainingError(StackAEError, RuntimeError):
    """Numerical failure during fitting."""


class MissingFile(DataError, FileNotFoundError):
    pass


class MalformedRow(DataError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line


class MissingValue(MalformedRow):
    pass


class UnknownLabelColumn(DataError):
    pass


class SingleClass(DataError):
    pass


class ConstantFeature(DataError):
    def __init__(self, index: int):
        super().__init__(f"feature {index} is constant")
        self.index = index


class DimensionMismatch(DataError):
    pass


class LengthMismatch(DataError):
    pass


class BadFoldCount(ConfigError):
    pass


class BadSpec(ConfigError):
    pass


class BadK(ConfigError):
    pass


class EmptyList(DataError):
    pass


class EmptyTable(DataError):
    pass


class DegenerateData(DataError):
    pass


class NonFiniteObjective(TrainingError):
    pass


class NonFiniteLoss(TrainingError):
    pass


class LineSearchFail(TrainingError):
    def __init__(self, message: str, nfev: int = 0):
        super().__init__(message)
        self.nfev = nfev


class DescentViolation(TrainingError, ValueError):
    """Line search called along a direction that is not a descent direction."""

"""Exception types raised across the package."""


class DgganError(Exception):
    """Base class for all package errors."""


class ShapeError(DgganError, ValueError):
    pass


class NumericError(DgganError, ArithmeticError):
    pass


class ParseError(DgganError, ValueError):
    pass


class PreparationError(DgganError, ValueError):
    pass


class ImputationError(PreparationError):
    pass


class ColumnTypeError(DgganError, TypeError):
    pass


class FitError(DgganError, ValueError):
    pass


class EncodeError(DgganError, ValueError):
    pass


class DecodeError(DgganError, ValueError):
    pass


class ScheduleError(DgganError, ValueError):
    pass


class CheckpointFormatError(DgganError, ValueError):
    pass


class MetricError(DgganError, ValueError):
    pass


class EvaluationError(DgganError, ValueError):
    pass


class ConfigError(DgganError, ValueError):
    pass

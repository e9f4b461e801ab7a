"""Exception types shared across the package."""


class DSPNetError(Exception):
    """Base class for all package errors."""


class DimensionError(DSPNetError, ValueError):
    """Operand extents do not agree."""


class ShapeError(DimensionError):
    """A tensor has the wrong rank or shape for the requested operation."""


class NumericError(DSPNetError, ArithmeticError):
    """A NaN or infinity appeared where only finite values are allowed."""


class ArgumentError(DSPNetError, ValueError):
    """An argument is outside its valid domain."""


class ConfigError(DSPNetError, ValueError):
    """A run configuration or checkpoint is inconsistent."""


class FormatError(DSPNetError, ValueError):
    """A binary file does not follow the expected layout."""

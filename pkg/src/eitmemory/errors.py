"""Exception types shared across the package."""


class EITMemoryError(Exception):
    """Base class for all package errors.

    ``stage`` is set when the error escaped a named step of a run sequence.
    """

    stage = None


class ConfigError(EITMemoryError, ValueError):
    """Invalid or inconsistent configuration.

    ``path`` names the offending configuration field (dotted path) when known.
    """

    def __init__(self, message, path=None):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class NumericsError(EITMemoryError, ArithmeticError):
    """Integration diverged or a numerical precondition was violated."""


class SaturationError(EITMemoryError):
    """Too many ADC samples clipped at full scale."""


class UndefinedMetricError(EITMemoryError, ValueError):
    """A statistic is undefined for the given data (e.g. zero input SNR)."""

"""Exception hierarchy shared by all analysis stages."""


class SmktError(Exception):
    """Base class for every error raised by the package."""


class DomainError(SmktError, ValueError):
    pass


class LengthError(SmktError, ValueError):
    pass


class DegenerateSeriesError(SmktError, ValueError):
    """Zero variance (or zero volatility moment); the series cannot be normalized."""


class AlignmentError(SmktError, ValueError):
    pass


class RegimeError(SmktError, ValueError):
    """Parameters outside the regime where the random-matrix formulas hold (Q < 1)."""


class NumericalError(SmktError, ArithmeticError):
    pass


class FitError(SmktError, RuntimeError):
    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class UndefinedResult(SmktError, ArithmeticError):
    """A ratio whose denominator vanished. Carries the inputs for the caller."""

    def __init__(self, message, **inputs):
        super().__init__(message)
        self.inputs = inputs


class PoolingError(SmktError, ValueError):
    pass


class SamplingError(SmktError, ValueError):
    pass


class UnknownTickerError(SmktError, KeyError):
    pass


class AxisError(SmktError, ValueError):
    pass


class SplitError(SmktError, ValueError):
    pass


class ParseError(SmktError, ValueError):
    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class IntegrityError(SmktError, ValueError):
    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class ConfigError(SmktError, ValueError):
    pass

"""Exception hierarchy shared by every module."""


class WaveSSMError(Exception):
    """Base class for domain errors (the CLI maps these to exit code 1)."""


class DimensionError(WaveSSMError, ValueError):
    pass


class SingularModulusError(WaveSSMError, ArithmeticError):
    """A propagated state component has zero modulus, so its log is undefined."""


class DivergenceError(WaveSSMError, ArithmeticError):
    pass


class FitError(WaveSSMError):
    pass


class UnsupportedTaskError(WaveSSMError):
    pass


class DegenerateMarginError(WaveSSMError, ZeroDivisionError):
    pass


class ParseError(WaveSSMError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class SchemaError(WaveSSMError, ValueError):
    pass

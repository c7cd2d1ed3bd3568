class ParameterError(ValueError):
    """An argument is outside the domain an operation accepts."""


class DataError(ValueError):
    """Input data (manifest, logits file, predictions) is malformed.

    ``line`` is the 1-based line number in the offending file when known.
    """

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class NumericalError(ArithmeticError):
    """Training produced a non-finite loss."""

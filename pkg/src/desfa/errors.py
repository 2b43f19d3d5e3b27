class ValidationError(ValueError):
    """Invalid argument, configuration or dataset content."""


class ParseError(ValidationError):
    """Malformed input file; ``line`` is 1-based."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class InvariantError(AssertionError):
    """A cross-module invariant (e.g. oracle dominance) was violated."""

"""Exception types shared across the package."""


class InvalidParameter(ValueError):
    """A constructor or operation received a parameter outside its domain."""


class DomainError(ValueError):
    """An evaluation point lies outside the time interval of a profile."""


class InsufficientData(ValueError):
    """Too few samples to fit or verify a scaling law."""


class DegenerateTransform(ArithmeticError):
    """The eigenvector matrix H(t) became singular on the evaluation grid."""


class ConfigError(ValueError):
    """Malformed experiment configuration; carries the offending line number."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)

"""Exception types shared across the package.

The CLI maps ConfigError to exit code 2 and everything else to 1.
"""


class ConfigError(ValueError):
    """A run configuration violates a validity constraint."""


class ContractViolationError(ValueError):
    """An input breaks a documented precondition (e.g. non-Hermitian state)."""


class InsufficientDataError(ValueError):
    """Not enough events to form the requested estimate."""


class PartialResultError(RuntimeError):
    """A multi-point analysis failed at some points; carries the failures."""

    def __init__(self, message: str, failures: list):
        super().__init__(message)
        self.failures = failures

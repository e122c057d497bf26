"""Exception types shared across the package.

The CLI maps these onto exit codes: ``ConfigError`` -> 2,
``StateSpaceTooLarge`` -> 3, ``InvariantViolation`` -> 4.
"""


class ConfigError(ValueError):
    """Invalid configuration value or malformed config document."""

    def __init__(self, message, lineno=None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class IndexOverflowError(ConfigError):
    """The configuration count does not fit in a signed 64-bit index."""


class StateSpaceTooLarge(RuntimeError):
    """A dense vector over the requested state space would exceed the cap."""

    def __init__(self, size, cap, configuration_count=None):
        self.size = size
        self.cap = cap
        self.configuration_count = configuration_count
        msg = f"state space of {size} states exceeds the dense cap of {cap}"
        if configuration_count is not None:
            msg += f" (single-time configuration count (2L+1)^(M*N) = {configuration_count})"
        super().__init__(msg)


class InvariantViolation(AssertionError):
    """A runtime invariant (normalization, symmetry, ...) was broken."""

"""Exception types shared across the package."""


class PulsejetError(Exception):
    """Base class for all package errors."""


class DomainError(PulsejetError, ValueError):
    """An argument lies outside the domain of an operation."""


class ConfigurationError(PulsejetError, ValueError):
    """A parameter set or schedule violates its invariants."""


class IdentificationError(PulsejetError):
    """Drag identification could not find a terminal plateau."""

    def __init__(self, message, final_relative_slope=None):
        super().__init__(message)
        self.final_relative_slope = final_relative_slope


class IntegrationFault(PulsejetError):
    """The integrator produced a non-finite state."""

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class TraceParseError(PulsejetError, ValueError):
    """A trace file could not be parsed."""

    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class RangeError(PulsejetError, ValueError):
    """A query lies beyond the extent of the data."""

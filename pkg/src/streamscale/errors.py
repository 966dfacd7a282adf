"""Exception types shared across the package."""


class StreamScaleError(Exception):
    """Base class for all package errors."""


class ConfigError(StreamScaleError):
    """Bad user input: unknown scenario, malformed config file, invalid flag."""


class GraphValidationError(StreamScaleError):
    """A query graph violates its structural invariants."""

    def __init__(self, violations: list[str]):
        self.violations = violations
        super().__init__("; ".join(violations))


class InvalidLevelError(StreamScaleError):
    """Memory level outside the scheme's valid range."""


class InsufficientMemoryError(StreamScaleError):
    """Managed memory total too small to split into MemTable and cache."""


class ModelError(StreamScaleError):
    """State-backend model invoked with inconsistent arguments."""


class TrueRateError(StreamScaleError):
    """Per-task true rate is undefined (zero busyness with nonzero throughput)."""


class UnsatisfiableDemandError(StreamScaleError):
    """A single task demand exceeds the task manager budget."""


class CapacityExhaustedError(StreamScaleError):
    """Packing would require more task managers than the provisioning limit."""


class ReconfigurationError(StreamScaleError):
    """A new configuration could not be enacted (placement failed)."""

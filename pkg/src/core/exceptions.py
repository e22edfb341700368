"""Custom exceptions for avsearch."""

from typing import Optional


class AvSearchError(Exception):
    """Base exception for all simulation errors."""

    pass


class ConfigurationError(AvSearchError):
    """Raised when configuration is invalid or missing."""

    pass


class GeometryError(AvSearchError, ValueError):
    """Raised for non-finite angles, zero ranges and malformed grids."""

    pass


class MapGenerationError(AvSearchError):
    """Raised when a map condition cannot be satisfied."""

    def __init__(self, message: str, attempts: Optional[int] = None) -> None:
        """Initialize MapGenerationError.

        Args:
            message: Error message
            attempts: Number of sampling attempts spent, if any
        """
        self.attempts = attempts
        super().__init__(message)


class MapValidationError(AvSearchError):
    """Raised when a loaded map violates a scene invariant."""

    def __init__(self, path: str, reason: str) -> None:
        """Initialize MapValidationError.

        Args:
            path: Path of the offending map file
            reason: Validation failure description
        """
        self.path = path
        self.reason = reason
        super().__init__(f"Invalid map file '{path}': {reason}")


class BeliefError(AvSearchError):
    """Raised when belief maps are combined or transformed inconsistently."""

    pass


class EpisodeError(AvSearchError):
    """Raised when the environment is driven outside its contract."""

    pass


class BridgeError(AvSearchError):
    """Raised for malformed or out-of-order bridge requests."""

    def __init__(self, message: str, error_type: str = "bad_request") -> None:
        """Initialize BridgeError.

        Args:
            message: Error message
            error_type: Short machine-readable error category
        """
        self.error_type = error_type
        super().__init__(message)


class ExperimentError(AvSearchError):
    """Raised when an experiment cannot be run or aggregated."""

    pass


class CheckFailedError(AvSearchError):
    """Raised by a selftest check whose invariant does not hold."""

    pass

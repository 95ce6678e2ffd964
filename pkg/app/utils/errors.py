"""Exception hierarchy shared by all toolkit modules.

Library code raises these; only `app.cli.runner` turns them into exit codes.
"""
from __future__ import annotations


class ToolkitError(Exception):
    """Root of every error raised on purpose by the toolkit."""


class ConfigError(ToolkitError, ValueError):
    """Raised when an experiment configuration cannot be parsed or validated."""

    def __init__(self, message: str, line: int | None = None) -> None:
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(f"{prefix}{message}")


class PreconditionError(ToolkitError, ValueError):
    """Raised when an experiment is refused because a hypothesis does not hold."""


class SimplexError(ToolkitError, ValueError):
    """Raised for coordinates that cannot be read as a point of the simplex."""


class ModelError(ToolkitError, ValueError):
    """Raised for malformed models, rate tables, or unknown presets."""


class InsufficientDataError(ToolkitError, ValueError):
    """Raised when a statistic is requested on too few samples."""


class NumericalError(ToolkitError, RuntimeError):
    """Base class for failures of a numerical procedure."""


class FlowError(NumericalError):
    """Raised when the deterministic flow produces non-finite values."""


class AttractorError(NumericalError):
    """Raised when a candidate set cannot be certified as an attractor."""


class SimulationError(NumericalError):
    """Raised when a simulated path leaves the finite range."""

    def __init__(self, message: str, step: int | None = None, stream: int | None = None) -> None:
        self.step = step
        self.stream = stream
        details = []
        if step is not None:
            details.append(f"step={step}")
        if stream is not None:
            details.append(f"stream={stream}")
        suffix = f" ({', '.join(details)})" if details else ""
        super().__init__(f"{message}{suffix}")


class QsdError(NumericalError):
    """Raised when a quasi-stationary estimator cannot produce an estimate."""


class SpectralError(NumericalError):
    """Raised when the 1D eigenvalue solver fails to find the principal mode."""

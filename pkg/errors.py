"""
Error types for the BaZi persona engine.

Every failure the tool reports to a user derives from BaziError; the CLI
maps these to exit codes and itemized messages on stderr.
"""

from typing import Any, Dict, List, Optional


class BaziError(Exception):
    """Base class for all expected failures."""

    exit_code = 1

    def details(self) -> List[str]:
        """Itemized lines for stderr."""
        return [str(self)]


class InputValidationError(BaziError):
    """A civil date, offset, coordinate or option is invalid."""

    def __init__(self, message: str, field: Optional[str] = None):
        super().__init__(message)
        self.field = field

    def details(self) -> List[str]:
        if self.field:
            return [f"{self.field}: {self}"]
        return [str(self)]


class OutOfWindowError(InputValidationError):
    """Input falls outside the supported 1900-2100 calendar window."""


class NumericalError(BaziError):
    """An iterative solver failed to converge."""


class ConfigurationError(BaziError):
    """Bad configuration, unknown template version or rejected credentials."""


class ChartBuildError(BaziError):
    """Wraps an upstream failure with the pipeline stage it happened in."""

    def __init__(self, stage: str, cause: BaziError):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause

    def details(self) -> List[str]:
        return [f"stage={self.stage}: {line}" for line in self.cause.details()]


class TransportError(BaziError):
    """Retries against a provider were exhausted."""

    def __init__(self, message: str, attempts: Optional[List[Dict[str, Any]]] = None):
        super().__init__(message)
        self.attempts = attempts or []

    def details(self) -> List[str]:
        lines = [str(self)]
        for attempt in self.attempts:
            lines.append(f"  attempt {attempt.get('attempt')}: {attempt.get('error')}")
        return lines


class CacheIntegrityError(BaziError):
    """A cache entry is truncated, undecodable or fails its checksum."""


class DatasetError(BaziError):
    """Dataset file violates the schema; carries one issue per record path."""

    def __init__(self, message: str, issues: Optional[List[str]] = None):
        super().__init__(message)
        self.issues = issues or []

    def details(self) -> List[str]:
        return [str(self)] + [f"  {issue}" for issue in self.issues]


class DerangementError(BaziError):
    """A derangement needs at least two records."""


class UndefinedBaselineError(BaziError):
    """Relative change against a zero baseline."""

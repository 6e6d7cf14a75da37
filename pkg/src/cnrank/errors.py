"""Exception taxonomy shared across the toolkit.

Exceptions are grouped into four classes so the CLI can map them to
distinct exit codes: configuration, data, network, and run-health.
"""

from __future__ import annotations


class CnRankError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(CnRankError):
    """Invalid or incomplete run configuration."""


class DataError(CnRankError):
    """Invalid, missing, or inconsistent data artifacts."""


class NetworkError(CnRankError):
    """Transport failure talking to a remote endpoint."""


class HealthError(CnRankError):
    """A run-health threshold was exceeded (e.g. judge parse failures)."""


class SchemaError(DataError):
    """A record does not match its declared schema."""

    def __init__(self, message: str, *, field: str | None = None, line: int | None = None):
        self.field = field
        self.line = line
        where = []
        if field is not None:
            where.append(f"field={field!r}")
        if line is not None:
            where.append(f"line={line}")
        suffix = f" ({', '.join(where)})" if where else ""
        super().__init__(message + suffix)


class EmptyDatasetError(DataError):
    """Dataset contains no records."""


class TemplateNotFoundError(ConfigError):
    """No prompt template registered for the requested family."""


class GenerationError(NetworkError):
    """Generation failed after bounded retries."""

    def __init__(self, message: str, attempts: int = 0):
        self.attempts = attempts
        super().__init__(f"{message} (attempts={attempts})" if attempts else message)


class MissingReferenceError(DataError):
    """No reference counter-narrative exists for the requested instance."""


class PlanError(DataError):
    """A tournament plan cannot be built from the available candidates."""

    def __init__(self, message: str, missing: list[tuple[str, str]] | None = None):
        self.missing = missing or []
        super().__init__(message)


class EmptyScoreboardError(DataError):
    """Scoring was requested over an empty verdict set."""


class UndefinedMetricError(DataError):
    """A metric is undefined for the given input (e.g. corpus too short)."""


class UndefinedCorrelationError(DataError):
    """Correlation is undefined (zero variance or too few points)."""


class UndefinedKappaError(DataError):
    """Cohen's kappa is undefined (chance agreement equals 1)."""


class StoreError(DataError):
    """Persistence layer failure."""


class DuplicateKeyError(StoreError):
    """An append would violate a stream's unique-key constraint."""


class MissingStreamError(StoreError):
    """The requested artifact stream does not exist."""

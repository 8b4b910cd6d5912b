"""Exception taxonomy shared across the package.

Every error raised on a contract boundary derives from AdforecastError so
callers (CLI, HTTP service) can map failures to diagnostics uniformly.
"""

from __future__ import annotations


class AdforecastError(Exception):
    """Base class for all package-level errors."""


class ConfigError(AdforecastError):
    """Degenerate or inconsistent generator/training configuration."""


class ParseError(AdforecastError):
    """A log line could not be parsed; message names file and line number."""


class SchemaError(AdforecastError):
    """A parsed record is missing a field or has a wrong type."""


class RecordInvariantError(AdforecastError):
    """A record violates a log invariant (e.g. second price above first)."""


class CriteriaError(AdforecastError):
    """Invalid campaign criteria. Carries the offending field for 4xx bodies."""

    def __init__(self, field: str, reason: str):
        self.field = field
        self.reason = reason
        super().__init__(f"{field}: {reason}")


class DataIntegrityError(AdforecastError):
    """Cross-log inconsistency, e.g. a matched auction without URF scores."""


class DegenerateLabelsError(AdforecastError):
    """Training labels contain a single class."""


class UndefinedMetricError(AdforecastError):
    """Metric undefined for the given inputs (single class, all-zero truth)."""


class EncodingError(AdforecastError):
    """A categorical value cannot be encoded into a fixed one-hot group."""


class UnknownIdError(AdforecastError):
    """An entity id is absent from the world."""

"""Exception hierarchy.

Every error raised by the package derives from ``RepoVitalsError``. The two
middle classes map onto CLI exit codes: ``DataError`` (exit 2) for problems
with local inputs, ``UpstreamError`` (exit 3) for the hosting platform API.
"""

from __future__ import annotations


class RepoVitalsError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class DataError(RepoVitalsError, ValueError):
    exit_code = 2


class UpstreamError(RepoVitalsError):
    exit_code = 3


# ingest
class MalformedError(DataError):
    """A snapshot or API payload violates the data contract."""


class StorageError(DataError, OSError):
    """Reading or writing snapshot/corpus files failed."""


class NotFoundError(UpstreamError):
    """Repository is absent or private."""


class RateLimitedError(UpstreamError):
    """API rate budget exhausted after the allowed retries."""


class TransportError(UpstreamError):
    """Network failure talking to the API."""


# features
class InsufficientHistory(DataError):
    """Commit history is shorter than the scenario window."""


class InvalidScenario(DataError):
    pass


# prune / stats
class TooFewRows(DataError):
    pass


class ColumnMismatch(DataError):
    pass


class EmptySample(DataError):
    pass


class LengthMismatch(DataError):
    pass


class ZeroVariance(DataError):
    pass


# forest / evaluate
class EmptyDataset(DataError):
    pass


class SingleClass(DataError):
    pass


class NoOobRows(DataError):
    pass


class TooFewPerClass(DataError):
    pass


class ModelError(DataError):
    """Model file unreadable or of an unknown schema."""


class NoModel(ModelError):
    """No trained model is available."""


# lma / survival / synth
class UnmaintainedProject(DataError):
    """LMA is undefined for projects classified as unmaintained."""


class NoCommits(DataError):
    pass


class TooFewGroups(DataError):
    pass


class InvalidConfig(DataError):
    pass

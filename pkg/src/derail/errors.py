"""Exception types shared across the pipeline.

Errors deriving from :class:`InputError` describe bad input data or
configuration; the CLI maps them to exit code 2. Everything else derived
from :class:`DerailError` is a runtime failure (exit code 1).
"""

from __future__ import annotations


class DerailError(Exception):
    """Base class for all pipeline errors."""


class InputError(DerailError):
    """Invalid input data or configuration."""


class MalformedJson(InputError):
    pass


class SchemaViolation(InputError):
    def __init__(self, field: str, reason: str):
        super().__init__(f"{field}: {reason}")
        self.field = field
        self.reason = reason


class EmptyTranscript(InputError):
    pass


class EmptyCorpus(InputError):
    pass


class NoMatchingSpeaker(InputError):
    pass


class MissingSpeaker(InputError):
    """Speaker tags are present but no participant tag was configured."""


class DimensionMismatch(InputError):
    pass


class MissingIndex(InputError):
    def __init__(self, index: int, transcript_id: str | None = None):
        where = f" for {transcript_id}" if transcript_id else ""
        super().__init__(f"missing embedding index {index}{where}")
        self.index = index


class ZeroVector(InputError):
    def __init__(self, index: int | None = None):
        super().__init__(f"all-zero vector at index {index}" if index is not None else "all-zero vector")
        self.index = index


class MissingEmbeddings(InputError):
    pass


class RecordMismatch(InputError):
    pass


class LengthMismatch(InputError):
    pass


class OutOfRange(InputError):
    pass


class InvalidConfig(InputError):
    pass


class MissingGroup(InputError):
    pass


class EmptyReference(InputError):
    pass


class NonFiniteInput(InputError):
    pass


class TooFewSentences(DerailError):
    def __init__(self, strategy: str, n: int):
        super().__init__(f"{strategy} coherence needs more sentences (got {n})")
        self.strategy = strategy
        self.n = n


class ZeroCentroid(DerailError):
    pass


class EmptySeries(DerailError):
    pass


class TooFewPairs(DerailError):
    pass


class DegenerateRanks(TooFewPairs):
    """Rank correlation undefined because one side has no rank variance."""


class ZeroMean(DerailError):
    pass


class TooFewValues(DerailError):
    pass


class TooFewRecords(DerailError):
    pass


class SingleClass(DerailError):
    pass


class AllZeroDifferences(DerailError):
    pass


class Transport(DerailError):
    pass


class ProtocolViolation(DerailError):
    pass


class FoldError(DerailError):
    def __init__(self, fold: int, cause: Exception):
        super().__init__(f"fold {fold}: {cause}")
        self.fold = fold
        self.cause = cause


class IterationLimit(UserWarning):
    """SMO stopped at max_iter before meeting the tolerance."""

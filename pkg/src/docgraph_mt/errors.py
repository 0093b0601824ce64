"""Exception hierarchy shared across the pipeline."""

from __future__ import annotations


class DocGraphError(Exception):
    """Base class for every error raised by this package."""


# --- LLM gateway ---------------------------------------------------------


class LLMError(DocGraphError):
    pass


class TransportError(LLMError):
    """Network or HTTP failure talking to a live backend."""

    def __init__(self, message: str, *, retriable: bool = True):
        super().__init__(message)
        self.retriable = retriable


class BackendRefusal(LLMError):
    """The backend produced no usable text."""


class StructureError(LLMError):
    """A structured response could not be parsed or validated."""

    def __init__(self, message: str, raw_text: str | None = None):
        super().__init__(message)
        self.raw_text = raw_text


class FixtureError(DocGraphError):
    """A scripted mock fixture file is malformed."""


# --- chunking / graph ----------------------------------------------------


class EmptyDocument(DocGraphError, ValueError):
    pass


class CoverageError(StructureError):
    """A chunk proposal omits or duplicates a sentence."""


class UnknownLabel(StructureError):
    """A relation label cannot be mapped to the schema."""


class ChunkCountMismatch(DocGraphError, ValueError):
    pass


# --- translation ---------------------------------------------------------


class TranslationError(DocGraphError):
    def __init__(self, message: str, chunk_id: int | None = None):
        super().__init__(message)
        self.chunk_id = chunk_id


# --- metrics ---------------------------------------------------------------


class MetricError(DocGraphError, ValueError):
    pass


class EmptyReference(MetricError):
    pass


class NoTerms(MetricError):
    pass


class PartitionMismatch(MetricError):
    pass


class ParseError(MetricError):
    pass


class UnknownDocument(MetricError):
    pass


# --- cohesion ----------------------------------------------------------------


class AnnotationError(DocGraphError, ValueError):
    pass


class MalformedSpan(AnnotationError):
    pass


class InvalidAttribute(AnnotationError):
    pass


class MissingEvalAttrs(AnnotationError):
    pass


class EmptySpanList(AnnotationError):
    pass


# --- runner ------------------------------------------------------------------


class ManifestError(DocGraphError):
    pass


class DuplicateId(ManifestError):
    pass


class CollectionMismatch(DocGraphError):
    pass

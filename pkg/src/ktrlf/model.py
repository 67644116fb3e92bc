"""Core domain types and text normalization rules.

Offsets throughout the package are 0-based Unicode code point positions
(``len(str)`` semantics), with exclusive ends, so spans survive any byte
encoding and can be applied verbatim by UI clients.
"""
from __future__ import annotations

from dataclasses import dataclass


def normalize_mention(text: str) -> str:
    """Canonical form used for string matching: lowercase, trim, collapse whitespace.

    Idempotent; empty input yields empty output.
    """
    return " ".join(text.lower().split())


def _lower_char(ch: str) -> str:
    low = ch.lower()
    # A handful of code points lowercase to multiple characters; keep the
    # original there so offsets stay aligned with the source text.
    return low if len(low) == 1 else ch


def lowercase_aligned(text: str) -> str:
    """Per-character lowercase that preserves string length (offset-safe)."""
    return "".join(_lower_char(ch) for ch in text)


@dataclass(frozen=True, order=True)
class Span:
    """Half-open character range [start, end) into a document."""

    start: int
    end: int

    def __post_init__(self) -> None:
        if not (0 <= self.start < self.end):
            raise ValueError(f"invalid span [{self.start}, {self.end})")

    @property
    def length(self) -> int:
        return self.end - self.start

    def within(self, char_count: int) -> bool:
        return self.end <= char_count

    def overlaps(self, other: "Span") -> bool:
        return self.start < other.end and other.start < self.end


@dataclass(frozen=True)
class Document:
    doc_id: str
    text: str

    def __post_init__(self) -> None:
        if not self.doc_id:
            raise ValueError("doc_id must be non-empty")
        if not self.text:
            raise ValueError("document text must be non-empty")

    @property
    def char_count(self) -> int:
        return len(self.text)

    def slice(self, span: Span) -> str:
        return self.text[span.start : span.end]


@dataclass(frozen=True)
class Mention:
    """A concrete entity occurrence in a document."""

    span: Span
    surface: str
    entity_id: str
    link_confidence: float = 1.0

    def __post_init__(self) -> None:
        if not self.entity_id:
            raise ValueError("entity_id must be non-empty")
        if not (0.0 <= self.link_confidence <= 1.0):
            raise ValueError(f"link_confidence {self.link_confidence} outside [0, 1]")

    def validate_against(self, document: Document) -> None:
        if not self.span.within(document.char_count):
            raise ValueError(
                f"mention span [{self.span.start},{self.span.end}) exceeds "
                f"document {document.doc_id!r} length {document.char_count}"
            )
        actual = document.slice(self.span)
        if actual != self.surface:
            raise ValueError(
                f"mention surface {self.surface!r} != document text {actual!r} "
                f"at [{self.span.start},{self.span.end})"
            )


@dataclass(frozen=True)
class KnowledgeRecord:
    """External knowledge text for one entity. An empty description is legal
    and makes the entity behave as if no outside knowledge existed."""

    entity_id: str
    title: str
    description: str = ""


@dataclass(frozen=True)
class GoldMention:
    text: str
    span: Span | None = None


@dataclass(frozen=True)
class QuerySample:
    qid: str
    doc_id: str
    query: str
    gold_mentions: tuple[GoldMention, ...] = ()
    gold_entities: tuple[str, ...] = ()


@dataclass(frozen=True)
class Prediction:
    text: str
    span: Span | None = None
    score: float | None = None


@dataclass(frozen=True)
class PredictionList:
    """Ranked predictions for one query; list order is the ranking."""

    qid: str
    ranked: tuple[Prediction, ...] = ()

    def __post_init__(self) -> None:
        scores = [p.score for p in self.ranked if p.score is not None]
        for a, b in zip(scores, scores[1:]):
            if b > a:
                raise ValueError(f"prediction scores for {self.qid!r} are not non-increasing")

    @property
    def texts(self) -> list[str]:
        return [p.text for p in self.ranked]


def find_occurrences(text: str, target: str) -> list[Span]:
    """All case-insensitive, non-overlapping occurrences of ``target``, in document order."""
    needle = lowercase_aligned(target)
    if not needle:
        return []
    haystack = lowercase_aligned(text)
    spans: list[Span] = []
    pos = 0
    while True:
        hit = haystack.find(needle, pos)
        if hit < 0:
            break
        spans.append(Span(hit, hit + len(needle)))
        pos = hit + len(needle)
    return spans

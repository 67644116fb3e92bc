"""Embedding providers and the three encoding procedures.

A provider turns text into per-token vectors of dimension ``d`` and a query
into a (start, end) vector pair. On top of that contract this module builds:

* phrase vectors: the span's first and last token vectors concatenated
  (dimension 2d; a single-token span repeats its vector),
* query vectors: the provider's start/end pair concatenated,
* knowledge vectors: the entity title and its description are encoded as one
  string and the boundary tokens of the title slice are concatenated, so
  knowledge and phrase vectors live in the same 2d space and can be added.

The reference provider is a deterministic character-trigram hashing encoder:
no weights, bit-identical across platforms, so the full pipeline is testable
offline. All vectors are float32.
"""
from __future__ import annotations

import hashlib
import json
import math
import unicodedata
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

import httpx
import numpy as np

from .errors import EncodingError, ProtocolError, TransportError
from .linking import read_cache_entry, write_cache_entry
from .model import Document, KnowledgeRecord, Span, normalize_mention

_MASK64 = (1 << 64) - 1
_FNV_PRIME = 0x100000001B3

DEFAULT_DIM = 64
# Arbitrary but fixed: distinct seeds give the start/end spaces distinct bases.
DEFAULT_SEED_START = 0xCBF29CE484222325
DEFAULT_SEED_END = 0x9E3779B97F4A7C15

KNOWLEDGE_SEPARATOR = "[SEP]"


@dataclass(frozen=True)
class TokenizedText:
    """Tokens plus their character spans into the source text."""

    tokens: tuple[str, ...]
    char_spans: tuple[Span, ...]

    def __len__(self) -> int:
        return len(self.tokens)


def _is_punctuation(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def tokenize_with_spans(text: str) -> TokenizedText:
    """Split on Unicode whitespace and strip punctuation from token edges.

    Chunks that are punctuation-only disappear, so spans that cover nothing
    but punctuation resolve to zero tokens.
    """
    tokens: list[str] = []
    spans: list[Span] = []
    i, n = 0, len(text)
    while i < n:
        if text[i].isspace():
            i += 1
            continue
        j = i
        while j < n and not text[j].isspace():
            j += 1
        start, end = i, j
        while start < end and _is_punctuation(text[start]):
            start += 1
        while end > start and _is_punctuation(text[end - 1]):
            end -= 1
        if start < end:
            tokens.append(text[start:end])
            spans.append(Span(start, end))
        i = j
    return TokenizedText(tokens=tuple(tokens), char_spans=tuple(spans))


def _fnv1a64(data: bytes, seed: int) -> int:
    h = seed & _MASK64
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & _MASK64
    return h


def hash_token_vector(token: str, d: int, seed: int) -> np.ndarray:
    """Signed character-trigram hash vector for one token, L2-normalized.

    The token is normalized (lowercased, trimmed) and padded with '^' and
    '$'; each trigram contributes +-1 at index FNV-1a-64(trigram) mod d, the
    sign taken from the hash's top bit. A token with no trigrams yields the
    all-zero vector.
    """
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    padded = f"^{normalize_mention(token)}$"
    vec = np.zeros(d, dtype=np.float64)
    for i in range(len(padded) - 2):
        h = _fnv1a64(padded[i : i + 3].encode("utf-8"), seed)
        vec[h % d] += 1.0 if (h >> 63) == 0 else -1.0
    norm = math.sqrt(float((vec * vec).sum()))
    if norm == 0.0:
        return vec.astype(np.float32)
    return (vec / norm).astype(np.float32)


def reference_embed_tokens(text: str, d: int, seed: int) -> tuple[TokenizedText, np.ndarray]:
    tokenized = tokenize_with_spans(text)
    if not tokenized.tokens:
        return tokenized, np.zeros((0, d), dtype=np.float32)
    matrix = np.stack([hash_token_vector(t, d, seed) for t in tokenized.tokens])
    return tokenized, matrix


def _pooled(vectors: np.ndarray, d: int) -> np.ndarray:
    """L2-normalized sum of token vectors, accumulated in float64 in token order."""
    acc = np.zeros(d, dtype=np.float64)
    for row in vectors:
        acc += row.astype(np.float64)
    norm = math.sqrt(math.fsum(float(x) * float(x) for x in acc))
    if norm == 0.0:
        return acc.astype(np.float32)
    return (acc / norm).astype(np.float32)


class EmbeddingProvider(Protocol):
    """Deterministic text encoder: same input, bit-identical output."""

    d: int
    name: str

    def embed_tokens(self, text: str) -> tuple[TokenizedText, np.ndarray]: ...

    def embed_query_pair(self, text: str) -> tuple[np.ndarray, np.ndarray]: ...


class ReferenceHashEmbedder:
    """Weight-free stand-in for a frozen neural encoder.

    Token vectors are context-free (a token embeds identically anywhere),
    which keeps every downstream computation reproducible from first
    principles.
    """

    def __init__(
        self,
        d: int = DEFAULT_DIM,
        seed_start: int = DEFAULT_SEED_START,
        seed_end: int = DEFAULT_SEED_END,
    ):
        if d < 1:
            raise ValueError(f"dimension must be >= 1, got {d}")
        self.d = d
        self.seed_start = seed_start & _MASK64
        self.seed_end = seed_end & _MASK64
        self.name = f"ref-hash-{d}"

    def embed_tokens(self, text: str) -> tuple[TokenizedText, np.ndarray]:
        return reference_embed_tokens(text, self.d, self.seed_start)

    def embed_query_pair(self, text: str) -> tuple[np.ndarray, np.ndarray]:
        tokenized = tokenize_with_spans(text)
        halves: list[np.ndarray] = []
        for seed in (self.seed_start, self.seed_end):
            if tokenized.tokens:
                vectors = np.stack([hash_token_vector(t, self.d, seed) for t in tokenized.tokens])
            else:
                vectors = np.zeros((0, self.d), dtype=np.float32)
            halves.append(_pooled(vectors, self.d))
        return halves[0], halves[1]


class RemoteEmbeddingProvider:
    """Client for an embedding service exposing the token/query endpoints.

    POST {endpoint}/embed_tokens {"texts": [str]} and
    POST {endpoint}/embed_query {"queries": [str]}. Responses may be cached
    on disk so warm-cache runs perform no network I/O.
    """

    def __init__(
        self,
        endpoint: str,
        d: int,
        *,
        cache_dir: str | Path | None = None,
        timeout: float = 30.0,
        transport: httpx.BaseTransport | None = None,
    ):
        if d < 1:
            raise ValueError(f"dimension must be >= 1, got {d}")
        self.endpoint = endpoint.rstrip("/")
        self.d = d
        self.name = f"remote-{d}"
        self.cache_dir = Path(cache_dir) if cache_dir else None
        self.timeout = timeout
        self._transport = transport

    def _cached_call(self, kind: str, path: str, body: dict, text: str) -> dict:
        key = hashlib.sha256(f"{kind}\x00{text}".encode("utf-8")).hexdigest()
        if self.cache_dir is not None:
            payload = read_cache_entry(self.cache_dir, key)
            if payload is not None:
                return payload
        try:
            with httpx.Client(transport=self._transport, timeout=self.timeout) as client:
                response = client.post(f"{self.endpoint}{path}", json=body)
                response.raise_for_status()
                payload = response.json()
        except (httpx.HTTPError, json.JSONDecodeError) as exc:
            raise TransportError(f"embedding request failed with no cache entry: {exc}") from exc
        if self.cache_dir is not None:
            write_cache_entry(self.cache_dir, key, payload)
        return payload

    def _check_dim(self, payload: dict) -> None:
        if payload.get("d") != self.d:
            raise ProtocolError(
                f"embedding response field d is {payload.get('d')!r}, expected {self.d}"
            )

    def embed_tokens(self, text: str) -> tuple[TokenizedText, np.ndarray]:
        payload = self._cached_call("tokens", "/embed_tokens", {"texts": [text]}, text)
        self._check_dim(payload)
        results = payload.get("results")
        if not isinstance(results, list) or len(results) != 1 or not isinstance(results[0], dict):
            raise ProtocolError("embedding response field results must be a one-element list")
        result = results[0]
        tokens = result.get("tokens")
        spans = result.get("spans")
        vectors = result.get("vectors")
        if not isinstance(tokens, list) or not isinstance(spans, list) or not isinstance(vectors, list):
            raise ProtocolError("embedding response fields tokens/spans/vectors must be lists")
        if not (len(tokens) == len(spans) == len(vectors)):
            raise ProtocolError("embedding response tokens/spans/vectors lengths differ")
        char_spans: list[Span] = []
        for i, pair in enumerate(spans):
            if (
                not isinstance(pair, list)
                or len(pair) != 2
                or not all(isinstance(x, int) and not isinstance(x, bool) for x in pair)
                or not (0 <= pair[0] < pair[1] <= len(text))
            ):
                raise ProtocolError(f"embedding response field spans[{i}] is not a valid span")
            char_spans.append(Span(pair[0], pair[1]))
        matrix = np.zeros((len(vectors), self.d), dtype=np.float32)
        for i, vec in enumerate(vectors):
            if not isinstance(vec, list) or len(vec) != self.d:
                raise ProtocolError(f"embedding response field vectors[{i}] has wrong length")
            matrix[i] = np.asarray(vec, dtype=np.float32)
        if not np.all(np.isfinite(matrix)):
            raise ProtocolError("embedding response contains non-finite vector values")
        return TokenizedText(tokens=tuple(str(t) for t in tokens), char_spans=tuple(char_spans)), matrix

    def embed_query_pair(self, text: str) -> tuple[np.ndarray, np.ndarray]:
        payload = self._cached_call("query", "/embed_query", {"queries": [text]}, text)
        self._check_dim(payload)
        results = payload.get("results")
        if not isinstance(results, list) or len(results) != 1 or not isinstance(results[0], dict):
            raise ProtocolError("embedding response field results must be a one-element list")
        halves: list[np.ndarray] = []
        for key in ("q_start", "q_end"):
            vec = results[0].get(key)
            if not isinstance(vec, list) or len(vec) != self.d:
                raise ProtocolError(f"embedding response field results[0].{key} has wrong length")
            arr = np.asarray(vec, dtype=np.float32)
            if not np.all(np.isfinite(arr)):
                raise ProtocolError(f"embedding response field results[0].{key} is non-finite")
            halves.append(arr)
        return halves[0], halves[1]


def tokens_in_span(tokenized: TokenizedText, span: Span) -> tuple[int, int] | None:
    """Indices of the first and last tokens overlapping ``span``, or None."""
    first = last = None
    for i, tok_span in enumerate(tokenized.char_spans):
        if tok_span.start < span.end and tok_span.end > span.start:
            if first is None:
                first = i
            last = i
        elif tok_span.start >= span.end:
            break
    if first is None or last is None:
        return None
    return first, last


def phrase_vector_from_tokens(
    tokenized: TokenizedText, token_vectors: np.ndarray, span: Span
) -> np.ndarray:
    located = tokens_in_span(tokenized, span)
    if located is None:
        raise EncodingError(f"span [{span.start},{span.end}) covers no tokens")
    first, last = located
    return np.concatenate([token_vectors[first], token_vectors[last]])


def encode_phrase(provider: EmbeddingProvider, document: Document, span: Span) -> np.ndarray:
    """Boundary-token phrase vector for a document span, dimension 2d."""
    if not span.within(document.char_count):
        raise ValueError(
            f"span [{span.start},{span.end}) exceeds document length {document.char_count}"
        )
    tokenized, vectors = provider.embed_tokens(document.text)
    return phrase_vector_from_tokens(tokenized, vectors, span)


def encode_query(provider: EmbeddingProvider, query: str) -> np.ndarray:
    """Concatenated start/end query vector, dimension 2d."""
    if not query.strip():
        raise ValueError("query must be non-empty")
    q_start, q_end = provider.embed_query_pair(query)
    return np.concatenate([q_start.astype(np.float32), q_end.astype(np.float32)])


def knowledge_text(record: KnowledgeRecord, separator: str = KNOWLEDGE_SEPARATOR) -> str:
    if not record.description:
        return record.title
    return f"{record.title} {separator} {record.description}"


def encode_knowledge(
    provider: EmbeddingProvider,
    record: KnowledgeRecord,
    separator: str = KNOWLEDGE_SEPARATOR,
) -> np.ndarray:
    """Knowledge vector: boundary tokens of the title inside title+description.

    Returns the all-zero 2d vector when the title yields no tokens, so missing
    or untokenizable knowledge degrades instead of failing.
    """
    if not record.title:
        raise ValueError(f"knowledge record {record.entity_id!r} has an empty title")
    text = knowledge_text(record, separator)
    tokenized, vectors = provider.embed_tokens(text)
    located = tokens_in_span(tokenized, Span(0, len(record.title)))
    if located is None:
        return np.zeros(2 * provider.d, dtype=np.float32)
    first, last = located
    return np.concatenate([vectors[first], vectors[last]])

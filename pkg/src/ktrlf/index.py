"""Per-document phrase index: fused vectors plus exact inner-product search.

The index is immutable once built. Search is exhaustive and exact: scores are
the correctly rounded float64 inner products (elementwise products summed with
``math.fsum``), which makes results bit-reproducible across platforms and
BLAS builds, so brute-force oracles can assert exact equality. Candidate
counts per document are small, so exactness costs nothing over approximate
structures.
"""
from __future__ import annotations

import math
import struct
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .embedding import (
    EmbeddingProvider,
    KNOWLEDGE_SEPARATOR,
    encode_knowledge,
    phrase_vector_from_tokens,
)
from .errors import IndexBuildError, IndexFormatError
from .knowledge import KnowledgeStore
from .model import Document, Mention, Span

MAGIC = b"KTRLF1"


class FusionMode(Enum):
    """Which addends form the indexed vector.

    BOTH adds the in-document phrase vector and the external knowledge
    vector; PHRASE_ONLY drops the knowledge addend; KNOWLEDGE_ONLY drops the
    phrase addend.
    """

    BOTH = "both"
    PHRASE_ONLY = "phrase-only"
    KNOWLEDGE_ONLY = "knowledge-only"


_MODE_CODES = {FusionMode.BOTH: 0, FusionMode.PHRASE_ONLY: 1, FusionMode.KNOWLEDGE_ONLY: 2}
_CODE_MODES = {v: k for k, v in _MODE_CODES.items()}


class ThresholdPolicy(Enum):
    MENTION_TOP_K = "mention"
    ENTITY_TOP_K = "entity"


DEFAULT_TOP_K = 4


@dataclass(frozen=True)
class SearchHit:
    mention: Mention
    score: float
    rank: int


@dataclass(frozen=True, eq=False)
class PhraseIndex:
    """Fused mention vectors for one document, in span order."""

    doc_id: str
    dims: int
    mentions: tuple[Mention, ...]
    matrix: np.ndarray  # (len(mentions), dims) float32, row i belongs to mentions[i]
    mode: FusionMode
    build_ms: float = 0.0
    _matrix64: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.matrix.shape != (len(self.mentions), self.dims):
            raise ValueError(
                f"matrix shape {self.matrix.shape} does not match "
                f"{len(self.mentions)} mentions x {self.dims} dims"
            )
        self.matrix.setflags(write=False)
        object.__setattr__(self, "_matrix64", self.matrix.astype(np.float64))
        self._matrix64.setflags(write=False)

    def __len__(self) -> int:
        return len(self.mentions)

    @property
    def entries(self) -> list[tuple[Mention, np.ndarray]]:
        return [(m, self.matrix[i]) for i, m in enumerate(self.mentions)]

    @property
    def entity_ids(self) -> set[str]:
        return {m.entity_id for m in self.mentions}


def build_index(
    document: Document,
    mentions: list[Mention],
    store: KnowledgeStore,
    provider: EmbeddingProvider,
    mode: FusionMode = FusionMode.BOTH,
    *,
    separator: str = KNOWLEDGE_SEPARATOR,
    normalize: bool = False,
) -> PhraseIndex:
    """Encode every mention and fuse it with its entity's knowledge vector.

    Knowledge vectors are computed once per distinct entity_id and shared by
    all of that entity's mentions. ``normalize=True`` L2-normalizes the fused
    vectors (off by default; scores are then cosines rather than raw inner
    products).
    """
    t0 = time.perf_counter()
    dims = 2 * provider.d
    for m in mentions:
        m.validate_against(document)
    ordered = sorted(mentions, key=lambda m: (m.span.start, m.span.end))
    try:
        tokenized, token_vectors = provider.embed_tokens(document.text)
        knowledge_vecs: dict[str, np.ndarray] = {}
        if mode is not FusionMode.PHRASE_ONLY:
            for entity_id in {m.entity_id for m in ordered}:
                record = store.get_knowledge(entity_id)
                knowledge_vecs[entity_id] = encode_knowledge(provider, record, separator)
        rows: list[np.ndarray] = []
        for m in ordered:
            if mode is FusionMode.KNOWLEDGE_ONLY:
                row = knowledge_vecs[m.entity_id]
            else:
                phrase = phrase_vector_from_tokens(tokenized, token_vectors, m.span)
                if mode is FusionMode.BOTH:
                    row = phrase + knowledge_vecs[m.entity_id]
                else:
                    row = phrase
            rows.append(row.astype(np.float32, copy=False))
    except Exception as exc:
        raise IndexBuildError(f"index build failed for {document.doc_id!r}: {exc}") from exc
    matrix = np.stack(rows) if rows else np.zeros((0, dims), dtype=np.float32)
    if normalize and len(matrix):
        norms = np.sqrt((matrix.astype(np.float64) ** 2).sum(axis=1))
        norms[norms == 0.0] = 1.0
        matrix = (matrix.astype(np.float64) / norms[:, None]).astype(np.float32)
    build_ms = (time.perf_counter() - t0) * 1000.0
    return PhraseIndex(
        doc_id=document.doc_id,
        dims=dims,
        mentions=tuple(ordered),
        matrix=matrix,
        mode=mode,
        build_ms=build_ms,
    )


def exact_scores(index: PhraseIndex, query_vec: np.ndarray) -> list[float]:
    """Correctly rounded float64 inner products against every entry."""
    q = np.asarray(query_vec, dtype=np.float64)
    if q.shape != (index.dims,):
        raise ValueError(f"query dims {q.shape} do not match index dims {index.dims}")
    products = (index._matrix64 * q).tolist()
    return [math.fsum(row) for row in products]


def search(
    index: PhraseIndex,
    query_vec: np.ndarray,
    top_k: int = DEFAULT_TOP_K,
    score_floor: float | None = None,
) -> list[SearchHit]:
    """Exhaustive maximum-inner-product search.

    Hits are ordered by score descending, ties broken by smaller span start,
    then smaller span end; at most ``top_k`` hits are returned and hits below
    ``score_floor`` are dropped.
    """
    if top_k < 1:
        raise ValueError(f"top_k must be >= 1, got {top_k}")
    q = np.asarray(query_vec, dtype=np.float64)
    if q.shape != (index.dims,):
        raise ValueError(f"query dims {q.shape} do not match index dims {index.dims}")
    if len(index) == 0:
        return []
    scores = exact_scores(index, q)
    order = sorted(
        range(len(index)),
        key=lambda i: (-scores[i], index.mentions[i].span.start, index.mentions[i].span.end),
    )
    hits: list[SearchHit] = []
    for i in order:
        if score_floor is not None and scores[i] < score_floor:
            continue
        hits.append(SearchHit(mention=index.mentions[i], score=scores[i], rank=len(hits) + 1))
        if len(hits) == top_k:
            break
    return hits


def apply_threshold(
    hits: list[SearchHit],
    policy: ThresholdPolicy = ThresholdPolicy.MENTION_TOP_K,
    k: int = DEFAULT_TOP_K,
) -> list[SearchHit]:
    """Cut a ranked hit list down to the prediction set.

    MENTION_TOP_K keeps the first k hits. ENTITY_TOP_K keeps the k distinct
    entities with the best hits and returns all of their hits in the original
    rank order (rank values are preserved).
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if policy is ThresholdPolicy.MENTION_TOP_K:
        return hits[:k]
    keep: set[str] = set()
    for hit in hits:
        if hit.mention.entity_id not in keep:
            if len(keep) == k:
                continue
            keep.add(hit.mention.entity_id)
    return [h for h in hits if h.mention.entity_id in keep]


def save_index(index: PhraseIndex, path: str | Path) -> None:
    """Write the binary index format (little-endian, bit-exact round-trip)."""
    buf = bytearray()
    buf += MAGIC
    buf += struct.pack("<IBI", index.dims, _MODE_CODES[index.mode], len(index))
    matrix = np.ascontiguousarray(index.matrix, dtype="<f4")
    for i, m in enumerate(index.mentions):
        entity = m.entity_id.encode("utf-8")
        buf += struct.pack("<II", m.span.start, m.span.end)
        buf += struct.pack("<I", len(entity))
        buf += entity
        buf += struct.pack("<f", m.link_confidence)
        buf += matrix[i].tobytes()
    Path(path).write_bytes(bytes(buf))


def load_index(
    path: str | Path,
    *,
    doc_id: str | None = None,
    document_text: str | None = None,
) -> PhraseIndex:
    """Read the binary index format back.

    Mention surfaces are not part of the format; pass ``document_text`` to
    restore them (otherwise they load as empty strings).
    """
    data = Path(path).read_bytes()
    view = memoryview(data)
    if len(view) < len(MAGIC) + 9:
        raise IndexFormatError(f"{path}: truncated header")
    if bytes(view[: len(MAGIC)]) != MAGIC:
        raise IndexFormatError(f"{path}: bad magic {bytes(view[:len(MAGIC)])!r}")
    offset = len(MAGIC)
    dims, mode_code, count = struct.unpack_from("<IBI", view, offset)
    offset += struct.calcsize("<IBI")
    if mode_code not in _CODE_MODES:
        raise IndexFormatError(f"{path}: unknown mode code {mode_code}")
    mentions: list[Mention] = []
    matrix = np.zeros((count, dims), dtype=np.float32)
    vec_bytes = dims * 4
    for i in range(count):
        header_size = struct.calcsize("<III")
        if offset + header_size > len(view):
            raise IndexFormatError(f"{path}: truncated entry {i}")
        start, end, entity_len = struct.unpack_from("<III", view, offset)
        offset += header_size
        if offset + entity_len + 4 + vec_bytes > len(view):
            raise IndexFormatError(f"{path}: truncated entry {i}")
        entity_id = bytes(view[offset : offset + entity_len]).decode("utf-8")
        offset += entity_len
        (confidence,) = struct.unpack_from("<f", view, offset)
        offset += 4
        matrix[i] = np.frombuffer(view, dtype="<f4", count=dims, offset=offset)
        offset += vec_bytes
        surface = document_text[start:end] if document_text is not None else ""
        mentions.append(
            Mention(
                span=Span(start, end),
                surface=surface,
                entity_id=entity_id,
                link_confidence=confidence,
            )
        )
    if offset != len(view):
        raise IndexFormatError(f"{path}: {len(view) - offset} trailing bytes")
    return PhraseIndex(
        doc_id=doc_id or Path(path).stem,
        dims=dims,
        mentions=tuple(mentions),
        matrix=matrix,
        mode=_CODE_MODES[mode_code],
    )

"""Pipeline composition: linker + knowledge store + provider + index.

One code path serves the CLI, the HTTP service, and dataset evaluation runs,
so their results agree by construction.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .dataset import DocumentRecord
from .embedding import (
    DEFAULT_SEED_END,
    DEFAULT_SEED_START,
    EmbeddingProvider,
    KNOWLEDGE_SEPARATOR,
    ReferenceHashEmbedder,
    RemoteEmbeddingProvider,
    encode_query,
)
from .index import (
    DEFAULT_TOP_K,
    FusionMode,
    PhraseIndex,
    SearchHit,
    ThresholdPolicy,
    apply_threshold,
    build_index,
    load_index,
    save_index,
    search,
)
from .knowledge import (
    DEFAULT_SENTENCE_LIMIT,
    FixtureKnowledgeStore,
    KnowledgeStore,
    MappingKnowledgeStore,
    RemoteKnowledgeStore,
)
from .linking import Gazetteer, GazetteerLinker, Linker, RemoteLinker
from .model import Document, Prediction, PredictionList


def build_provider(
    kind: str = "ref",
    d: int = 64,
    *,
    seed_start: int = DEFAULT_SEED_START,
    seed_end: int = DEFAULT_SEED_END,
    url: str | None = None,
    cache_dir: str | Path | None = None,
) -> EmbeddingProvider:
    if kind == "ref":
        return ReferenceHashEmbedder(d=d, seed_start=seed_start, seed_end=seed_end)
    if kind == "remote":
        if not url:
            raise ValueError("remote provider requires a url")
        return RemoteEmbeddingProvider(url, d, cache_dir=cache_dir)
    raise ValueError(f"unknown provider kind {kind!r}")


def build_linker(
    gazetteer_path: str | Path | None = None,
    linker_url: str | None = None,
    *,
    cache_dir: str | Path | None = None,
    min_confidence: float = 0.0,
) -> Linker:
    if gazetteer_path and linker_url:
        raise ValueError("configure either a gazetteer or a linker url, not both")
    if gazetteer_path:
        return GazetteerLinker(Gazetteer.load(gazetteer_path))
    if linker_url:
        if cache_dir is None:
            raise ValueError("remote linker requires a cache directory")
        return RemoteLinker(linker_url, cache_dir, min_confidence=min_confidence)
    raise ValueError("a gazetteer path or linker url is required")


def build_store(
    knowledge_dir: str | Path | None = None,
    knowledge_url: str | None = None,
    *,
    cache_dir: str | Path | None = None,
    sentence_limit: int = DEFAULT_SENTENCE_LIMIT,
) -> KnowledgeStore:
    if knowledge_dir and knowledge_url:
        raise ValueError("configure either a knowledge dir or a knowledge url, not both")
    if knowledge_dir:
        return FixtureKnowledgeStore(knowledge_dir, sentence_limit=sentence_limit)
    if knowledge_url:
        if cache_dir is None:
            raise ValueError("remote knowledge requires a cache directory")
        return RemoteKnowledgeStore(knowledge_url, cache_dir, sentence_limit=sentence_limit)
    return MappingKnowledgeStore(sentence_limit=sentence_limit)


@dataclass(frozen=True)
class QueryResult:
    hits: list[SearchHit]
    latency_ms: float


class SearchEngine:
    """Indexes documents and answers natural-language mention queries."""

    def __init__(
        self,
        linker: Linker,
        store: KnowledgeStore,
        provider: EmbeddingProvider,
        *,
        mode: FusionMode = FusionMode.BOTH,
        top_k: int = DEFAULT_TOP_K,
        policy: ThresholdPolicy = ThresholdPolicy.MENTION_TOP_K,
        score_floor: float | None = None,
        separator: str = KNOWLEDGE_SEPARATOR,
        normalize: bool = False,
    ):
        self.linker = linker
        self.store = store
        self.provider = provider
        self.mode = mode
        self.top_k = top_k
        self.policy = policy
        self.score_floor = score_floor
        self.separator = separator
        self.normalize = normalize

    @property
    def dims(self) -> int:
        return 2 * self.provider.d

    def index_document(self, document: Document, mode: FusionMode | None = None) -> PhraseIndex:
        mentions = self.linker.link(document)
        return build_index(
            document,
            mentions,
            self.store,
            self.provider,
            mode or self.mode,
            separator=self.separator,
            normalize=self.normalize,
        )

    def query(
        self,
        index: PhraseIndex,
        query: str,
        *,
        top_k: int | None = None,
        policy: ThresholdPolicy | None = None,
        score_floor: float | None = None,
    ) -> list[SearchHit]:
        query_vec = encode_query(self.provider, query)
        # Rank everything, then cut: the entity policy keeps all hits of the
        # best k entities, which a pre-truncated list could not provide.
        ranked = search(
            index,
            query_vec,
            top_k=max(1, len(index)),
            score_floor=score_floor if score_floor is not None else self.score_floor,
        )
        return apply_threshold(
            ranked,
            policy or self.policy,
            top_k if top_k is not None else self.top_k,
        )

    def predict_dataset(self, records: list[DocumentRecord]) -> list[PredictionList]:
        """Run the full pipeline over a dataset and emit ranked predictions."""
        out: list[PredictionList] = []
        for record in records:
            index = self.index_document(record.document)
            for sample in record.queries:
                hits = self.query(index, sample.query)
                out.append(
                    PredictionList(
                        qid=sample.qid,
                        ranked=tuple(
                            Prediction(text=h.mention.surface, span=h.mention.span, score=h.score)
                            for h in hits
                        ),
                    )
                )
        return out


def save_index_with_meta(
    index: PhraseIndex,
    path: str | Path,
    document: Document,
    provider_meta: dict,
) -> None:
    """Write the index plus a sidecar carrying what the binary format cannot:
    the document text (mention surfaces) and the provider configuration."""
    save_index(index, path)
    meta = {
        "doc_id": document.doc_id,
        "text": document.text,
        "mode": index.mode.value,
        "provider": provider_meta,
    }
    Path(str(path) + ".meta.json").write_text(
        json.dumps(meta, sort_keys=True, ensure_ascii=False), encoding="utf-8"
    )


def load_index_with_meta(path: str | Path) -> tuple[PhraseIndex, dict | None]:
    meta_path = Path(str(path) + ".meta.json")
    meta: dict | None = None
    if meta_path.exists():
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
    index = load_index(
        path,
        doc_id=(meta or {}).get("doc_id"),
        document_text=(meta or {}).get("text"),
    )
    return index, meta

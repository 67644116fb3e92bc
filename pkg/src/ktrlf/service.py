"""HTTP service exposing index, search, and knowledge endpoints.

Endpoints (JSON in/out):

* ``POST /v1/documents``                      index a document (idempotent)
* ``GET  /v1/documents/{doc_id}``             index stats
* ``POST /v1/documents/{doc_id}/search``      query one document
* ``GET  /v1/entities/{entity_id}``           external knowledge for the UI
* ``GET  /v1/healthz``                        liveness

Indexes persist to ``cache_dir`` in the binary index format plus a JSON
sidecar with the document text, so results are stable across restarts. An
in-memory LRU (default 64 documents) fronts the disk cache; builds for the
same content coalesce onto a single flight.
"""
from __future__ import annotations

import hashlib
import json
import threading
import time
from collections import OrderedDict
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Mapping

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel

from .embedding import encode_query
from .engine import SearchEngine, build_linker, build_provider, build_store
from .errors import KtrlfError, TransportError
from .index import (
    FusionMode,
    PhraseIndex,
    ThresholdPolicy,
    apply_threshold,
    load_index,
    save_index,
    search,
)
from .model import Document

ENV_PREFIX = "KTRLF_"

_INT_FIELDS = {"provider_d", "default_top_k", "sentence_limit", "max_document_chars",
               "memory_cache_capacity", "seed_start", "seed_end"}
_FLOAT_FIELDS = {"min_link_confidence"}
_LIST_FIELDS = {"cors_origins"}


@dataclass
class ServiceConfig:
    listen_address: str = "127.0.0.1:8787"
    provider: str = "ref"
    provider_d: int = 64
    provider_url: str | None = None
    seed_start: int = 0xCBF29CE484222325
    seed_end: int = 0x9E3779B97F4A7C15
    gazetteer: str | None = None
    linker_url: str | None = None
    min_link_confidence: float = 0.0
    knowledge_dir: str | None = None
    knowledge_url: str | None = None
    sentence_limit: int = 10
    default_top_k: int = 4
    default_mode: str = "both"
    default_policy: str = "mention"
    cache_dir: str = "ktrlf-cache"
    max_document_chars: int = 1_000_000
    memory_cache_capacity: int = 64
    cors_origins: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.default_top_k < 1:
            raise ValueError("default_top_k must be >= 1")

    @classmethod
    def load(
        cls,
        path: str | Path | None = None,
        env: Mapping[str, str] | None = None,
    ) -> "ServiceConfig":
        """Read a JSON config file; every key is overridable by KTRLF_<KEY>."""
        raw: dict[str, Any] = {}
        if path is not None:
            raw.update(json.loads(Path(path).read_text(encoding="utf-8")))
        if env is None:
            import os

            env = os.environ
        for f in fields(cls):
            env_key = ENV_PREFIX + f.name.upper()
            if env_key in env:
                raw[f.name] = env[env_key]
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        coerced: dict[str, Any] = {}
        for key, value in raw.items():
            if isinstance(value, str) and key in _INT_FIELDS:
                value = int(value, 0)
            elif isinstance(value, str) and key in _FLOAT_FIELDS:
                value = float(value)
            elif isinstance(value, str) and key in _LIST_FIELDS:
                value = [v for v in value.split(",") if v]
            coerced[key] = value
        return cls(**coerced)


class IndexRequest(BaseModel):
    text: str
    doc_id: str | None = None
    mode: str | None = None


class SearchRequest(BaseModel):
    query: str
    top_k: int | None = None
    mode: str | None = None
    score_floor: float | None = None
    policy: str | None = None


def _parse_mode(value: str | None, default: FusionMode) -> FusionMode:
    if value is None:
        return default
    try:
        return FusionMode(value)
    except ValueError:
        raise HTTPException(status_code=400, detail=f"unknown mode {value!r}")


def _parse_policy(value: str | None, default: ThresholdPolicy) -> ThresholdPolicy:
    if value is None:
        return default
    try:
        return ThresholdPolicy(value)
    except ValueError:
        raise HTTPException(status_code=400, detail=f"unknown policy {value!r}")


def default_doc_id(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


@dataclass
class _DocState:
    doc_id: str
    text: str
    content_hash: str


class DocumentStore:
    """Thread-safe registry of documents and their per-mode indexes."""

    def __init__(self, engine: SearchEngine, cache_dir: Path, capacity: int):
        self.engine = engine
        self.cache_dir = cache_dir
        self.cache_dir.mkdir(parents=True, exist_ok=True)
        self.capacity = capacity
        self._docs: dict[str, _DocState] = {}
        self._lru: OrderedDict[tuple[str, str], PhraseIndex] = OrderedDict()
        self._lock = threading.Lock()
        self._build_locks: dict[tuple[str, str], threading.Lock] = {}

    def _meta_path(self, doc_id: str) -> Path:
        return self.cache_dir / f"{doc_id}.json"

    def _index_path(self, doc_id: str, mode: FusionMode) -> Path:
        return self.cache_dir / f"{doc_id}.{mode.value}.ktrlf"

    def _load_doc(self, doc_id: str) -> _DocState | None:
        with self._lock:
            state = self._docs.get(doc_id)
        if state is not None:
            return state
        meta_path = self._meta_path(doc_id)
        if not meta_path.exists():
            return None
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
        state = _DocState(doc_id=doc_id, text=meta["text"], content_hash=meta["content_hash"])
        with self._lock:
            self._docs.setdefault(doc_id, state)
        return state

    def register(self, doc_id: str, text: str) -> _DocState:
        state = _DocState(
            doc_id=doc_id,
            text=text,
            content_hash=hashlib.sha256(text.encode("utf-8")).hexdigest(),
        )
        known = self._load_doc(doc_id)
        if known is not None and known.content_hash == state.content_hash:
            return known
        with self._lock:
            self._docs[doc_id] = state
            # Content changed: stale per-mode indexes must not survive.
            for key in [k for k in self._lru if k[0] == doc_id]:
                del self._lru[key]
        self._meta_path(doc_id).write_text(
            json.dumps(
                {"doc_id": doc_id, "text": text, "content_hash": state.content_hash},
                ensure_ascii=False,
                sort_keys=True,
            ),
            encoding="utf-8",
        )
        for mode in FusionMode:
            path = self._index_path(doc_id, mode)
            if path.exists():
                path.unlink()
        return state

    def _cache_get(self, key: tuple[str, str]) -> PhraseIndex | None:
        with self._lock:
            index = self._lru.get(key)
            if index is not None:
                self._lru.move_to_end(key)
            return index

    def _cache_put(self, key: tuple[str, str], index: PhraseIndex) -> None:
        with self._lock:
            self._lru[key] = index
            self._lru.move_to_end(key)
            while len(self._lru) > self.capacity:
                self._lru.popitem(last=False)

    def get_index(self, doc_id: str, mode: FusionMode, *, build: bool = True) -> tuple[PhraseIndex, float] | None:
        """Return (index, indexing_ms); indexing_ms is 0.0 on any cache hit."""
        state = self._load_doc(doc_id)
        if state is None:
            return None
        key = (doc_id, mode.value)
        cached = self._cache_get(key)
        if cached is not None:
            return cached, 0.0
        disk_path = self._index_path(doc_id, mode)
        if disk_path.exists():
            index = load_index(disk_path, doc_id=doc_id, document_text=state.text)
            self._cache_put(key, index)
            return index, 0.0
        if not build:
            return None
        with self._lock:
            flight = self._build_locks.setdefault(key, threading.Lock())
        with flight:
            # Another request may have finished the build while we waited.
            cached = self._cache_get(key)
            if cached is not None:
                return cached, 0.0
            if disk_path.exists():
                index = load_index(disk_path, doc_id=doc_id, document_text=state.text)
                self._cache_put(key, index)
                return index, 0.0
            document = Document(doc_id=doc_id, text=state.text)
            index = self.engine.index_document(document, mode)
            save_index(index, disk_path)
            self._cache_put(key, index)
            return index, index.build_ms


def build_engine(config: ServiceConfig) -> SearchEngine:
    cache_dir = Path(config.cache_dir)
    provider = build_provider(
        config.provider,
        config.provider_d,
        seed_start=config.seed_start,
        seed_end=config.seed_end,
        url=config.provider_url,
        cache_dir=cache_dir / "provider",
    )
    linker = build_linker(
        config.gazetteer,
        config.linker_url,
        cache_dir=cache_dir / "linker",
        min_confidence=config.min_link_confidence,
    )
    store = build_store(
        config.knowledge_dir,
        config.knowledge_url,
        cache_dir=cache_dir / "knowledge",
        sentence_limit=config.sentence_limit,
    )
    return SearchEngine(
        linker,
        store,
        provider,
        mode=FusionMode(config.default_mode),
        top_k=config.default_top_k,
        policy=ThresholdPolicy(config.default_policy),
    )


def create_app(config: ServiceConfig | None = None) -> FastAPI:
    config = config or ServiceConfig()
    engine = build_engine(config)
    store = DocumentStore(engine, Path(config.cache_dir), config.memory_cache_capacity)
    app = FastAPI(title="ktrlf", version="0.1.0")
    if config.cors_origins:
        app.add_middleware(
            CORSMiddleware,
            allow_origins=config.cors_origins,
            allow_methods=["*"],
            allow_headers=["*"],
        )
    app.state.config = config
    app.state.engine = engine
    app.state.documents = store

    default_mode = FusionMode(config.default_mode)
    default_policy = ThresholdPolicy(config.default_policy)

    def _index_stats(doc_id: str, index: PhraseIndex, indexing_ms: float) -> dict:
        return {
            "doc_id": doc_id,
            "mention_count": len(index),
            "entity_count": len(index.entity_ids),
            "indexing_ms": indexing_ms,
        }

    @app.get("/v1/healthz")
    def healthz() -> dict:
        return {"status": "ok"}

    @app.post("/v1/documents")
    def index_document(body: IndexRequest) -> dict:
        if not body.text:
            raise HTTPException(status_code=400, detail="text must be non-empty")
        if len(body.text) > config.max_document_chars:
            raise HTTPException(
                status_code=413,
                detail=f"text exceeds {config.max_document_chars} characters",
            )
        mode = _parse_mode(body.mode, default_mode)
        doc_id = body.doc_id or default_doc_id(body.text)
        store.register(doc_id, body.text)
        try:
            result = store.get_index(doc_id, mode)
        except (KtrlfError, TransportError) as exc:
            raise HTTPException(status_code=502, detail=str(exc))
        assert result is not None
        index, indexing_ms = result
        return _index_stats(doc_id, index, indexing_ms)

    @app.get("/v1/documents/{doc_id}")
    def document_stats(doc_id: str) -> dict:
        result = store.get_index(doc_id, default_mode, build=False)
        if result is None:
            raise HTTPException(status_code=404, detail=f"unknown doc_id {doc_id!r}")
        index, _ = result
        stats = _index_stats(doc_id, index, 0.0)
        stats.update({"dims": index.dims, "mode": index.mode.value})
        return stats

    @app.post("/v1/documents/{doc_id}/search")
    def query_document(doc_id: str, body: SearchRequest) -> dict:
        if body.top_k is not None and body.top_k < 1:
            raise HTTPException(status_code=400, detail="top_k must be >= 1")
        if not body.query.strip():
            raise HTTPException(status_code=400, detail="query must be non-empty")
        mode = _parse_mode(body.mode, default_mode)
        policy = _parse_policy(body.policy, default_policy)
        try:
            result = store.get_index(doc_id, mode)
        except (KtrlfError, TransportError) as exc:
            raise HTTPException(status_code=502, detail=str(exc))
        if result is None:
            raise HTTPException(status_code=404, detail=f"unknown doc_id {doc_id!r}")
        index, _ = result
        if index.dims != engine.dims:
            raise HTTPException(
                status_code=409,
                detail=(
                    f"index dims {index.dims} do not match provider dims {engine.dims}; "
                    "re-index the document"
                ),
            )
        t0 = time.perf_counter()
        query_vec = encode_query(engine.provider, body.query)
        ranked = search(index, query_vec, top_k=max(1, len(index)), score_floor=body.score_floor)
        hits = apply_threshold(ranked, policy, body.top_k or config.default_top_k)
        latency_ms = (time.perf_counter() - t0) * 1000.0
        return {
            "doc_id": doc_id,
            "matches": [
                {
                    "start": h.mention.span.start,
                    "end": h.mention.span.end,
                    "text": h.mention.surface,
                    "entity_id": h.mention.entity_id,
                    "score": h.score,
                    "rank": h.rank,
                }
                for h in hits
            ],
            "latency_ms": latency_ms,
        }

    @app.get("/v1/entities/{entity_id}")
    def get_entity_knowledge(entity_id: str) -> dict:
        try:
            record = engine.store.get_knowledge(entity_id)
        except TransportError as exc:
            raise HTTPException(status_code=502, detail=str(exc))
        return {
            "entity_id": record.entity_id,
            "title": record.title,
            "description": record.description,
        }

    return app


def run(config: ServiceConfig) -> None:  # pragma: no cover - thin wrapper
    import uvicorn

    host, _, port = config.listen_address.partition(":")
    uvicorn.run(create_app(config), host=host or "127.0.0.1", port=int(port or 8787))

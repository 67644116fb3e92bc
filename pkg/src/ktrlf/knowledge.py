"""Knowledge stores: external description text per entity.

A store never fails on an unknown entity; it returns a record with an empty
description so downstream search degrades to phrase-only behavior instead of
aborting. Descriptions are truncated to the first ``sentence_limit``
sentences (default 10).
"""
from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Protocol

import httpx

from .errors import TransportError
from .linking import read_cache_entry, write_cache_entry
from .model import KnowledgeRecord

DEFAULT_SENTENCE_LIMIT = 10

_TERMINATORS = ".!?"


def sentence_boundaries(text: str) -> list[int]:
    """Indices one past each sentence-ending punctuation mark.

    A boundary is a '.', '!' or '?' that is either at end of text, or is
    followed by whitespace and then an uppercase letter, a digit, or end of
    text. Deliberately simple and deterministic.
    """
    bounds: list[int] = []
    n = len(text)
    for i, ch in enumerate(text):
        if ch not in _TERMINATORS:
            continue
        j = i + 1
        if j == n:
            bounds.append(j)
            continue
        if not text[j].isspace():
            continue
        while j < n and text[j].isspace():
            j += 1
        if j == n or text[j].isupper() or text[j].isdigit():
            bounds.append(i + 1)
    return bounds


def truncate_sentences(text: str, k: int) -> str:
    """Prefix of ``text`` containing at most ``k`` sentences, right-trimmed."""
    if k < 1:
        raise ValueError(f"sentence limit must be >= 1, got {k}")
    bounds = sentence_boundaries(text)
    if len(bounds) <= k:
        return text.rstrip()
    return text[: bounds[k - 1]].rstrip()


class KnowledgeStore(Protocol):
    sentence_limit: int

    def get_knowledge(self, entity_id: str) -> KnowledgeRecord: ...


class MappingKnowledgeStore:
    """In-memory store over {entity_id: (title, text)}; handy for tests and
    for serving a dataset's own knowledge fields."""

    def __init__(
        self,
        records: dict[str, tuple[str, str]] | None = None,
        sentence_limit: int = DEFAULT_SENTENCE_LIMIT,
    ):
        if sentence_limit < 1:
            raise ValueError("sentence_limit must be >= 1")
        self._records = dict(records or {})
        self.sentence_limit = sentence_limit

    @classmethod
    def from_records(
        cls, records: list[KnowledgeRecord], sentence_limit: int = DEFAULT_SENTENCE_LIMIT
    ) -> "MappingKnowledgeStore":
        return cls(
            {r.entity_id: (r.title, r.description) for r in records},
            sentence_limit=sentence_limit,
        )

    def get_knowledge(self, entity_id: str) -> KnowledgeRecord:
        title, text = self._records.get(entity_id, (entity_id, ""))
        return KnowledgeRecord(
            entity_id=entity_id,
            title=title or entity_id,
            description=truncate_sentences(text, self.sentence_limit),
        )


class FixtureKnowledgeStore:
    """Directory of {entity_id}.txt article files plus an index.json mapping
    entity_id to title."""

    def __init__(self, root: str | Path, sentence_limit: int = DEFAULT_SENTENCE_LIMIT):
        if sentence_limit < 1:
            raise ValueError("sentence_limit must be >= 1")
        self.root = Path(root)
        self.sentence_limit = sentence_limit
        index_path = self.root / "index.json"
        self._titles: dict[str, str] = {}
        if index_path.exists():
            self._titles = json.loads(index_path.read_text(encoding="utf-8"))

    def get_knowledge(self, entity_id: str) -> KnowledgeRecord:
        title = self._titles.get(entity_id) or entity_id
        text = ""
        if entity_id and "/" not in entity_id and "\\" not in entity_id:
            path = self.root / f"{entity_id}.txt"
            if path.exists():
                text = path.read_text(encoding="utf-8")
        return KnowledgeRecord(
            entity_id=entity_id,
            title=title,
            description=truncate_sentences(text, self.sentence_limit),
        )


class RemoteKnowledgeStore:
    """Client for GET {endpoint}/knowledge?entity_id=... with an on-disk cache.

    HTTP 404 means "no knowledge" and yields an empty description; other
    transport failures raise unless a cached response exists.
    """

    def __init__(
        self,
        endpoint: str,
        cache_dir: str | Path,
        *,
        sentence_limit: int = DEFAULT_SENTENCE_LIMIT,
        timeout: float = 10.0,
        transport: httpx.BaseTransport | None = None,
    ):
        if sentence_limit < 1:
            raise ValueError("sentence_limit must be >= 1")
        self.endpoint = endpoint.rstrip("/")
        self.cache_dir = Path(cache_dir)
        self.sentence_limit = sentence_limit
        self.timeout = timeout
        self._transport = transport

    def get_knowledge(self, entity_id: str) -> KnowledgeRecord:
        key = hashlib.sha256(entity_id.encode("utf-8")).hexdigest()
        payload = read_cache_entry(self.cache_dir, key)
        if payload is None:
            payload = self._fetch(entity_id)
            write_cache_entry(self.cache_dir, key, payload)
        title = payload.get("title") or entity_id
        text = payload.get("text") or ""
        return KnowledgeRecord(
            entity_id=entity_id,
            title=title,
            description=truncate_sentences(text, self.sentence_limit),
        )

    def _fetch(self, entity_id: str) -> dict:
        try:
            with httpx.Client(transport=self._transport, timeout=self.timeout) as client:
                response = client.get(
                    f"{self.endpoint}/knowledge", params={"entity_id": entity_id}
                )
                if response.status_code == 404:
                    return {"entity_id": entity_id, "title": entity_id, "text": ""}
                response.raise_for_status()
                return response.json()
        except (httpx.HTTPError, json.JSONDecodeError) as exc:
            raise TransportError(
                f"knowledge request for {entity_id!r} failed with no cache entry: {exc}"
            ) from exc

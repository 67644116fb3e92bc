"""Entity linkers: map document text to entity mentions.

Two implementations of one contract: a deterministic dictionary (gazetteer)
linker and a client for a remote linking service with an on-disk response
cache keyed by document-text hash.
"""
from __future__ import annotations

import hashlib
import json
import os
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Protocol

import httpx

from .errors import DatasetFormatError, ProtocolError, TransportError
from .model import Document, Mention, Span, normalize_mention

_WORD_RE = re.compile(r"\w+")


class Linker(Protocol):
    def link(self, document: Document) -> list[Mention]: ...


def _resolve_overlaps(candidates: Iterable[tuple[int, int, str, float]]) -> list[tuple[int, int, str, float]]:
    """Keep the leftmost-longest non-overlapping subset; ties prefer the
    lexicographically smaller entity_id."""
    ordered = sorted(candidates, key=lambda c: (c[0], -(c[1] - c[0]), c[2]))
    kept: list[tuple[int, int, str, float]] = []
    last_end = 0
    for cand in ordered:
        if cand[0] >= last_end:
            kept.append(cand)
            last_end = cand[1]
    return kept


@dataclass(frozen=True)
class Gazetteer:
    """Dictionary of normalized surface forms to entity ids."""

    entries: dict[str, str]
    max_phrase_tokens: int

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[str, str]]) -> "Gazetteer":
        entries: dict[str, str] = {}
        for surface, entity_id in pairs:
            key = normalize_mention(surface)
            if not key or not entity_id:
                continue
            # Duplicate surfaces resolve to the smaller entity_id so the
            # result does not depend on insertion order.
            if key not in entries or entity_id < entries[key]:
                entries[key] = entity_id
        max_tokens = max((len(_WORD_RE.findall(k)) for k in entries), default=1)
        return cls(entries=entries, max_phrase_tokens=max(1, max_tokens))

    @classmethod
    def load(cls, path: str | Path) -> "Gazetteer":
        """Load a JSON Lines file of {"surface": str, "entity_id": str} rows."""
        pairs: list[tuple[str, str]] = []
        with open(path, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise DatasetFormatError(f"line {line_no}: invalid JSON: {exc}") from exc
                if not isinstance(obj, dict) or not isinstance(obj.get("surface"), str) \
                        or not isinstance(obj.get("entity_id"), str):
                    raise DatasetFormatError(
                        f"line {line_no}: expected object with string surface and entity_id"
                    )
                pairs.append((obj["surface"], obj["entity_id"]))
        return cls.from_pairs(pairs)


class GazetteerLinker:
    """Scans for dictionary phrases aligned to word boundaries.

    Matching is case-insensitive and whole-token: "art" never matches inside
    "smart". Overlaps resolve leftmost-longest, then by smaller entity_id,
    so the output is deterministic and non-overlapping.
    """

    def __init__(self, gazetteer: Gazetteer):
        self.gazetteer = gazetteer

    def link(self, document: Document) -> list[Mention]:
        entries = self.gazetteer.entries
        if not entries:
            return []
        text = document.text
        tokens = [(m.start(), m.end()) for m in _WORD_RE.finditer(text)]
        candidates: list[tuple[int, int, str, float]] = []
        n = len(tokens)
        max_len = self.gazetteer.max_phrase_tokens
        for i in range(n):
            for width in range(min(max_len, n - i), 0, -1):
                start = tokens[i][0]
                end = tokens[i + width - 1][1]
                entity_id = entries.get(normalize_mention(text[start:end]))
                if entity_id is not None:
                    candidates.append((start, end, entity_id, 1.0))
        kept = _resolve_overlaps(candidates)
        return [
            Mention(
                span=Span(start, end),
                surface=text[start:end],
                entity_id=entity_id,
                link_confidence=confidence,
            )
            for start, end, entity_id, confidence in kept
        ]


def text_cache_key(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def write_cache_entry(cache_dir: str | Path, key: str, payload: dict) -> None:
    """Atomic single-writer insert; concurrent readers see old or new, never partial."""
    cache_dir = Path(cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    final = cache_dir / f"{key}.json"
    tmp = cache_dir / f".{key}.{os.getpid()}.tmp"
    tmp.write_text(json.dumps(payload, ensure_ascii=False, sort_keys=True), encoding="utf-8")
    os.replace(tmp, final)


def read_cache_entry(cache_dir: str | Path, key: str) -> dict | None:
    path = Path(cache_dir) / f"{key}.json"
    if not path.exists():
        return None
    return json.loads(path.read_text(encoding="utf-8"))


class RemoteLinker:
    """Client for a linking service: POST {endpoint}/link {"text": ...}.

    Responses are cached under SHA-256(text) so repeated runs are
    reproducible offline. Confidence values pass through unchanged; hits
    below ``min_confidence`` are dropped.
    """

    def __init__(
        self,
        endpoint: str,
        cache_dir: str | Path,
        *,
        min_confidence: float = 0.0,
        timeout: float = 10.0,
        transport: httpx.BaseTransport | None = None,
    ):
        self.endpoint = endpoint.rstrip("/")
        self.cache_dir = Path(cache_dir)
        self.min_confidence = min_confidence
        self.timeout = timeout
        self._transport = transport

    def link(self, document: Document) -> list[Mention]:
        key = text_cache_key(document.text)
        payload = read_cache_entry(self.cache_dir, key)
        if payload is None:
            payload = self._fetch(document.text)
            write_cache_entry(self.cache_dir, key, payload)
        return self._parse(payload, document)

    def _fetch(self, text: str) -> dict:
        try:
            with httpx.Client(transport=self._transport, timeout=self.timeout) as client:
                response = client.post(f"{self.endpoint}/link", json={"text": text})
                response.raise_for_status()
                return response.json()
        except (httpx.HTTPError, json.JSONDecodeError) as exc:
            raise TransportError(f"linker request failed with no cache entry: {exc}") from exc

    def _parse(self, payload: dict, document: Document) -> list[Mention]:
        if not isinstance(payload, dict) or not isinstance(payload.get("mentions"), list):
            raise ProtocolError("linker response missing 'mentions' list")
        candidates: list[tuple[int, int, str, float]] = []
        for i, m in enumerate(payload["mentions"]):
            ctx = f"mentions[{i}]"
            if not isinstance(m, dict):
                raise ProtocolError(f"linker response field {ctx} must be an object")
            start, end = m.get("start"), m.get("end")
            if not isinstance(start, int) or isinstance(start, bool):
                raise ProtocolError(f"linker response field {ctx}.start must be an integer")
            if not isinstance(end, int) or isinstance(end, bool):
                raise ProtocolError(f"linker response field {ctx}.end must be an integer")
            if not (0 <= start < end <= document.char_count):
                raise ProtocolError(
                    f"linker response field {ctx} span [{start},{end}) outside document bounds"
                )
            entity_id = m.get("entity_id")
            if not isinstance(entity_id, str) or not entity_id:
                raise ProtocolError(f"linker response field {ctx}.entity_id must be a non-empty string")
            confidence = m.get("confidence", 1.0)
            if not isinstance(confidence, (int, float)) or isinstance(confidence, bool) \
                    or not (0.0 <= float(confidence) <= 1.0):
                raise ProtocolError(f"linker response field {ctx}.confidence must be in [0, 1]")
            if float(confidence) < self.min_confidence:
                continue
            candidates.append((start, end, entity_id, float(confidence)))
        kept = _resolve_overlaps(candidates)
        return [
            Mention(
                span=Span(start, end),
                surface=document.text[start:end],
                entity_id=entity_id,
                link_confidence=confidence,
            )
            for start, end, entity_id, confidence in kept
        ]

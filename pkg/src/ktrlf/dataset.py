"""Dataset and prediction file IO.

Dataset files are JSON Lines, one object per document:

    {"doc_id": str, "text": str,
     "entities": [{"entity_id": str, "title": str,
                   "mentions": [{"start": int, "end": int}], "knowledge": str}],
     "queries": [{"qid": str, "query": str,
                  "targets": [{"text": str, "start": int?, "end": int?}],
                  "target_entities": [str]}]}

Prediction files are JSON Lines, one object per query:

    {"qid": str, "predictions": [{"text": str, "start": int?, "end": int?, "score": float?}]}

All integers are 0-based character offsets with exclusive ends. Loading is a
pure function of the file bytes.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .errors import DatasetFormatError, IntegrityError
from .model import (
    Document,
    GoldMention,
    KnowledgeRecord,
    Mention,
    Prediction,
    PredictionList,
    QuerySample,
    Span,
    find_occurrences,
)


@dataclass(frozen=True)
class DocumentRecord:
    """Everything the dataset states about one document."""

    document: Document
    queries: tuple[QuerySample, ...]
    mentions: tuple[Mention, ...]
    knowledge: tuple[KnowledgeRecord, ...]


def _require(obj: dict, key: str, kind: type | tuple[type, ...], line: int, ctx: str) -> Any:
    if key not in obj:
        raise DatasetFormatError(f"line {line}: missing field {ctx}{key}")
    value = obj[key]
    if not isinstance(value, kind) or isinstance(value, bool):
        raise DatasetFormatError(f"line {line}: field {ctx}{key} has wrong type")
    return value


def _optional_int(obj: dict, key: str, line: int, ctx: str) -> int | None:
    if key not in obj or obj[key] is None:
        return None
    value = obj[key]
    if not isinstance(value, int) or isinstance(value, bool):
        raise DatasetFormatError(f"line {line}: field {ctx}{key} must be an integer")
    return value


def _parse_span(start: int, end: int, char_count: int, line: int, ctx: str) -> Span:
    if not (0 <= start < end <= char_count):
        raise DatasetFormatError(
            f"line {line}: span [{start},{end}) at {ctx} outside document of length {char_count}"
        )
    return Span(start, end)


def _parse_entities(
    raw: list, document: Document, line: int
) -> tuple[list[Mention], list[KnowledgeRecord]]:
    mentions: list[Mention] = []
    knowledge: list[KnowledgeRecord] = []
    for i, ent in enumerate(raw):
        ctx = f"entities[{i}]."
        if not isinstance(ent, dict):
            raise DatasetFormatError(f"line {line}: entities[{i}] must be an object")
        entity_id = _require(ent, "entity_id", str, line, ctx)
        if not entity_id:
            raise DatasetFormatError(f"line {line}: field {ctx}entity_id is empty")
        title = _require(ent, "title", str, line, ctx)
        text = _require(ent, "knowledge", str, line, ctx)
        knowledge.append(KnowledgeRecord(entity_id=entity_id, title=title, description=text))
        for j, m in enumerate(_require(ent, "mentions", list, line, ctx)):
            mctx = f"{ctx}mentions[{j}]."
            if not isinstance(m, dict):
                raise DatasetFormatError(f"line {line}: {ctx}mentions[{j}] must be an object")
            start = _require(m, "start", int, line, mctx)
            end = _require(m, "end", int, line, mctx)
            span = _parse_span(start, end, document.char_count, line, mctx)
            mentions.append(
                Mention(span=span, surface=document.slice(span), entity_id=entity_id)
            )
    mentions.sort(key=lambda m: (m.span.start, m.span.end))
    return mentions, knowledge


def _resolve_targets(
    raw: list, document: Document, qid: str, line: int
) -> tuple[GoldMention, ...]:
    resolved: list[GoldMention] = []
    for i, tgt in enumerate(raw):
        ctx = f"queries({qid}).targets[{i}]."
        if not isinstance(tgt, dict):
            raise DatasetFormatError(f"line {line}: {ctx[:-1]} must be an object")
        text = _require(tgt, "text", str, line, ctx)
        start = _optional_int(tgt, "start", line, ctx)
        end = _optional_int(tgt, "end", line, ctx)
        if (start is None) != (end is None):
            raise DatasetFormatError(f"line {line}: {ctx}start/end must be given together")
        if start is not None and end is not None:
            span = _parse_span(start, end, document.char_count, line, ctx)
            actual = document.slice(span)
            if actual != text:
                raise IntegrityError(
                    f"line {line}: {ctx}text {text!r} does not match document text "
                    f"{actual!r} at [{start},{end})"
                )
            resolved.append(GoldMention(text=text, span=span))
        else:
            spans = find_occurrences(document.text, text)
            if not spans:
                warnings.warn(
                    f"line {line}: target {text!r} of query {qid!r} never occurs in "
                    f"document {document.doc_id!r}",
                    stacklevel=3,
                )
            # The matched document surface is kept, so distinct casings of one
            # answer stay distinct in the gold list.
            resolved.extend(GoldMention(text=document.slice(s), span=s) for s in spans)
    # Document order; drop exact duplicates produced by overlapping target strings.
    resolved.sort(key=lambda g: (g.span.start, g.span.end) if g.span else (-1, -1))
    seen: set[tuple[int, int, str]] = set()
    unique: list[GoldMention] = []
    for g in resolved:
        key = (g.span.start, g.span.end, g.text) if g.span else (-1, -1, g.text)
        if key not in seen:
            seen.add(key)
            unique.append(g)
    return tuple(unique)


def _parse_queries(
    raw: list, document: Document, line: int, seen_qids: set[str]
) -> tuple[QuerySample, ...]:
    samples: list[QuerySample] = []
    for i, q in enumerate(raw):
        ctx = f"queries[{i}]."
        if not isinstance(q, dict):
            raise DatasetFormatError(f"line {line}: queries[{i}] must be an object")
        qid = _require(q, "qid", str, line, ctx)
        if not qid:
            raise DatasetFormatError(f"line {line}: field {ctx}qid is empty")
        if qid in seen_qids:
            raise DatasetFormatError(f"line {line}: duplicate qid {qid!r}")
        seen_qids.add(qid)
        query = _require(q, "query", str, line, ctx)
        targets = _require(q, "targets", list, line, ctx)
        entities_raw = _require(q, "target_entities", list, line, ctx)
        for j, e in enumerate(entities_raw):
            if not isinstance(e, str):
                raise DatasetFormatError(
                    f"line {line}: field {ctx}target_entities[{j}] must be a string"
                )
        samples.append(
            QuerySample(
                qid=qid,
                doc_id=document.doc_id,
                query=query,
                gold_mentions=_resolve_targets(targets, document, qid, line),
                gold_entities=tuple(entities_raw),
            )
        )
    return tuple(samples)


def load_dataset(path: str | Path) -> list[DocumentRecord]:
    """Load and cross-validate a dataset file.

    String-only targets are expanded to every case-insensitive occurrence in
    the document, in document order. Raises :class:`DatasetFormatError` with
    the line number and field on schema violations and
    :class:`IntegrityError` when a given span does not match its text.
    """
    records: list[DocumentRecord] = []
    seen_docs: set[str] = set()
    seen_qids: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetFormatError(f"line {line_no}: invalid JSON: {exc}") from exc
            if not isinstance(obj, dict):
                raise DatasetFormatError(f"line {line_no}: record must be an object")
            doc_id = _require(obj, "doc_id", str, line_no, "")
            if not doc_id:
                raise DatasetFormatError(f"line {line_no}: field doc_id is empty")
            if doc_id in seen_docs:
                raise DatasetFormatError(f"line {line_no}: duplicate doc_id {doc_id!r}")
            seen_docs.add(doc_id)
            text = _require(obj, "text", str, line_no, "")
            if not text:
                raise DatasetFormatError(f"line {line_no}: field text is empty")
            document = Document(doc_id=doc_id, text=text)
            mentions, knowledge = _parse_entities(
                _require(obj, "entities", list, line_no, ""), document, line_no
            )
            queries = _parse_queries(
                _require(obj, "queries", list, line_no, ""), document, line_no, seen_qids
            )
            records.append(
                DocumentRecord(
                    document=document,
                    queries=queries,
                    mentions=tuple(mentions),
                    knowledge=tuple(knowledge),
                )
            )
    return records


def load_predictions(path: str | Path) -> list[PredictionList]:
    """Load a prediction dump; duplicate qids are rejected."""
    out: list[PredictionList] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetFormatError(f"line {line_no}: invalid JSON: {exc}") from exc
            if not isinstance(obj, dict):
                raise DatasetFormatError(f"line {line_no}: record must be an object")
            qid = _require(obj, "qid", str, line_no, "")
            if qid in seen:
                raise DatasetFormatError(f"line {line_no}: duplicate qid {qid!r}")
            seen.add(qid)
            ranked: list[Prediction] = []
            for i, p in enumerate(_require(obj, "predictions", list, line_no, "")):
                ctx = f"predictions[{i}]."
                if not isinstance(p, dict):
                    raise DatasetFormatError(f"line {line_no}: predictions[{i}] must be an object")
                text = _require(p, "text", str, line_no, ctx)
                start = _optional_int(p, "start", line_no, ctx)
                end = _optional_int(p, "end", line_no, ctx)
                if (start is None) != (end is None):
                    raise DatasetFormatError(
                        f"line {line_no}: {ctx}start/end must be given together"
                    )
                score = p.get("score")
                if score is not None and not isinstance(score, (int, float)):
                    raise DatasetFormatError(f"line {line_no}: field {ctx}score must be a number")
                span = Span(start, end) if start is not None and end is not None else None
                ranked.append(Prediction(text=text, span=span, score=score))
            try:
                out.append(PredictionList(qid=qid, ranked=tuple(ranked)))
            except ValueError as exc:
                raise IntegrityError(f"line {line_no}: {exc}") from exc
    return out


def prediction_to_json(pred: PredictionList) -> dict:
    items = []
    for p in pred.ranked:
        item: dict[str, Any] = {"text": p.text}
        if p.span is not None:
            item["start"] = p.span.start
            item["end"] = p.span.end
        if p.score is not None:
            item["score"] = float(p.score)
        items.append(item)
    return {"qid": pred.qid, "predictions": items}


def write_predictions(path: str | Path, predictions: list[PredictionList]) -> None:
    """Write a prediction dump in canonical form (stable bytes for fixed input)."""
    with open(path, "w", encoding="utf-8") as fh:
        for pred in predictions:
            fh.write(json.dumps(prediction_to_json(pred), sort_keys=True, ensure_ascii=False))
            fh.write("\n")

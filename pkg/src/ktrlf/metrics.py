"""Metric suite for ranked mention lists plus the latency harness.

All per-query scores are in [0, 1]; corpus aggregates are reported x100.
Aggregation uses ``math.fsum`` (correctly rounded sums), so results are
independent of iteration order and reproducible bit-for-bit by any exact
reimplementation.

Empty-list conventions, applied uniformly: both lists empty scores 1.0,
exactly one empty scores 0.0.
"""
from __future__ import annotations

import json
import math
import statistics
import time
import warnings
from collections import Counter
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

from .dataset import DocumentRecord
from .model import PredictionList, QuerySample, Span, normalize_mention

LIST_EM_F1 = "list_em_f1"
LIST_EM_BINARY = "list_em_binary"
LIST_OVERLAP_F1 = "list_overlap_f1"
SET_EM_F1 = "set_em_f1"
SET_OVERLAP_F1 = "set_overlap_f1"
AP_IOU50 = "ap_iou50"

STRING_METRICS = (LIST_EM_F1, LIST_EM_BINARY, LIST_OVERLAP_F1, SET_EM_F1, SET_OVERLAP_F1)


def _f1(precision: float, recall: float) -> float:
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def list_em_f1(pred: Sequence[str], gold: Sequence[str]) -> float:
    """Multiset-matching F1 over normalized strings.

    A prediction only counts while gold still has an unconsumed copy of the
    same normalized string, so finding an answer once does not excuse missing
    its other occurrences.
    """
    p = [normalize_mention(x) for x in pred]
    g = [normalize_mention(x) for x in gold]
    if not p and not g:
        return 1.0
    if not p or not g:
        return 0.0
    tp = sum((Counter(p) & Counter(g)).values())
    return _f1(tp / len(p), tp / len(g))


def list_em_binary(pred: Sequence[str], gold: Sequence[str]) -> float:
    """1.0 iff the normalized multisets (and hence lengths) match exactly."""
    p = Counter(normalize_mention(x) for x in pred)
    g = Counter(normalize_mention(x) for x in gold)
    return 1.0 if p == g else 0.0


def longest_common_substring(a: str, b: str) -> int:
    """Length of the longest common contiguous substring."""
    if not a or not b:
        return 0
    best = 0
    prev = [0] * (len(b) + 1)
    for i in range(1, len(a) + 1):
        cur = [0] * (len(b) + 1)
        for j in range(1, len(b) + 1):
            if a[i - 1] == b[j - 1]:
                cur[j] = prev[j - 1] + 1
                if cur[j] > best:
                    best = cur[j]
        prev = cur
    return best


def overlap(a: str, b: str) -> float:
    """Character-level partial-match credit: LCSubstring / max length."""
    if not a and not b:
        return 1.0
    if not a or not b:
        return 0.0
    return longest_common_substring(a, b) / max(len(a), len(b))


def list_overlap_f1(pred: Sequence[str], gold: Sequence[str]) -> float:
    """F1 with per-element best-match partial credit."""
    p = [normalize_mention(x) for x in pred]
    g = [normalize_mention(x) for x in gold]
    if not p and not g:
        return 1.0
    if not p or not g:
        return 0.0
    precision = math.fsum(max(overlap(x, y) for y in g) for x in p) / len(p)
    recall = math.fsum(max(overlap(y, x) for x in p) for y in g) / len(g)
    return _f1(precision, recall)


def _dedup(items: Iterable[str]) -> list[str]:
    return list(dict.fromkeys(normalize_mention(x) for x in items))


def set_scores(pred: Sequence[str], gold: Sequence[str]) -> tuple[float, float]:
    """(set_em_f1, set_overlap_f1): the list metrics after deduplication,
    which drops the find-every-occurrence requirement."""
    p, g = _dedup(pred), _dedup(gold)
    return list_em_f1(p, g), list_overlap_f1(p, g)


def robustness(per_query: dict[str, float], doc_of: dict[str, str]) -> float | None:
    """Mean over documents of the minimum score among that document's queries."""
    if not per_query:
        return None
    groups: dict[str, list[float]] = {}
    for qid, score in per_query.items():
        groups.setdefault(doc_of[qid], []).append(score)
    return math.fsum(min(v) for v in groups.values()) / len(groups)


def span_iou(a: Span, b: Span) -> float:
    inter = max(0, min(a.end, b.end) - max(a.start, b.start))
    union = a.length + b.length - inter
    return inter / union


def average_precision_iou(
    pred_spans: Sequence[Span],
    gold_spans: Sequence[Span],
    iou_threshold: float = 0.5,
) -> float:
    """Detection-style average precision over character spans.

    Predictions are walked in rank order; each may consume the not yet
    matched gold with the highest IoU (ties go to the earlier gold span)
    provided IoU >= threshold. AP sums precision at the true-positive ranks
    and divides by the gold count, so it is invariant to gold ordering.
    """
    if not gold_spans:
        raise ValueError("gold_spans must be non-empty")
    golds = sorted(gold_spans, key=lambda s: (s.start, s.end))
    matched = [False] * len(golds)
    tp = 0
    precisions: list[float] = []
    for rank, pred in enumerate(pred_spans, start=1):
        best_iou, best_idx = 0.0, -1
        for idx, gold in enumerate(golds):
            if matched[idx]:
                continue
            iou = span_iou(pred, gold)
            if iou > best_iou:
                best_iou, best_idx = iou, idx
        if best_idx >= 0 and best_iou >= iou_threshold:
            matched[best_idx] = True
            tp += 1
            precisions.append(tp / rank)
    return math.fsum(precisions) / len(golds)


@dataclass(frozen=True)
class MetricReport:
    """Per-query scores in [0, 1]; corpus and robustness aggregates x100."""

    per_query: dict[str, dict[str, float]]
    corpus: dict[str, float]
    robustness: dict[str, float]
    n_documents: int
    n_queries: int
    map_included: bool
    latency_ms_per_q: float | None = None


def _mean_x100(values: Sequence[float]) -> float:
    return (math.fsum(values) / len(values)) * 100.0


def evaluate(records: list[DocumentRecord], predictions: list[PredictionList]) -> MetricReport:
    """Score a prediction dump against a loaded dataset.

    Dataset queries without predictions are scored as empty prediction lists
    (with a warning). Duplicate or unknown prediction qids are input errors.
    Span-based AP is computed per query only when every prediction for that
    query carries a span.
    """
    samples: dict[str, QuerySample] = {}
    for record in records:
        for sample in record.queries:
            samples[sample.qid] = sample
    by_qid: dict[str, PredictionList] = {}
    for pred in predictions:
        if pred.qid in by_qid:
            raise ValueError(f"duplicate qid in predictions: {pred.qid!r}")
        if pred.qid not in samples:
            raise ValueError(f"prediction qid {pred.qid!r} not present in the dataset")
        by_qid[pred.qid] = pred

    per_query: dict[str, dict[str, float]] = {}
    doc_of: dict[str, str] = {}
    for qid, sample in samples.items():
        doc_of[qid] = sample.doc_id
        pred = by_qid.get(qid)
        if pred is None:
            warnings.warn(f"no predictions for qid {qid!r}; scoring an empty list", stacklevel=2)
            pred = PredictionList(qid=qid)
        pred_texts = pred.texts
        gold_texts = [g.text for g in sample.gold_mentions]
        set_em, set_ov = set_scores(pred_texts, gold_texts)
        scores = {
            LIST_EM_F1: list_em_f1(pred_texts, gold_texts),
            LIST_EM_BINARY: list_em_binary(pred_texts, gold_texts),
            LIST_OVERLAP_F1: list_overlap_f1(pred_texts, gold_texts),
            SET_EM_F1: set_em,
            SET_OVERLAP_F1: set_ov,
        }
        gold_spans = [g.span for g in sample.gold_mentions if g.span is not None]
        pred_spans = [p.span for p in pred.ranked]
        if not gold_spans:
            warnings.warn(f"qid {qid!r} has no gold spans; skipping average precision", stacklevel=2)
        elif all(s is not None for s in pred_spans):
            scores[AP_IOU50] = average_precision_iou(pred_spans, gold_spans)
        per_query[qid] = scores

    corpus: dict[str, float] = {}
    robust: dict[str, float] = {}
    metric_names = list(STRING_METRICS)
    ap_values = {qid: s[AP_IOU50] for qid, s in per_query.items() if AP_IOU50 in s}
    map_included = bool(ap_values) and len(ap_values) == len(per_query)
    if ap_values:
        metric_names.append(AP_IOU50)
    for name in metric_names:
        values = {qid: s[name] for qid, s in per_query.items() if name in s}
        corpus[name] = _mean_x100(list(values.values()))
        r = robustness(values, doc_of)
        if r is not None:
            robust[name] = r * 100.0
    return MetricReport(
        per_query=per_query,
        corpus=corpus,
        robustness=robust,
        n_documents=len(records),
        n_queries=len(samples),
        map_included=map_included,
    )


def report_to_dict(report: MetricReport) -> dict:
    out: dict = {
        "corpus": dict(report.corpus),
        "robustness": dict(report.robustness),
        "per_query": {qid: dict(scores) for qid, scores in report.per_query.items()},
        "n_documents": report.n_documents,
        "n_queries": report.n_queries,
        "map_included": report.map_included,
    }
    if report.latency_ms_per_q is not None:
        out["latency_ms_per_q"] = report.latency_ms_per_q
    return out


def report_json(report: MetricReport) -> str:
    """Canonical JSON serialization (stable bytes for fixed scores)."""
    return json.dumps(report_to_dict(report), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


_TABLE_COLUMNS: list[tuple[str, str, bool]] = [
    ("List EM", LIST_EM_F1, False),
    ("(R) List EM", LIST_EM_F1, True),
    ("List Overlap", LIST_OVERLAP_F1, False),
    ("(R) List Overlap", LIST_OVERLAP_F1, True),
    ("Set EM", SET_EM_F1, False),
    ("Set Overlap", SET_OVERLAP_F1, False),
    ("MAP@IoU0.5", AP_IOU50, False),
    ("(R) MAP@IoU0.5", AP_IOU50, True),
]


def format_report_table(report: MetricReport, system: str = "ours") -> str:
    """Aligned one-row table; columns follow the conventional report order."""
    headers = ["Model"]
    values = [system]
    if report.latency_ms_per_q is not None:
        headers.append("Latency (ms/Q)")
        values.append(f"{report.latency_ms_per_q:.3f}")
    for header, name, robust in _TABLE_COLUMNS:
        source = report.robustness if robust else report.corpus
        if name not in source:
            continue
        headers.append(header)
        values.append(f"{source[name]:.3f}")
    widths = [max(len(h), len(v)) for h, v in zip(headers, values)]
    head = "  ".join(h.rjust(w) for h, w in zip(headers, widths))
    row = "  ".join(v.rjust(w) for v, w in zip(values, widths))
    return f"{head}\n{row}\n"


@dataclass(frozen=True)
class LatencySummary:
    ms_per_q_mean: float
    ms_per_q_p50: float
    repeats: int


def measure_latency(
    engine: Callable[[str], object],
    queries: Sequence[str],
    warmup: int = 10,
    repeats: int = 100,
) -> LatencySummary:
    """Mean and median wall time per query, cycling the query list.

    The engine must already hold a built index: indexing cost is excluded by
    construction and reported separately. The timed loop is single-threaded
    so ms/Q stays meaningful.
    """
    if not queries:
        raise ValueError("queries must be non-empty")
    if repeats < 1:
        raise ValueError(f"repeats must be >= 1, got {repeats}")
    for i in range(warmup):
        engine(queries[i % len(queries)])
    timings: list[float] = []
    for i in range(repeats):
        query = queries[i % len(queries)]
        t0 = time.perf_counter()
        engine(query)
        timings.append((time.perf_counter() - t0) * 1000.0)
    return LatencySummary(
        ms_per_q_mean=math.fsum(timings) / repeats,
        ms_per_q_p50=statistics.median(timings),
        repeats=repeats,
    )

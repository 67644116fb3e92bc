"""Command-line frontend: index, search, eval, bench, serve.

Results go to stdout as JSON; diagnostics go to stderr. Exit codes: 0 on
success, 1 on runtime errors, 2 on usage errors. Flags fall back to
``KTRLF_<FLAG>`` environment variables (shared with the service config).
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

from .dataset import load_dataset, load_predictions, write_predictions
from .engine import (
    SearchEngine,
    build_linker,
    build_provider,
    build_store,
    load_index_with_meta,
    save_index_with_meta,
)
from .errors import KtrlfError
from .index import (
    DEFAULT_TOP_K,
    FusionMode,
    ThresholdPolicy,
    apply_threshold,
    search,
)
from .embedding import DEFAULT_SEED_END, DEFAULT_SEED_START, encode_query
from .metrics import evaluate, format_report_table, measure_latency, report_json
from .model import Document


def _env(key: str) -> str | None:
    return os.environ.get(f"KTRLF_{key}")


def _env_int(key: str, fallback: int) -> int:
    value = _env(key)
    return int(value, 0) if value is not None else fallback


def _add_engine_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--mode", choices=[m.value for m in FusionMode],
                        default=_env("MODE") or FusionMode.BOTH.value)
    parser.add_argument("--gazetteer", default=_env("GAZETTEER"),
                        help="gazetteer JSONL ({'surface','entity_id'} per line)")
    parser.add_argument("--linker-url", default=_env("LINKER_URL"))
    parser.add_argument("--knowledge-dir", default=_env("KNOWLEDGE_DIR"))
    parser.add_argument("--knowledge-url", default=_env("KNOWLEDGE_URL"))
    parser.add_argument("--provider", choices=["ref", "remote"],
                        default=_env("PROVIDER") or "ref")
    parser.add_argument("--provider-url", default=_env("PROVIDER_URL"))
    parser.add_argument("--d", type=int, default=_env_int("PROVIDER_D", 64),
                        help="per-token embedding dimension")
    parser.add_argument("--seed-start", type=lambda v: int(v, 0),
                        default=_env_int("SEED_START", DEFAULT_SEED_START))
    parser.add_argument("--seed-end", type=lambda v: int(v, 0),
                        default=_env_int("SEED_END", DEFAULT_SEED_END))
    parser.add_argument("--sentence-limit", type=int, default=_env_int("SENTENCE_LIMIT", 10))
    parser.add_argument("--min-link-confidence", type=float,
                        default=float(_env("MIN_LINK_CONFIDENCE") or 0.0))
    parser.add_argument("--cache-dir", default=_env("CACHE_DIR") or "ktrlf-cache")


def _engine_from_args(args: argparse.Namespace, *, top_k: int | None = None,
                      policy: str | None = None) -> SearchEngine:
    cache_dir = Path(args.cache_dir)
    provider = build_provider(
        args.provider, args.d,
        seed_start=args.seed_start, seed_end=args.seed_end,
        url=args.provider_url, cache_dir=cache_dir / "provider",
    )
    linker = build_linker(
        args.gazetteer, args.linker_url,
        cache_dir=cache_dir / "linker", min_confidence=args.min_link_confidence,
    )
    store = build_store(
        args.knowledge_dir, args.knowledge_url,
        cache_dir=cache_dir / "knowledge", sentence_limit=args.sentence_limit,
    )
    return SearchEngine(
        linker, store, provider,
        mode=FusionMode(args.mode),
        top_k=top_k if top_k is not None else DEFAULT_TOP_K,
        policy=ThresholdPolicy(policy) if policy else ThresholdPolicy.MENTION_TOP_K,
    )


def _provider_meta(args: argparse.Namespace) -> dict:
    meta = {"kind": args.provider, "d": args.d}
    if args.provider == "ref":
        meta["seed_start"] = args.seed_start
        meta["seed_end"] = args.seed_end
    else:
        meta["url"] = args.provider_url
    return meta


def _read_document(path: str) -> Document:
    text = Path(path).read_text(encoding="utf-8")
    return Document(doc_id=Path(path).stem, text=text)


def cmd_index(args: argparse.Namespace) -> int:
    engine = _engine_from_args(args)
    document = _read_document(args.doc)
    index = engine.index_document(document)
    save_index_with_meta(index, args.out, document, _provider_meta(args))
    json.dump({"mention_count": len(index), "indexing_ms": index.build_ms}, sys.stdout)
    sys.stdout.write("\n")
    return 0


def _provider_from_meta(meta: dict | None, args: argparse.Namespace):
    if meta and "provider" in meta:
        p = meta["provider"]
        return build_provider(
            p.get("kind", "ref"), p.get("d", args.d),
            seed_start=p.get("seed_start", DEFAULT_SEED_START),
            seed_end=p.get("seed_end", DEFAULT_SEED_END),
            url=p.get("url"),
            cache_dir=Path(args.cache_dir) / "provider",
        )
    return build_provider(args.provider, args.d, seed_start=args.seed_start,
                          seed_end=args.seed_end, url=args.provider_url,
                          cache_dir=Path(args.cache_dir) / "provider")


def cmd_search(args: argparse.Namespace) -> int:
    index, meta = load_index_with_meta(args.index)
    provider = _provider_from_meta(meta, args)
    query_vec = encode_query(provider, args.query)
    ranked = search(index, query_vec, top_k=max(1, len(index)), score_floor=args.score_floor)
    hits = apply_threshold(ranked, ThresholdPolicy(args.policy), args.top_k)
    json.dump(
        [
            {
                "rank": h.rank,
                "start": h.mention.span.start,
                "end": h.mention.span.end,
                "text": h.mention.surface,
                "entity_id": h.mention.entity_id,
                "score": h.score,
            }
            for h in hits
        ],
        sys.stdout,
    )
    sys.stdout.write("\n")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    records = load_dataset(args.dataset)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.predictions:
        # Pure arithmetic path: no provider, linker, or store is constructed.
        predictions = load_predictions(args.predictions)
    else:
        engine = _engine_from_args(args, top_k=args.top_k, policy=args.policy)
        predictions = engine.predict_dataset(records)
        dump_path = out_dir / "predictions.jsonl"
        write_predictions(dump_path, predictions)
        # Score the materialized dump so any system's file takes the same path.
        predictions = load_predictions(dump_path)
    report = evaluate(records, predictions)
    payload = report_json(report)
    (out_dir / "report.json").write_text(payload, encoding="utf-8")
    (out_dir / "report.txt").write_text(format_report_table(report), encoding="utf-8")
    sys.stdout.write(payload)
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    queries = [q for q in Path(args.queries).read_text(encoding="utf-8").splitlines() if q.strip()]
    if not queries:
        sys.stderr.write("query file is empty\n")
        return 2
    if args.index:
        index, meta = load_index_with_meta(args.index)
        provider = _provider_from_meta(meta, args)
        indexing_ms = 0.0
    else:
        engine = _engine_from_args(args)
        provider = engine.provider
        document = _read_document(args.doc)
        t0 = time.perf_counter()
        index = engine.index_document(document)
        indexing_ms = (time.perf_counter() - t0) * 1000.0

    policy = ThresholdPolicy(args.policy)

    def run_query(query: str):
        query_vec = encode_query(provider, query)
        ranked = search(index, query_vec, top_k=max(1, len(index)))
        return apply_threshold(ranked, policy, args.top_k)

    summary = measure_latency(run_query, queries, warmup=args.warmup, repeats=args.repeats)
    json.dump(
        {
            "indexing_ms": indexing_ms,
            "ms_per_q_mean": summary.ms_per_q_mean,
            "ms_per_q_p50": summary.ms_per_q_p50,
            "n_candidates": len(index),
            "dims": index.dims,
        },
        sys.stdout,
    )
    sys.stdout.write("\n")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:  # pragma: no cover - runs a server
    from .service import ServiceConfig, run

    config = ServiceConfig.load(args.config)
    if args.listen:
        config.listen_address = args.listen
    run(config)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ktrlf", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_index = sub.add_parser("index", help="build and persist a document index")
    p_index.add_argument("--doc", required=True, help="path to a UTF-8 text file")
    p_index.add_argument("--out", required=True, help="output index path")
    _add_engine_flags(p_index)
    p_index.set_defaults(func=cmd_index)

    p_search = sub.add_parser("search", help="query a persisted index")
    p_search.add_argument("--index", required=True)
    p_search.add_argument("--query", required=True)
    p_search.add_argument("--top-k", type=int, default=_env_int("DEFAULT_TOP_K", DEFAULT_TOP_K))
    p_search.add_argument("--policy", choices=[p.value for p in ThresholdPolicy],
                          default=_env("DEFAULT_POLICY") or ThresholdPolicy.MENTION_TOP_K.value)
    p_search.add_argument("--score-floor", type=float, default=None)
    _add_engine_flags(p_search)
    p_search.set_defaults(func=cmd_search)

    p_eval = sub.add_parser("eval", help="score a prediction dump or run the pipeline")
    p_eval.add_argument("--dataset", required=True)
    p_eval.add_argument("--predictions", help="existing dump to score; omit to run the pipeline")
    p_eval.add_argument("--out-dir", default=".")
    p_eval.add_argument("--top-k", type=int, default=_env_int("DEFAULT_TOP_K", DEFAULT_TOP_K))
    p_eval.add_argument("--policy", choices=[p.value for p in ThresholdPolicy],
                        default=_env("DEFAULT_POLICY") or ThresholdPolicy.MENTION_TOP_K.value)
    _add_engine_flags(p_eval)
    p_eval.set_defaults(func=cmd_eval)

    p_bench = sub.add_parser("bench", help="measure per-query latency")
    group = p_bench.add_mutually_exclusive_group(required=True)
    group.add_argument("--doc")
    group.add_argument("--index")
    p_bench.add_argument("--queries", required=True, help="file with one query per line")
    p_bench.add_argument("--repeats", type=int, default=100)
    p_bench.add_argument("--warmup", type=int, default=10)
    p_bench.add_argument("--top-k", type=int, default=_env_int("DEFAULT_TOP_K", DEFAULT_TOP_K))
    p_bench.add_argument("--policy", choices=[p.value for p in ThresholdPolicy],
                         default=_env("DEFAULT_POLICY") or ThresholdPolicy.MENTION_TOP_K.value)
    _add_engine_flags(p_bench)
    p_bench.set_defaults(func=cmd_bench)

    p_serve = sub.add_parser("serve", help="run the HTTP service")
    p_serve.add_argument("--config", default=_env("CONFIG"))
    p_serve.add_argument("--listen", default=None)
    p_serve.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (KtrlfError, ValueError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

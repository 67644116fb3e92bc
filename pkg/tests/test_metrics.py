import json
import math
import random

import pytest
from hypothesis import given, strategies as st

from ktrlf.dataset import DocumentRecord
from ktrlf.metrics import (
    average_precision_iou,
    evaluate,
    format_report_table,
    list_em_binary,
    list_em_f1,
    list_overlap_f1,
    longest_common_substring,
    measure_latency,
    report_json,
    robustness,
    set_scores,
    span_iou,
)
from ktrlf.model import (
    Document,
    GoldMention,
    Prediction,
    PredictionList,
    QuerySample,
    Span,
)

import oracles

words = st.lists(st.text(alphabet="abcde", min_size=0, max_size=6), max_size=6)


class TestListEm:
    def test_identity_is_one(self):
        assert list_em_f1(["Wechat", "Weibo"], ["Wechat", "Weibo"]) == 1.0
        assert list_em_binary(["B", "a"], ["A", "b"]) == 1.0  # order-free multiset

    def test_multiset_counting(self):
        value = list_em_f1(["A", "B", "C"], ["A", "A", "B"])
        assert value == pytest.approx(2 / 3)

    def test_empty_conventions(self):
        assert list_em_f1([], []) == 1.0
        assert list_em_f1([], ["X"]) == 0.0
        assert list_em_f1(["X"], []) == 0.0
        assert list_em_binary([], []) == 1.0

    def test_binary_demands_exact_counts(self):
        assert list_em_binary(["A"], ["A", "A"]) == 0.0
        assert list_em_binary(["A", "A"], ["A", "A"]) == 1.0

    @given(words, words)
    def test_oracle_equivalence(self, pred, gold):
        assert list_em_f1(pred, gold) == oracles.list_em_f1(pred, gold)
        assert list_em_binary(pred, gold) == oracles.list_em_binary(pred, gold)


class TestListOverlap:
    def test_identical_single_elements(self):
        assert list_overlap_f1(["wechat"], ["wechat"]) == 1.0

    def test_partial_credit_hand_computed(self):
        # LCSubstring("alan shearer", "shearer") = 7; overlap = 7/12.
        assert list_overlap_f1(["alan shearer"], ["shearer"]) == pytest.approx(7 / 12)

    def test_disjoint_alphabets(self):
        assert list_overlap_f1(["xyz"], ["abc"]) == 0.0

    def test_lcs_examples(self):
        assert longest_common_substring("alan shearer", "shearer") == 7
        assert longest_common_substring("abc", "zbcq") == 2
        assert longest_common_substring("", "abc") == 0

    @given(words, words)
    def test_oracle_equivalence(self, pred, gold):
        assert list_overlap_f1(pred, gold) == oracles.list_overlap_f1(pred, gold)

    @given(words, words)
    def test_overlap_at_least_em(self, pred, gold):
        assert list_overlap_f1(pred, gold) >= list_em_f1(pred, gold)


class TestSetScores:
    def test_duplicates_collapse(self):
        set_em, _ = set_scores(["A", "A"], ["A"])
        assert set_em == 1.0
        assert list_em_f1(["A", "A"], ["A"]) == pytest.approx(2 / 3)

    def test_dedup_free_inputs_match_list_scores(self):
        pred, gold = ["a", "b"], ["b", "c"]
        set_em, set_ov = set_scores(pred, gold)
        assert set_em == list_em_f1(pred, gold)
        assert set_ov == list_overlap_f1(pred, gold)

    def test_order_free(self):
        assert set_scores(["A", "B"], ["B", "A"])[0] == 1.0

    @given(words, words)
    def test_oracle_equivalence(self, pred, gold):
        assert set_scores(pred, gold) == oracles.set_scores(pred, gold)


class TestRobustness:
    def test_mean_of_document_minima(self):
        scores = {"q1": 1.0, "q2": 0.5, "q3": 0.2}
        docs = {"q1": "d1", "q2": "d1", "q3": "d2"}
        assert robustness(scores, docs) == pytest.approx(0.35)

    def test_single_query_per_document_equals_mean(self):
        scores = {"q1": 0.4, "q2": 0.9}
        docs = {"q1": "d1", "q2": "d2"}
        assert robustness(scores, docs) == pytest.approx(0.65)

    def test_constant_scores(self):
        scores = {f"q{i}": 0.7 for i in range(5)}
        docs = {f"q{i}": f"d{i % 2}" for i in range(5)}
        assert robustness(scores, docs) == pytest.approx(0.7)

    def test_empty_is_absent(self):
        assert robustness({}, {}) is None


class TestAveragePrecision:
    def test_perfect_predictions(self):
        gold = [Span(0, 5), Span(10, 15)]
        assert average_precision_iou([Span(10, 15), Span(0, 5)], gold) == 1.0

    def test_iou_at_threshold_counts(self):
        assert average_precision_iou([Span(0, 5)], [Span(0, 10)]) == 1.0
        assert span_iou(Span(0, 5), Span(0, 10)) == 0.5

    def test_hand_computed_ap(self):
        gold = [Span(0, 10), Span(20, 30)]
        preds = [Span(0, 10), Span(50, 60), Span(20, 30)]
        assert average_precision_iou(preds, gold) == pytest.approx((1 + 2 / 3) / 2)

    def test_gold_permutation_invariance(self):
        preds = [Span(0, 10), Span(18, 30), Span(40, 50)]
        golds = [Span(0, 10), Span(20, 30), Span(41, 49)]
        ap1 = average_precision_iou(preds, golds)
        ap2 = average_precision_iou(preds, list(reversed(golds)))
        assert ap1 == ap2

    def test_each_gold_consumed_once(self):
        gold = [Span(0, 10)]
        assert average_precision_iou([Span(0, 10), Span(0, 10)], gold) == 1.0

    def test_empty_gold_rejected(self):
        with pytest.raises(ValueError):
            average_precision_iou([Span(0, 5)], [])


def random_case(rng):
    n_pred, n_gold = rng.randint(0, 6), rng.randint(0, 6)
    mk = lambda: "".join(rng.choice("abcde") for _ in range(rng.randint(0, 6)))
    return [mk() for _ in range(n_pred)], [mk() for _ in range(n_gold)]


def random_spans(rng, max_n=6, doc_len=40):
    spans = []
    for _ in range(rng.randint(1, max_n)):
        start = rng.randint(0, doc_len - 2)
        end = rng.randint(start + 1, doc_len)
        spans.append(Span(start, end))
    return spans


class TestOracleEquivalenceSweep:
    def test_string_metrics_bit_equal(self):
        rng = random.Random(2024)
        for _ in range(300):
            pred, gold = random_case(rng)
            assert list_em_f1(pred, gold) == oracles.list_em_f1(pred, gold)
            assert list_em_binary(pred, gold) == oracles.list_em_binary(pred, gold)
            assert list_overlap_f1(pred, gold) == oracles.list_overlap_f1(pred, gold)
            assert set_scores(pred, gold) == oracles.set_scores(pred, gold)

    def test_average_precision_bit_equal(self):
        rng = random.Random(7)
        for _ in range(300):
            preds = random_spans(rng) if rng.random() > 0.1 else []
            golds = random_spans(rng)
            got = average_precision_iou(preds, golds)
            expected = oracles.average_precision(
                [(s.start, s.end) for s in preds], [(s.start, s.end) for s in golds])
            assert got == expected


def make_record(doc_id, text, queries):
    document = Document(doc_id, text)
    samples = []
    for qid, query, golds in queries:
        mentions = tuple(
            GoldMention(text=text[s:e], span=Span(s, e)) for s, e in golds
        )
        samples.append(QuerySample(qid=qid, doc_id=doc_id, query=query,
                                   gold_mentions=mentions))
    return DocumentRecord(document=document, queries=tuple(samples),
                          mentions=(), knowledge=())


@pytest.fixture
def tiny_dataset():
    return [
        make_record("d1", "Wechat and Weibo rule. Wechat wins.",
                    [("q1", "apps", [(0, 6), (11, 16), (23, 29)]),
                     ("q2", "winners", [(23, 29)])]),
        make_record("d2", "Baidu finds things.",
                    [("q3", "engines", [(0, 5)])]),
    ]


def preds(qid, *items):
    return PredictionList(qid=qid, ranked=tuple(
        Prediction(text=t, span=Span(s, e)) for t, s, e in items
    ))


class TestEvaluate:
    def test_identity_predictions_score_100(self, tiny_dataset):
        predictions = [
            preds("q1", ("Wechat", 0, 6), ("Weibo", 11, 16), ("Wechat", 23, 29)),
            preds("q2", ("Wechat", 23, 29)),
            preds("q3", ("Baidu", 0, 5)),
        ]
        report = evaluate(tiny_dataset, predictions)
        for name, value in report.corpus.items():
            assert value == 100.0, name
        for value in report.robustness.values():
            assert value == 100.0
        assert report.map_included

    def test_all_empty_predictions_score_0(self, tiny_dataset):
        predictions = [PredictionList(qid=q) for q in ("q1", "q2", "q3")]
        report = evaluate(tiny_dataset, predictions)
        for name, value in report.corpus.items():
            assert value == 0.0, name

    def test_missing_qid_scored_empty_with_warning(self, tiny_dataset):
        predictions = [preds("q1", ("Wechat", 0, 6)), preds("q3", ("Baidu", 0, 5))]
        with pytest.warns(UserWarning, match="q2"):
            report = evaluate(tiny_dataset, predictions)
        assert report.per_query["q2"]["list_em_f1"] == 0.0

    def test_duplicate_prediction_qid_rejected(self, tiny_dataset):
        predictions = [PredictionList(qid="q1"), PredictionList(qid="q1")]
        with pytest.raises(ValueError, match="duplicate"):
            evaluate(tiny_dataset, predictions)

    def test_unknown_prediction_qid_rejected(self, tiny_dataset):
        with pytest.raises(ValueError, match="not present"):
            evaluate(tiny_dataset, [PredictionList(qid="q99")])

    def test_string_only_dump_skips_map(self, tiny_dataset):
        predictions = [
            PredictionList(qid="q1", ranked=(Prediction(text="Wechat"),)),
            PredictionList(qid="q2", ranked=(Prediction(text="Wechat"),)),
            PredictionList(qid="q3", ranked=(Prediction(text="Baidu"),)),
        ]
        report = evaluate(tiny_dataset, predictions)
        assert not report.map_included
        assert "ap_iou50" not in report.corpus

    def test_robustness_bounded_by_corpus_mean_on_balanced_clusters(self):
        # One query per document: robustness equals the corpus mean, and with
        # equal cluster sizes it can never exceed it.
        rng = random.Random(5)
        scores = {f"q{i}": rng.random() for i in range(8)}
        docs = {f"q{i}": f"d{i}" for i in range(8)}
        assert robustness(scores, docs) == pytest.approx(
            math.fsum(scores.values()) / 8)
        docs_paired = {f"q{i}": f"d{i // 2}" for i in range(8)}
        assert robustness(scores, docs_paired) <= math.fsum(scores.values()) / 8

    def test_robustness_can_exceed_corpus_mean_on_unbalanced_clusters(self):
        # Documented limitation: mean-of-minima weights documents equally, so
        # a large low-scoring cluster can drag the per-query mean below it.
        scores = {"q1": 0.0, "q2": 0.0, "q3": 0.0, "q4": 1.0}
        docs = {"q1": "d1", "q2": "d1", "q3": "d1", "q4": "d2"}
        corpus_mean = math.fsum(scores.values()) / 4  # 0.25
        assert robustness(scores, docs) == 0.5 > corpus_mean

    def test_report_json_is_stable(self, tiny_dataset):
        predictions = [preds("q1", ("Wechat", 0, 6)), PredictionList(qid="q2"),
                       PredictionList(qid="q3")]
        r1 = report_json(evaluate(tiny_dataset, predictions))
        r2 = report_json(evaluate(tiny_dataset, predictions))
        assert r1 == r2
        parsed = json.loads(r1)
        assert set(parsed["corpus"]) >= {"list_em_f1", "list_overlap_f1"}

    def test_table_columns_in_report_order(self, tiny_dataset):
        predictions = [preds("q1", ("Wechat", 0, 6)), PredictionList(qid="q2"),
                       PredictionList(qid="q3")]
        table = format_report_table(evaluate(tiny_dataset, predictions))
        header = table.splitlines()[0]
        assert header.index("List EM") < header.index("(R) List EM") \
            < header.index("List Overlap") < header.index("(R) List Overlap")


class TestMeasureLatency:
    def test_noop_engine_is_fast(self):
        summary = measure_latency(lambda q: None, ["a", "b"], warmup=2, repeats=20)
        assert summary.ms_per_q_mean < 0.1

    def test_single_repeat_p50_equals_mean(self):
        summary = measure_latency(lambda q: None, ["a"], warmup=0, repeats=1)
        assert summary.ms_per_q_p50 == summary.ms_per_q_mean

    def test_empty_queries_rejected(self):
        with pytest.raises(ValueError):
            measure_latency(lambda q: None, [], warmup=0, repeats=1)

    def test_deterministic_engine_results_stable(self):
        seen = []
        summary = measure_latency(lambda q: seen.append(q), ["x", "y"], warmup=1, repeats=4)
        assert seen == ["x", "x", "y", "x", "y"]
        assert summary.repeats == 4

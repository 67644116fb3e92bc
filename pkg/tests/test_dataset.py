import json

import pytest

from ktrlf.dataset import load_dataset, load_predictions, write_predictions
from ktrlf.errors import DatasetFormatError, IntegrityError
from ktrlf.model import Span


def write_lines(path, objs):
    path.write_text("\n".join(json.dumps(o) for o in objs) + "\n", encoding="utf-8")


def doc_line(doc_id="d1", text="A B A", entities=None, queries=None):
    return {
        "doc_id": doc_id,
        "text": text,
        "entities": entities or [],
        "queries": queries or [],
    }


class TestLoadDataset:
    def test_string_targets_expand_to_all_occurrences(self, tmp_path):
        path = tmp_path / "ds.jsonl"
        write_lines(path, [doc_line(queries=[
            {"qid": "q1", "query": "letter a", "targets": [{"text": "A"}], "target_entities": []},
        ])])
        [record] = load_dataset(path)
        golds = record.queries[0].gold_mentions
        assert [(g.span.start, g.span.end) for g in golds] == [(0, 1), (4, 5)]
        assert [g.text for g in golds] == ["A", "A"]

    def test_expansion_keeps_document_casing(self, tmp_path):
        path = tmp_path / "ds.jsonl"
        write_lines(path, [doc_line(text="Baidu rules. BAIDU expands.", queries=[
            {"qid": "q1", "query": "search engines", "targets": [{"text": "baidu"}],
             "target_entities": []},
        ])])
        [record] = load_dataset(path)
        assert [g.text for g in record.queries[0].gold_mentions] == ["Baidu", "BAIDU"]

    def test_explicit_span_must_match_text(self, tmp_path):
        path = tmp_path / "ds.jsonl"
        write_lines(path, [doc_line(queries=[
            {"qid": "q1", "query": "x", "targets": [{"text": "B", "start": 0, "end": 1}],
             "target_entities": []},
        ])])
        with pytest.raises(IntegrityError, match="line 1"):
            load_dataset(path)

    def test_entity_mentions_resolved_with_surfaces(self, tmp_path):
        path = tmp_path / "ds.jsonl"
        write_lines(path, [doc_line(text="Wechat pay via WeChat", entities=[
            {"entity_id": "E1", "title": "WeChat", "knowledge": "An app.",
             "mentions": [{"start": 0, "end": 6}, {"start": 15, "end": 21}]},
        ])])
        [record] = load_dataset(path)
        assert [m.surface for m in record.mentions] == ["Wechat", "WeChat"]
        assert record.knowledge[0].description == "An app."

    def test_schema_errors_name_line_and_field(self, tmp_path):
        path = tmp_path / "ds.jsonl"
        good = doc_line()
        bad = {"doc_id": "d2", "text": "x", "entities": [], "queries": [
            {"qid": "q9", "targets": [], "target_entities": []},  # missing "query"
        ]}
        write_lines(path, [good, bad])
        with pytest.raises(DatasetFormatError, match=r"line 2.*query"):
            load_dataset(path)

    def test_invalid_json_line(self, tmp_path):
        path = tmp_path / "ds.jsonl"
        path.write_text('{"doc_id": "d1"\n', encoding="utf-8")
        with pytest.raises(DatasetFormatError, match="line 1"):
            load_dataset(path)

    def test_span_out_of_bounds_is_rejected(self, tmp_path):
        path = tmp_path / "ds.jsonl"
        write_lines(path, [doc_line(entities=[
            {"entity_id": "E1", "title": "T", "knowledge": "",
             "mentions": [{"start": 0, "end": 99}]},
        ])])
        with pytest.raises(DatasetFormatError, match="line 1"):
            load_dataset(path)

    def test_duplicate_doc_id_rejected(self, tmp_path):
        path = tmp_path / "ds.jsonl"
        write_lines(path, [doc_line(), doc_line()])
        with pytest.raises(DatasetFormatError, match="duplicate doc_id"):
            load_dataset(path)

    def test_duplicate_qid_rejected_across_documents(self, tmp_path):
        path = tmp_path / "ds.jsonl"
        q = {"qid": "q1", "query": "x", "targets": [], "target_entities": []}
        write_lines(path, [doc_line(doc_id="d1", queries=[q]),
                           doc_line(doc_id="d2", queries=[dict(q)])])
        with pytest.raises(DatasetFormatError, match="duplicate qid"):
            load_dataset(path)

    def test_unresolvable_target_warns_and_yields_nothing(self, tmp_path):
        path = tmp_path / "ds.jsonl"
        write_lines(path, [doc_line(queries=[
            {"qid": "q1", "query": "x", "targets": [{"text": "zebra"}], "target_entities": []},
        ])])
        with pytest.warns(UserWarning, match="never occurs"):
            [record] = load_dataset(path)
        assert record.queries[0].gold_mentions == ()

    def test_load_is_pure_function_of_bytes(self, tmp_path):
        path = tmp_path / "ds.jsonl"
        write_lines(path, [doc_line(queries=[
            {"qid": "q1", "query": "letter a", "targets": [{"text": "A"}],
             "target_entities": ["E_A"]},
        ])])
        assert load_dataset(path) == load_dataset(path)

    def test_resolved_gold_text_equals_document_slice(self, tmp_path):
        path = tmp_path / "ds.jsonl"
        text = "Alan Shearer and ALAN SHEARER and alan shearer"
        write_lines(path, [doc_line(text=text, queries=[
            {"qid": "q1", "query": "players", "targets": [{"text": "Alan Shearer"}],
             "target_entities": []},
        ])])
        [record] = load_dataset(path)
        golds = record.queries[0].gold_mentions
        assert len(golds) == 3
        for g in golds:
            assert text[g.span.start:g.span.end] == g.text


class TestPredictions:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "p.jsonl"
        path.write_text(
            json.dumps({"qid": "q1", "predictions": [
                {"text": "Wechat", "start": 0, "end": 6, "score": 2.0},
                {"text": "Weibo", "start": 9, "end": 14, "score": 1.0},
            ]}) + "\n",
            encoding="utf-8",
        )
        [pl] = load_predictions(path)
        assert pl.texts == ["Wechat", "Weibo"]
        assert pl.ranked[0].span == Span(0, 6)
        out = tmp_path / "copy.jsonl"
        write_predictions(out, [pl])
        assert load_predictions(out) == [pl]

    def test_duplicate_qid_rejected(self, tmp_path):
        path = tmp_path / "p.jsonl"
        line = json.dumps({"qid": "q1", "predictions": []})
        path.write_text(line + "\n" + line + "\n", encoding="utf-8")
        with pytest.raises(DatasetFormatError, match="duplicate qid"):
            load_predictions(path)

    def test_increasing_scores_rejected(self, tmp_path):
        path = tmp_path / "p.jsonl"
        path.write_text(json.dumps({"qid": "q1", "predictions": [
            {"text": "a", "score": 1.0}, {"text": "b", "score": 2.0},
        ]}) + "\n", encoding="utf-8")
        with pytest.raises(IntegrityError, match="line 1"):
            load_predictions(path)

    def test_string_only_predictions_allowed(self, tmp_path):
        path = tmp_path / "p.jsonl"
        path.write_text(json.dumps({"qid": "q1", "predictions": [{"text": "a"}]}) + "\n",
                        encoding="utf-8")
        [pl] = load_predictions(path)
        assert pl.ranked[0].span is None

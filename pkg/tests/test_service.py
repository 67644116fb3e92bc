import json
import socket
import threading

import pytest
from fastapi.testclient import TestClient

from ktrlf.service import ServiceConfig, create_app, default_doc_id

TWELVE_SENTENCES = " ".join(f"Sentence number {i} is here." for i in range(1, 13))

DOC_TEXT = "Wechat pay spread fast. Weibo posts fly. Baidu finds. Wechat wins again."


@pytest.fixture
def config(tmp_path):
    gaz = tmp_path / "gazetteer.jsonl"
    gaz.write_text(
        "\n".join(json.dumps({"surface": s, "entity_id": e}) for s, e in [
            ("Wechat", "E_WECHAT"), ("Weibo", "E_WEIBO"), ("Baidu", "E_BAIDU"),
        ]) + "\n",
        encoding="utf-8",
    )
    know = tmp_path / "knowledge"
    know.mkdir()
    (know / "index.json").write_text(
        json.dumps({"E_WECHAT": "WeChat", "E_WEIBO": "Weibo", "E_BAIDU": "Baidu"}),
        encoding="utf-8",
    )
    (know / "E_WECHAT.txt").write_text(TWELVE_SENTENCES, encoding="utf-8")
    (know / "E_WEIBO.txt").write_text("A microblog. Widely used.", encoding="utf-8")
    return ServiceConfig(
        provider="ref",
        provider_d=8,
        gazetteer=str(gaz),
        knowledge_dir=str(know),
        cache_dir=str(tmp_path / "cache"),
        max_document_chars=500,
    )


@pytest.fixture
def client(config):
    return TestClient(create_app(config))


class TestHealth:
    def test_healthz(self, client):
        response = client.get("/v1/healthz")
        assert response.status_code == 200
        assert response.json() == {"status": "ok"}


class TestIndexDocument:
    def test_index_reports_stats(self, client):
        response = client.post("/v1/documents", json={"text": DOC_TEXT})
        assert response.status_code == 200
        body = response.json()
        assert body["doc_id"] == default_doc_id(DOC_TEXT)
        assert body["mention_count"] == 4
        assert body["entity_count"] == 3
        assert body["indexing_ms"] > 0

    def test_reposting_identical_text_is_idempotent(self, client):
        first = client.post("/v1/documents", json={"text": DOC_TEXT}).json()
        second = client.post("/v1/documents", json={"text": DOC_TEXT}).json()
        assert second["doc_id"] == first["doc_id"]
        assert second["indexing_ms"] == 0
        assert second["mention_count"] == first["mention_count"]

    def test_empty_text_is_400(self, client):
        assert client.post("/v1/documents", json={"text": ""}).status_code == 400

    def test_oversized_text_is_413(self, client):
        assert client.post("/v1/documents", json={"text": "x " * 300}).status_code == 413

    def test_explicit_doc_id(self, client):
        body = client.post("/v1/documents", json={"doc_id": "mine", "text": DOC_TEXT}).json()
        assert body["doc_id"] == "mine"
        stats = client.get("/v1/documents/mine").json()
        assert stats["mention_count"] == 4
        assert stats["dims"] == 16

    def test_unknown_document_stats_404(self, client):
        assert client.get("/v1/documents/nope").status_code == 404


class TestQueryDocument:
    def _indexed(self, client):
        return client.post("/v1/documents", json={"text": DOC_TEXT}).json()["doc_id"]

    def test_search_returns_ranked_matches(self, client):
        doc_id = self._indexed(client)
        response = client.post(f"/v1/documents/{doc_id}/search",
                               json={"query": "chinese social platforms"})
        assert response.status_code == 200
        body = response.json()
        assert body["latency_ms"] > 0
        matches = body["matches"]
        assert 0 < len(matches) <= 4
        assert [m["rank"] for m in matches] == list(range(1, len(matches) + 1))
        for m in matches:
            assert DOC_TEXT[m["start"]:m["end"]] == m["text"]
            scores = [x["score"] for x in matches]
            assert scores == sorted(scores, reverse=True)

    def test_unknown_doc_404(self, client):
        response = client.post("/v1/documents/missing/search", json={"query": "x"})
        assert response.status_code == 404

    def test_zero_top_k_400(self, client):
        doc_id = self._indexed(client)
        response = client.post(f"/v1/documents/{doc_id}/search",
                               json={"query": "x", "top_k": 0})
        assert response.status_code == 400

    def test_empty_query_400(self, client):
        doc_id = self._indexed(client)
        response = client.post(f"/v1/documents/{doc_id}/search", json={"query": "  "})
        assert response.status_code == 400

    def test_repeated_request_same_matches(self, client):
        doc_id = self._indexed(client)
        payload = {"query": "apps from china", "top_k": 3}
        a = client.post(f"/v1/documents/{doc_id}/search", json=payload).json()
        b = client.post(f"/v1/documents/{doc_id}/search", json=payload).json()
        assert a["matches"] == b["matches"]

    def test_mode_override_builds_sibling_index(self, client):
        doc_id = self._indexed(client)
        both = client.post(f"/v1/documents/{doc_id}/search",
                           json={"query": "apps", "mode": "both"}).json()
        phrase = client.post(f"/v1/documents/{doc_id}/search",
                             json={"query": "apps", "mode": "phrase-only"}).json()
        assert {m["entity_id"] for m in both["matches"]}  # non-empty
        assert [m["start"] for m in phrase["matches"]]  # built and answered

    def test_dims_mismatch_409_after_provider_change(self, config):
        doc_id = None
        with TestClient(create_app(config)) as client:
            doc_id = client.post("/v1/documents", json={"text": DOC_TEXT}).json()["doc_id"]
        config.provider_d = 16  # provider changed; persisted index is now stale
        with TestClient(create_app(config)) as client:
            response = client.post(f"/v1/documents/{doc_id}/search", json={"query": "apps"})
            assert response.status_code == 409
            assert "re-index" in response.json()["detail"]

    def test_concurrent_queries_match_serial(self, client):
        doc_id = self._indexed(client)
        payload = {"query": "chinese platforms"}
        expected = client.post(f"/v1/documents/{doc_id}/search", json=payload).json()["matches"]
        results = [None] * 6

        def worker(slot):
            response = client.post(f"/v1/documents/{doc_id}/search", json=payload)
            results[slot] = response.json()["matches"]

        threads = [threading.Thread(target=worker, args=(i,)) for i in range(6)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert all(r == expected for r in results)


class TestEntityKnowledge:
    def test_known_entity_truncated_description(self, client):
        body = client.get("/v1/entities/E_WECHAT").json()
        assert body["title"] == "WeChat"
        assert body["description"].endswith("Sentence number 10 is here.")

    def test_unknown_entity_empty_description(self, client):
        body = client.get("/v1/entities/E_NOPE").json()
        assert body == {"entity_id": "E_NOPE", "title": "E_NOPE", "description": ""}

    def test_repeated_calls_identical(self, client):
        assert client.get("/v1/entities/E_WEIBO").json() == \
            client.get("/v1/entities/E_WEIBO").json()


class TestPersistence:
    def test_results_survive_restart(self, config):
        payload = {"query": "social apps", "top_k": 4}
        with TestClient(create_app(config)) as client:
            doc_id = client.post("/v1/documents", json={"text": DOC_TEXT}).json()["doc_id"]
            before = client.post(f"/v1/documents/{doc_id}/search", json=payload).json()
        with TestClient(create_app(config)) as client:
            stats = client.post("/v1/documents", json={"text": DOC_TEXT}).json()
            assert stats["indexing_ms"] == 0  # disk cache hit, no rebuild
            after = client.post(f"/v1/documents/{doc_id}/search", json=payload).json()
        assert after["matches"] == before["matches"]

    def test_warm_query_path_performs_no_network_io(self, config, monkeypatch):
        with TestClient(create_app(config)) as client:
            doc_id = client.post("/v1/documents", json={"text": DOC_TEXT}).json()["doc_id"]

            def refuse(*args, **kwargs):
                raise AssertionError("network I/O attempted on the query path")

            monkeypatch.setattr(socket, "socket", refuse)
            monkeypatch.setattr(socket, "create_connection", refuse)
            response = client.post(f"/v1/documents/{doc_id}/search",
                                   json={"query": "chinese apps"})
            assert response.status_code == 200
            assert response.json()["matches"]


class TestServiceConfig:
    def test_load_json_with_env_overrides(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text(json.dumps({"default_top_k": 7, "cache_dir": "from-file"}),
                        encoding="utf-8")
        config = ServiceConfig.load(path, env={"KTRLF_DEFAULT_TOP_K": "9",
                                               "KTRLF_PROVIDER_D": "128"})
        assert config.default_top_k == 9
        assert config.provider_d == 128
        assert config.cache_dir == "from-file"

    def test_unknown_keys_rejected(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text(json.dumps({"no_such_key": 1}), encoding="utf-8")
        with pytest.raises(ValueError, match="no_such_key"):
            ServiceConfig.load(path, env={})

    def test_cors_origins_from_env(self):
        config = ServiceConfig.load(env={"KTRLF_CORS_ORIGINS": "http://a,http://b"})
        assert config.cors_origins == ["http://a", "http://b"]

    def test_cors_headers_emitted(self, config):
        config.cors_origins = ["http://ui.test"]
        client = TestClient(create_app(config))
        response = client.get("/v1/healthz", headers={"Origin": "http://ui.test"})
        assert response.headers["access-control-allow-origin"] == "http://ui.test"

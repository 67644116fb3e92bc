import json
from pathlib import Path

import pytest

GOLDEN = Path(__file__).parent / "golden"


@pytest.fixture(scope="session")
def golden_dir() -> Path:
    return GOLDEN


@pytest.fixture
def doc_file(tmp_path) -> Path:
    path = tmp_path / "article.txt"
    path.write_text(
        "Wechat is huge in China. Weibo is loud. Baidu finds. Wechat pay wins.",
        encoding="utf-8",
    )
    return path


@pytest.fixture
def gazetteer_file(tmp_path) -> Path:
    path = tmp_path / "gazetteer.jsonl"
    rows = [("Wechat", "E_WECHAT"), ("Weibo", "E_WEIBO"), ("Baidu", "E_BAIDU"),
            ("China", "E_CHINA")]
    path.write_text(
        "\n".join(json.dumps({"surface": s, "entity_id": e}) for s, e in rows) + "\n",
        encoding="utf-8",
    )
    return path


@pytest.fixture
def knowledge_dir(tmp_path) -> Path:
    root = tmp_path / "knowledge"
    root.mkdir()
    (root / "index.json").write_text(
        json.dumps({"E_WECHAT": "WeChat", "E_WEIBO": "Weibo", "E_BAIDU": "Baidu"}),
        encoding="utf-8",
    )
    (root / "E_WECHAT.txt").write_text(
        "WeChat is a messaging platform. Payments flow through it.", encoding="utf-8"
    )
    (root / "E_WEIBO.txt").write_text("Weibo is a microblog. Posts are public.",
                                      encoding="utf-8")
    return root

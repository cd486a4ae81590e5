import json
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from conflens import synthetic
from conflens.reviews import serialize_review_archive


@pytest.fixture(scope="session")
def golden_snippets():
    path = Path(__file__).parent / "data" / "golden_snippets.json"
    return json.loads(path.read_text("utf-8"))


@pytest.fixture()
def rq1_archive_path(tmp_path):
    path = tmp_path / "rq1.jsonl"
    path.write_text(serialize_review_archive(synthetic.pre_post_archive()), "utf-8")
    return path


@pytest.fixture()
def rq2_archive_path(tmp_path):
    path = tmp_path / "rq2.jsonl"
    path.write_text(serialize_review_archive(synthetic.decision_archive()), "utf-8")
    return path


@pytest.fixture()
def churn_archive_path(tmp_path):
    path = tmp_path / "churn.jsonl"
    path.write_text(serialize_review_archive(synthetic.churn_archive()), "utf-8")
    return path

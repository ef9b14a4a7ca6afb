from __future__ import annotations

import json
import subprocess
import sys
from pathlib import Path

import pytest

BLOCKS_DOC = {
    "page_id": "p0", "width": 100.0, "height": 100.0,
    "blocks": [
        {"id": 0, "bbox": [0, 0, 50, 40], "tag": "plain_text",
         "members": [0], "text": "alpha beta gamma"},
        {"id": 1, "bbox": [0, 50, 50, 90], "tag": "figure",
         "members": [1], "text": "delta epsilon"},
        {"id": 2, "bbox": [0, 0, 100, 100], "tag": "abandon",
         "members": [], "mask_of": [[0, 0, 50, 40], [0, 50, 50, 90]],
         "text": None},
    ],
}

QUERIES_DOC = [
    {"query_id": "q0", "text": "alpha beta gamma"},
    {"query_id": "q1", "text": "delta epsilon"},
]


@pytest.fixture
def blocks_json(tmp_path) -> Path:
    path = tmp_path / "blocks.json"
    path.write_text(json.dumps(BLOCKS_DOC))
    return path


@pytest.fixture
def queries_json(tmp_path) -> Path:
    path = tmp_path / "queries.json"
    path.write_text(json.dumps(QUERIES_DOC))
    return path


def run_engine(*argv: str) -> subprocess.CompletedProcess:
    """Invoke the retrieval engine through its CLI, its public surface."""
    return subprocess.run(
        [sys.executable, "-m", "blockrag.cli", *argv],
        capture_output=True, text=True,
    )


@pytest.fixture
def engine():
    return run_engine

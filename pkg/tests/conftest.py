from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from synth import Corpus, build_corpus  # noqa: E402


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def corpus(tmp_path_factory) -> Corpus:
    """The bundled 20-sample synthetic benchmark, built once per session."""
    return build_corpus(tmp_path_factory.mktemp("corpus"))


def run_cli(*argv: str) -> int:
    from blockrag.cli import main

    return main(list(argv))


@pytest.fixture
def cli():
    return run_cli

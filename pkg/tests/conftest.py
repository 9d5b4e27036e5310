from __future__ import annotations

from pathlib import Path

import pytest

from todbench.corpus import load_corpus

REPO_ROOT = Path(__file__).resolve().parent.parent
FIXTURE_CORPUS = REPO_ROOT / "corpus" / "fixture"
GOLDENS = REPO_ROOT / "goldens"


@pytest.fixture(scope="session")
def corpus():
    return load_corpus(FIXTURE_CORPUS)


@pytest.fixture(scope="session")
def registry(corpus):
    return corpus.registry

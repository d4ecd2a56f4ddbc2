import pathlib

import pytest

from geotri import load_gazetteer, load_patterns

FIXTURES = pathlib.Path(__file__).resolve().parent.parent / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir() -> pathlib.Path:
    return FIXTURES


@pytest.fixture(scope="session")
def gazetteer():
    return load_gazetteer(str(FIXTURES / "gazetteer.tsv"))


@pytest.fixture(scope="session")
def patterns():
    return load_patterns(str(FIXTURES / "patterns.tsv"))


@pytest.fixture(scope="session")
def corpus() -> list[str]:
    with open(FIXTURES / "corpus.txt", encoding="utf-8") as handle:
        return [line.strip() for line in handle if line.strip()]


@pytest.fixture(scope="session")
def gold_triplets() -> set[tuple[str, str, str]]:
    gold = set()
    with open(FIXTURES / "corpus_gold.tsv", encoding="utf-8") as handle:
        for line in handle:
            subject, label, obj = line.rstrip("\n").split("\t")
            gold.add((subject, label, obj))
    return gold

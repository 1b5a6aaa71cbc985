import os
from pathlib import Path

import pytest

from dialect_bench.corpus import CorpusSplit, Dialect, Sample, Topic, load_corpus

# Directory holding the official corpus in canonical TSV form. Tests that
# reproduce published figures are skipped when it is absent.
OFFICIAL_CORPUS_ENV = "DIALECT_BENCH_MOROCO"


def official_corpus_dir() -> Path | None:
    candidates = []
    if os.environ.get(OFFICIAL_CORPUS_ENV):
        candidates.append(Path(os.environ[OFFICIAL_CORPUS_ENV]))
    candidates.append(Path(__file__).resolve().parent.parent / "data" / "moroco")
    for c in candidates:
        if (c / "train.tsv").is_file():
            return c
    return None


requires_official_corpus = pytest.mark.skipif(
    official_corpus_dir() is None,
    reason=(
        "official MOROCO corpus not available; ingest it to data/moroco or set "
        f"{OFFICIAL_CORPUS_ENV} to a canonical corpus directory"
    ),
)


@pytest.fixture(scope="session")
def official_corpus() -> CorpusSplit:
    root = official_corpus_dir()
    if root is None:
        pytest.skip("official corpus not available")
    return load_corpus(root)


def make_samples(rows):
    """rows: iterable of (id, dialect, topic, text) tuples."""
    return [Sample(i, Dialect(d), Topic(t), x) for i, d, t, x in rows]


@pytest.fixture
def tiny_split() -> CorpusSplit:
    train = make_samples(
        [
            ("t1", "MD", "politics", "guvernul a decis cînd se va vota"),
            ("t2", "RO", "politics", "guvernul a decis când se va vota"),
            ("t3", "MD", "sports", "meciul de fotbal s-a încheiat"),
            ("t4", "RO", "culture", "piesa de teatru a fost aplaudată"),
        ]
    )
    val = make_samples([("v1", "MD", "finance", "băncile au raportat profituri")])
    test = make_samples([("x1", "RO", "tech", "compania a lansat un telefon nou")])
    return CorpusSplit(train=tuple(train), validation=tuple(val), test=tuple(test))

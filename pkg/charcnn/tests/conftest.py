import os
from pathlib import Path

import numpy as np
import pytest

OFFICIAL_CORPUS_ENV = "DIALECT_BENCH_MOROCO"

DIALECT_WORDS = {
    "MD": ["sînt", "cînd", "pînă", "decît", "tenismen"],
    "RO": ["sunt", "când", "până", "decât", "jucător"],
}
SHARED_WORDS = "de la cu pe un o și nu se a în care este mai dar pentru din".split()
TOPICS = ("culture", "finance", "politics", "science", "sports", "tech")


def official_corpus_dir() -> Path | None:
    candidates = []
    if os.environ.get(OFFICIAL_CORPUS_ENV):
        candidates.append(Path(os.environ[OFFICIAL_CORPUS_ENV]))
    candidates.append(Path(__file__).resolve().parents[2] / "data" / "moroco")
    for c in candidates:
        if (c / "train.tsv").is_file():
            return c
    return None


requires_official_corpus = pytest.mark.skipif(
    official_corpus_dir() is None,
    reason=(
        "official corpus not available; ingest it to data/moroco or set "
        f"{OFFICIAL_CORPUS_ENV}"
    ),
)


def write_dialect_corpus(root: Path, per_dialect=40, seed=0, tokens=40) -> Path:
    """Canonical TSV corpus whose dialect signal is spelling preference."""
    rng = np.random.default_rng(seed)
    root.mkdir(parents=True, exist_ok=True)
    rows = {"train": [], "validation": [], "test": []}
    i = 0
    for dialect in ("MD", "RO"):
        for k in range(per_dialect):
            words = []
            for _ in range(tokens):
                if rng.random() < 0.3:
                    pool = DIALECT_WORDS[dialect]
                else:
                    pool = SHARED_WORDS
                words.append(pool[int(rng.integers(len(pool)))])
            topic = TOPICS[int(rng.integers(len(TOPICS)))]
            subset = "train" if k < per_dialect - 10 else ("validation" if k % 2 else "test")
            rows[subset].append(f"d{i}\t{dialect}\t{topic}\t{' '.join(words)}")
            i += 1
    for name, lines in rows.items():
        (root / f"{name}.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return root


def separable_docs(n_per_class=32, classes=2, length=40, seed=0):
    """Texts with class-disjoint alphabets plus integer labels."""
    pools = ["abcde", "fghij", "klmno"][:classes]
    rng = np.random.default_rng(seed)
    texts, labels = [], []
    for c, pool in enumerate(pools):
        for _ in range(n_per_class):
            texts.append("".join(rng.choice(list(pool), size=length)))
            labels.append(c)
    return texts, np.array(labels, dtype=np.int64)

"""Document encoding and canonical-corpus consumption.

This package talks to the kernel-side toolkit only through its external
interfaces: the canonical TSV corpus files and the JSON report schema. The
TSV reader here is therefore intentionally self-contained.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .alphabet import Alphabet

INPUT_LENGTH = 5000

SUBSETS = ("train", "validation", "test")
DIALECTS = ("MD", "RO")
TOPICS = ("culture", "finance", "politics", "science", "sports", "tech")


@dataclass(frozen=True)
class EncodedDoc:
    """Fixed-length index sequence; positions past true_length hold the pad code."""

    indices: np.ndarray  # int64, shape (length,)
    true_length: int

    def __post_init__(self) -> None:
        if self.indices.ndim != 1:
            raise ValueError("indices must be one-dimensional")
        if self.true_length > self.indices.size:
            raise ValueError("true_length exceeds encoded length")


def encode(text: str, alphabet: Alphabet, length: int = INPUT_LENGTH) -> EncodedDoc:
    """First ``length`` characters mapped to indices; unknowns and padding are 0."""
    kept = text[:length]
    indices = np.zeros(length, dtype=np.int64)
    for i, ch in enumerate(kept):
        indices[i] = alphabet.encode_char(ch)
    return EncodedDoc(indices=indices, true_length=len(kept))


def encode_batch(texts: list[str], alphabet: Alphabet, length: int = INPUT_LENGTH) -> np.ndarray:
    out = np.zeros((len(texts), length), dtype=np.int64)
    for row, text in enumerate(texts):
        kept = text[:length]
        for i, ch in enumerate(kept):
            out[row, i] = alphabet.encode_char(ch)
    return out


# ---------------------------------------------------------------------------
# Canonical corpus TSVs


@dataclass(frozen=True)
class Doc:
    id: str
    dialect: str
    topic: str
    text: str


def _unescape(text: str) -> str:
    out, i = [], 0
    while i < len(text):
        c = text[i]
        if c == "\\" and i + 1 < len(text) and text[i + 1] in ("t", "n", "\\"):
            out.append({"t": "\t", "n": "\n", "\\": "\\"}[text[i + 1]])
            i += 2
        else:
            out.append(c)
            i += 1
    return "".join(out)


def read_subset(path: Path) -> list[Doc]:
    docs = []
    with open(path, encoding="utf-8", newline="") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            cols = line.split("\t")
            if len(cols) < 4:
                raise ValueError(f"{path}:{lineno}: expected 4 tab-separated columns")
            doc = Doc(cols[0], cols[1], cols[2], _unescape(cols[3]))
            if doc.dialect not in DIALECTS:
                raise ValueError(f"{path}:{lineno}: unknown dialect {doc.dialect!r}")
            if doc.topic not in TOPICS:
                raise ValueError(f"{path}:{lineno}: unknown topic {doc.topic!r}")
            docs.append(doc)
    return docs


def read_corpus(root: str | Path) -> dict[str, list[Doc]]:
    root = Path(root)
    corpus = {}
    for name in SUBSETS:
        path = root / f"{name}.tsv"
        if not path.is_file():
            raise FileNotFoundError(f"missing subset file: {path}")
        corpus[name] = read_subset(path)
    return corpus


def corpus_checksum(root: str | Path, masked: bool = True) -> str:
    """Checksum over the canonical subset files; matches the kernel toolkit's
    value for corpora written in canonical form."""
    h = hashlib.sha256()
    h.update(b"masked" if masked else b"raw")
    for name in SUBSETS:
        h.update(name.encode())
        h.update((Path(root) / f"{name}.tsv").read_bytes())
    return h.hexdigest()

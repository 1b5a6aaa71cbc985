"""Character n-gram profiles and presence/intersection string kernels.

A profile stores the distinct character n-grams of a document as 64-bit
fingerprints (sorted ``uint64`` arrays). Windows are taken over the raw
character stream: spaces and punctuation included, case preserved, Unicode
code points kept distinct. Fingerprints mix the window length ``n`` and a
hash seed, so profiles for different lengths never share fingerprints
(modulo audited collisions).

Gram matrices are computed as sparse binary inner products over a joint
per-length vocabulary, which keeps the all-pairs computation over tens of
thousands of documents tractable. Occurrence counts are folded into the same
machinery by expanding a gram with count ``c`` into ``c`` level-tagged
presence bits, so ``sum(min(count_x, count_y))`` is again a dot product.
"""

from __future__ import annotations

import hashlib
import io
import json
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

MAX_NGRAM = 16

_U64 = np.uint64
_MASK64 = (1 << 64) - 1
_POLY_BASE = _U64(1099511628211)  # odd multiplier for the window hash
_AVA1 = _U64(0xBF58476D1CE4E5B9)
_AVA2 = _U64(0x94D049BB133111EB)
_GOLDEN = 0x9E3779B97F4A7C15


class KernelKind(str, Enum):
    PRESENCE = "presence"
    INTERSECTION = "intersection"


class KernelError(Exception):
    pass


class HashCollisionError(KernelError):
    """Two distinct raw windows produced the same fingerprint."""


class CacheInvalidError(KernelError):
    """Profile cache does not match the requested configuration or corpus."""


def _splitmix64(x: int) -> int:
    x = (x + _GOLDEN) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def _avalanche(h: np.ndarray) -> np.ndarray:
    h = (h ^ (h >> _U64(30))) * _AVA1
    h = (h ^ (h >> _U64(27))) * _AVA2
    return h ^ (h >> _U64(31))


def _codepoints(text: str) -> np.ndarray:
    if not text:
        return np.empty(0, dtype=_U64)
    return np.frombuffer(text.encode("utf-32-le"), dtype=np.uint32).astype(_U64)


def window_fingerprints(text: str, n: int, seed: int = 0) -> np.ndarray:
    """Fingerprint of every length-``n`` character window, in window order."""
    if n < 1:
        raise ValueError("n must be >= 1")
    codes = _codepoints(text)
    num = len(codes) - n + 1
    if num <= 0:
        return np.empty(0, dtype=_U64)
    with np.errstate(over="ignore"):
        h = np.zeros(num, dtype=_U64)
        for i in range(n):
            h = h * _POLY_BASE + codes[i : i + num]
        h ^= _U64(_splitmix64(_splitmix64(seed) ^ _splitmix64(n)))
        return _avalanche(h)


@dataclass(frozen=True)
class KernelConfig:
    kind: KernelKind = KernelKind.PRESENCE
    n_low: int = 6
    n_high: int = 6
    normalize: bool = True
    hash_seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", KernelKind(self.kind))
        if not (1 <= self.n_low <= self.n_high <= MAX_NGRAM):
            raise ValueError(
                f"need 1 <= n_low <= n_high <= {MAX_NGRAM}, got [{self.n_low}, {self.n_high}]"
            )

    @property
    def lengths(self) -> range:
        return range(self.n_low, self.n_high + 1)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "n_low": self.n_low,
            "n_high": self.n_high,
            "normalize": self.normalize,
            "hash_seed": self.hash_seed,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "KernelConfig":
        return cls(
            kind=KernelKind(d["kind"]),
            n_low=int(d["n_low"]),
            n_high=int(d["n_high"]),
            normalize=bool(d["normalize"]),
            hash_seed=int(d["hash_seed"]),
        )


class GramVocabulary:
    """Fingerprint -> raw window dictionary with a collision audit.

    Recording the same fingerprint for two distinct raw windows raises
    :class:`HashCollisionError`; at 64 bits this is a corpus-scale sanity
    check rather than an expected event.
    """

    def __init__(self) -> None:
        self._windows: dict[int, str] = {}

    def __len__(self) -> int:
        return len(self._windows)

    def __contains__(self, fingerprint: int) -> bool:
        return int(fingerprint) in self._windows

    def window(self, fingerprint: int) -> str:
        return self._windows[int(fingerprint)]

    def record(self, fingerprints: np.ndarray, windows: Sequence[str]) -> None:
        store = self._windows
        for fp, w in zip(fingerprints.tolist(), windows):
            prev = store.get(fp)
            if prev is None:
                store[fp] = w
            elif prev != w:
                raise HashCollisionError(
                    f"fingerprint {fp:#018x} maps to both {prev!r} and {w!r}"
                )

    def record_text(self, text: str, n: int, seed: int = 0) -> None:
        fps = window_fingerprints(text, n, seed)
        if fps.size == 0:
            return
        uniq, first = np.unique(fps, return_index=True)
        self.record(uniq, [text[i : i + n] for i in first.tolist()])


@dataclass(frozen=True)
class NGramProfile:
    """Distinct n-gram fingerprints of one document, sorted ascending."""

    doc_ref: str
    n: int
    grams: np.ndarray

    @property
    def self_value(self) -> int:
        return int(self.grams.size)


@dataclass(frozen=True)
class CountProfile:
    """Distinct fingerprints plus per-gram occurrence counts (all >= 1)."""

    doc_ref: str
    n: int
    grams: np.ndarray
    counts: np.ndarray

    @property
    def self_value(self) -> int:
        # number of n-gram positions in the document
        return int(self.counts.sum())


def extract_profile(
    text: str, n: int, seed: int = 0, doc_ref: str = "", vocab: GramVocabulary | None = None
) -> NGramProfile:
    """Distinct contiguous character windows of length ``n`` as a sorted set."""
    fps = window_fingerprints(text, n, seed)
    if fps.size == 0:
        return NGramProfile(doc_ref, n, np.empty(0, dtype=_U64))
    uniq, first = np.unique(fps, return_index=True)
    if vocab is not None:
        vocab.record(uniq, [text[i : i + n] for i in first.tolist()])
    return NGramProfile(doc_ref, n, uniq)


def extract_count_profile(
    text: str, n: int, seed: int = 0, doc_ref: str = "", vocab: GramVocabulary | None = None
) -> CountProfile:
    """Distinct windows with occurrence counts."""
    fps = window_fingerprints(text, n, seed)
    if fps.size == 0:
        empty = np.empty(0, dtype=_U64)
        return CountProfile(doc_ref, n, empty, np.empty(0, dtype=np.int64))
    uniq, first, counts = np.unique(fps, return_index=True, return_counts=True)
    if vocab is not None:
        vocab.record(uniq, [text[i : i + n] for i in first.tolist()])
    return CountProfile(doc_ref, n, uniq, counts.astype(np.int64))


@dataclass(frozen=True)
class DocumentProfiles:
    """Per-length profiles of one document under one kernel configuration."""

    doc_ref: str
    kind: KernelKind
    by_n: Mapping[int, NGramProfile | CountProfile]

    def profile(self, n: int) -> NGramProfile | CountProfile:
        try:
            return self.by_n[n]
        except KeyError:
            raise KernelError(f"document {self.doc_ref!r} has no profile for n={n}") from None

    def self_value(self, n_low: int, n_high: int) -> int:
        return sum(self.profile(n).self_value for n in range(n_low, n_high + 1))


def profile_document(
    text: str,
    cfg: KernelConfig,
    doc_ref: str = "",
    vocab: GramVocabulary | None = None,
) -> DocumentProfiles:
    extract = (
        extract_profile if cfg.kind is KernelKind.PRESENCE else extract_count_profile
    )
    by_n = {
        n: extract(text, n, seed=cfg.hash_seed, doc_ref=doc_ref, vocab=vocab)
        for n in cfg.lengths
    }
    return DocumentProfiles(doc_ref, cfg.kind, by_n)


def profile_documents(
    texts: Sequence[str],
    cfg: KernelConfig,
    doc_refs: Sequence[str] | None = None,
    vocab: GramVocabulary | None = None,
    workers: int = 1,
) -> list[DocumentProfiles]:
    """Profile a document collection; order-stable regardless of ``workers``."""
    if doc_refs is None:
        doc_refs = [str(i) for i in range(len(texts))]
    if len(doc_refs) != len(texts):
        raise ValueError("doc_refs length must match texts")
    if workers > 1 and vocab is None and len(texts) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(
                pool.map(lambda it: profile_document(it[0], cfg, it[1]), zip(texts, doc_refs))
            )
    return [
        profile_document(text, cfg, ref, vocab=vocab) for text, ref in zip(texts, doc_refs)
    ]


# ---------------------------------------------------------------------------
# Pairwise kernels


def presence_kernel(p: NGramProfile, q: NGramProfile) -> int:
    """Number of distinct n-grams shared by the two documents."""
    if p.n != q.n:
        raise KernelError(f"mismatched n-gram lengths: {p.n} vs {q.n}")
    return int(np.intersect1d(p.grams, q.grams, assume_unique=True).size)


def intersection_kernel(p: CountProfile, q: CountProfile) -> int:
    """Sum of per-gram minimum occurrence counts over shared n-grams."""
    if p.n != q.n:
        raise KernelError(f"mismatched n-gram lengths: {p.n} vs {q.n}")
    _, pi, qi = np.intersect1d(p.grams, q.grams, assume_unique=True, return_indices=True)
    if pi.size == 0:
        return 0
    return int(np.minimum(p.counts[pi], q.counts[qi]).sum())


def _single_length_kernel(
    p: NGramProfile | CountProfile, q: NGramProfile | CountProfile, kind: KernelKind
) -> int:
    if kind is KernelKind.PRESENCE:
        return presence_kernel(p, q)
    return intersection_kernel(p, q)


def kernel_value(
    x_profiles: DocumentProfiles, y_profiles: DocumentProfiles, cfg: KernelConfig
) -> float | int:
    """Range-summed kernel between two documents, optionally normalized."""
    raw = sum(
        _single_length_kernel(x_profiles.profile(n), y_profiles.profile(n), cfg.kind)
        for n in cfg.lengths
    )
    if not cfg.normalize:
        return raw
    vx = x_profiles.self_value(cfg.n_low, cfg.n_high)
    vy = y_profiles.self_value(cfg.n_low, cfg.n_high)
    if vx == 0 or vy == 0:
        return 0.0
    return raw / float(np.sqrt(float(vx) * float(vy)))


# ---------------------------------------------------------------------------
# Gram matrices


@dataclass(frozen=True)
class GramMatrix:
    row_refs: tuple[str, ...]
    col_refs: tuple[str, ...]
    values: np.ndarray
    symmetric: bool
    config: KernelConfig

    def __post_init__(self) -> None:
        if self.values.shape != (len(self.row_refs), len(self.col_refs)):
            raise ValueError(
                f"values shape {self.values.shape} does not match refs "
                f"({len(self.row_refs)} x {len(self.col_refs)})"
            )
        if self.symmetric and self.row_refs != self.col_refs:
            raise ValueError("symmetric Gram matrix requires identical row/col refs")

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


def _expanded_fingerprints(profile: CountProfile) -> np.ndarray:
    """Level-expand counts: a gram with count c becomes c distinct presence bits."""
    counts = profile.counts
    if counts.size == 0:
        return profile.grams
    max_count = int(counts.max())
    if max_count == 1:
        return profile.grams
    parts = [profile.grams]
    with np.errstate(over="ignore"):
        for level in range(2, max_count + 1):
            sub = profile.grams[counts >= level]
            parts.append(_avalanche(sub ^ _U64(_splitmix64(level))))
    return np.concatenate(parts)


def _length_fps(doc: DocumentProfiles, n: int, kind: KernelKind) -> np.ndarray:
    prof = doc.profile(n)
    if kind is KernelKind.PRESENCE:
        return prof.grams
    return _expanded_fingerprints(prof)


def _incidence_matrix(fps_per_doc: list[np.ndarray], vocab: np.ndarray) -> sp.csr_matrix:
    lengths = np.array([fp.size for fp in fps_per_doc], dtype=np.int64)
    indptr = np.zeros(len(fps_per_doc) + 1, dtype=np.int64)
    np.cumsum(lengths, out=indptr[1:])
    if indptr[-1] == 0:
        indices = np.empty(0, dtype=np.int64)
    else:
        indices = np.searchsorted(vocab, np.concatenate(fps_per_doc)).astype(np.int64)
    data = np.ones(indptr[-1], dtype=np.float64)
    return sp.csr_matrix((data, indices, indptr), shape=(len(fps_per_doc), vocab.size))


def gram_matrix(
    rows: Sequence[DocumentProfiles],
    cols: Sequence[DocumentProfiles] | None = None,
    cfg: KernelConfig | None = None,
    workers: int = 1,
) -> GramMatrix:
    """Pairwise kernel values between two document collections.

    ``values[i][j] == kernel_value(rows[i], cols[j], cfg)``. Passing
    ``cols=None`` computes the symmetric matrix of ``rows`` against itself.
    The result is independent of ``workers``: row blocks partition the output
    and every cell is an exact integer dot product before normalization.
    """
    if cfg is None:
        raise ValueError("cfg is required")
    symmetric = cols is None or cols is rows
    cols_eff = rows if symmetric else cols
    if len(rows) == 0 or len(cols_eff) == 0:
        raise KernelError("empty document collection")

    n_rows, n_cols = len(rows), len(cols_eff)
    values = np.zeros((n_rows, n_cols), dtype=np.float64)
    for n in cfg.lengths:
        row_fps = [_length_fps(d, n, cfg.kind) for d in rows]
        col_fps = row_fps if symmetric else [_length_fps(d, n, cfg.kind) for d in cols_eff]
        nonempty = [fp for fp in row_fps if fp.size] + (
            [] if symmetric else [fp for fp in col_fps if fp.size]
        )
        if not nonempty:
            continue
        joint = np.unique(np.concatenate(nonempty))
        x = _incidence_matrix(row_fps, joint)
        y = x if symmetric else _incidence_matrix(col_fps, joint)
        yt = y.T.tocsr()

        block = 1024
        starts = range(0, n_rows, block)

        def _compute(start: int) -> tuple[int, np.ndarray]:
            stop = min(start + block, n_rows)
            return start, np.asarray((x[start:stop] @ yt).todense())

        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                for start, chunk in pool.map(_compute, starts):
                    values[start : start + chunk.shape[0]] += chunk
        else:
            for start in starts:
                start, chunk = _compute(start)
                values[start : start + chunk.shape[0]] += chunk

    if cfg.normalize:
        row_self = np.array(
            [d.self_value(cfg.n_low, cfg.n_high) for d in rows], dtype=np.float64
        )
        col_self = (
            row_self
            if symmetric
            else np.array(
                [d.self_value(cfg.n_low, cfg.n_high) for d in cols_eff], dtype=np.float64
            )
        )
        denom = np.sqrt(np.outer(row_self, col_self))
        with np.errstate(invalid="ignore", divide="ignore"):
            values = np.where(denom > 0, values / denom, 0.0)

    return GramMatrix(
        row_refs=tuple(d.doc_ref for d in rows),
        col_refs=tuple(d.doc_ref for d in cols_eff),
        values=values,
        symmetric=symmetric,
        config=cfg,
    )


# ---------------------------------------------------------------------------
# Binary containers: Gram matrix export and profile cache

_GRAM_MAGIC = b"DBGRAM01"
_PROF_MAGIC = b"DBPROF01"


def _write_json_block(fh, obj: dict) -> None:
    blob = json.dumps(obj, sort_keys=True).encode("utf-8")
    fh.write(struct.pack("<Q", len(blob)))
    fh.write(blob)


def _read_json_block(fh) -> dict:
    (length,) = struct.unpack("<Q", fh.read(8))
    return json.loads(fh.read(length).decode("utf-8"))


def save_gram(matrix: GramMatrix, path: str | Path) -> None:
    """Row-major float64 binary with a self-describing JSON header."""
    with open(path, "wb") as fh:
        fh.write(_GRAM_MAGIC)
        _write_json_block(
            fh,
            {
                "rows": len(matrix.row_refs),
                "cols": len(matrix.col_refs),
                "row_refs": list(matrix.row_refs),
                "col_refs": list(matrix.col_refs),
                "symmetric": matrix.symmetric,
                "config": matrix.config.to_dict(),
            },
        )
        fh.write(np.ascontiguousarray(matrix.values, dtype="<f8").tobytes())


def load_gram(path: str | Path) -> GramMatrix:
    with open(path, "rb") as fh:
        if fh.read(len(_GRAM_MAGIC)) != _GRAM_MAGIC:
            raise KernelError(f"{path}: not a Gram matrix file")
        header = _read_json_block(fh)
        n_rows, n_cols = header["rows"], header["cols"]
        values = np.frombuffer(fh.read(n_rows * n_cols * 8), dtype="<f8").reshape(
            n_rows, n_cols
        )
    return GramMatrix(
        row_refs=tuple(header["row_refs"]),
        col_refs=tuple(header["col_refs"]),
        values=values.copy(),
        symmetric=header["symmetric"],
        config=KernelConfig.from_dict(header["config"]),
    )


def export_gram_text(matrix: GramMatrix, path: str | Path) -> None:
    """Debug-friendly triplet dump: row_ref<TAB>col_ref<TAB>value."""
    with open(path, "w", encoding="utf-8") as fh:
        for i, r in enumerate(matrix.row_refs):
            for j, c in enumerate(matrix.col_refs):
                fh.write(f"{r}\t{c}\t{matrix.values[i, j]!r}\n")


def save_profiles(
    profiles: Sequence[DocumentProfiles],
    cfg: KernelConfig,
    corpus_checksum: str,
    path: str | Path,
) -> None:
    """Profile cache: header (config, hash seed, corpus checksum) plus arrays."""
    with open(path, "wb") as fh:
        fh.write(_PROF_MAGIC)
        _write_json_block(
            fh,
            {
                "config": cfg.to_dict(),
                "corpus_checksum": corpus_checksum,
                "documents": len(profiles),
            },
        )
        for doc in profiles:
            ref = doc.doc_ref.encode("utf-8")
            fh.write(struct.pack("<I", len(ref)))
            fh.write(ref)
            for n in cfg.lengths:
                prof = doc.profile(n)
                fh.write(struct.pack("<Q", prof.grams.size))
                fh.write(np.ascontiguousarray(prof.grams, dtype="<u8").tobytes())
                if cfg.kind is KernelKind.INTERSECTION:
                    fh.write(np.ascontiguousarray(prof.counts, dtype="<i8").tobytes())


def load_profiles(
    path: str | Path, cfg: KernelConfig, corpus_checksum: str
) -> list[DocumentProfiles]:
    """Load a profile cache, refusing stale or mismatched caches."""
    with open(path, "rb") as fh:
        if fh.read(len(_PROF_MAGIC)) != _PROF_MAGIC:
            raise KernelError(f"{path}: not a profile cache")
        header = _read_json_block(fh)
        if header["config"] != cfg.to_dict():
            raise CacheInvalidError(f"{path}: cache built with a different kernel config")
        if header["corpus_checksum"] != corpus_checksum:
            raise CacheInvalidError(f"{path}: corpus checksum mismatch")
        out: list[DocumentProfiles] = []
        for _ in range(header["documents"]):
            (ref_len,) = struct.unpack("<I", fh.read(4))
            ref = fh.read(ref_len).decode("utf-8")
            by_n: dict[int, NGramProfile | CountProfile] = {}
            for n in cfg.lengths:
                (size,) = struct.unpack("<Q", fh.read(8))
                grams = np.frombuffer(fh.read(size * 8), dtype="<u8").astype(_U64)
                if cfg.kind is KernelKind.INTERSECTION:
                    counts = np.frombuffer(fh.read(size * 8), dtype="<i8").astype(np.int64)
                    by_n[n] = CountProfile(ref, n, grams, counts)
                else:
                    by_n[n] = NGramProfile(ref, n, grams)
            out.append(DocumentProfiles(ref, cfg.kind, by_n))
    return out

"""Corpus loading, validation, NE masking, stratified splitting and statistics.

The canonical on-disk format is one UTF-8 TSV per subset (``train.tsv``,
``validation.tsv``, ``test.tsv``) with columns ``id<TAB>dialect<TAB>topic<TAB>text``
and no header. An optional flat key=value layout config adapts upstream
releases that use different filenames, column orders or label spellings.
"""

from __future__ import annotations

import hashlib
import re
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

NE_TOKEN = "$NE$"

SUBSET_NAMES = ("train", "validation", "test")

_WS_RUN = re.compile(r"\s+")


class Dialect(str, Enum):
    MD = "MD"
    RO = "RO"


class Topic(str, Enum):
    CULTURE = "culture"
    FINANCE = "finance"
    POLITICS = "politics"
    SCIENCE = "science"
    SPORTS = "sports"
    TECH = "tech"


class NePolicy(str, Enum):
    KEEP = "keep"
    MASK = "mask"


class CorpusError(Exception):
    """Base class for corpus ingestion/validation failures."""


class MissingSubsetError(CorpusError):
    pass


@dataclass(frozen=True)
class RowError:
    file: str
    row: int
    message: str

    def __str__(self) -> str:
        return f"{self.file}:{self.row}: {self.message}"


class CorpusValidationError(CorpusError):
    """Raised with the full list of rejected rows."""

    def __init__(self, errors: Sequence[RowError]):
        self.errors = list(errors)
        head = "; ".join(str(e) for e in self.errors[:5])
        more = f" (+{len(self.errors) - 5} more)" if len(self.errors) > 5 else ""
        super().__init__(f"{len(self.errors)} invalid rows: {head}{more}")


def normalize_text(text: str) -> str:
    """Collapse consecutive whitespace to a single space and trim the ends.

    Tabs and newlines are whitespace, so normalized text is single-line.
    """
    return _WS_RUN.sub(" ", text).strip()


def count_tokens(text: str) -> int:
    """Number of maximal non-space runs."""
    return len(text.split())


@dataclass(frozen=True)
class Sample:
    """One news document with dialect and topic labels.

    Text is whitespace-normalized on construction; empty text is rejected.
    """

    id: str
    dialect: Dialect
    topic: Topic
    text: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "dialect", Dialect(self.dialect))
        object.__setattr__(self, "topic", Topic(self.topic))
        normalized = normalize_text(self.text)
        if not normalized:
            raise ValueError(f"sample {self.id!r}: empty text after normalization")
        object.__setattr__(self, "text", normalized)


# A "$NE" not followed by "$" (or a dangling "NE$") indicates a mangled placeholder.
_BAD_NE = re.compile(r"\$NE(?!\$)|(?<!\$)NE\$")


@dataclass(frozen=True)
class CorpusSplit:
    """Immutable train/validation/test partition of labeled samples."""

    train: tuple[Sample, ...]
    validation: tuple[Sample, ...]
    test: tuple[Sample, ...]
    ner_masked: bool = True

    def __post_init__(self) -> None:
        object.__setattr__(self, "train", tuple(self.train))
        object.__setattr__(self, "validation", tuple(self.validation))
        object.__setattr__(self, "test", tuple(self.test))
        seen: dict[str, str] = {}
        for name in SUBSET_NAMES:
            for s in self.subset(name):
                if s.id in seen:
                    raise CorpusError(
                        f"duplicate sample id {s.id!r} in {name!r} (already in {seen[s.id]!r})"
                    )
                seen[s.id] = name
        if self.ner_masked:
            for name in SUBSET_NAMES:
                for s in self.subset(name):
                    if _BAD_NE.search(s.text):
                        raise CorpusError(
                            f"sample {s.id!r}: malformed named-entity placeholder "
                            f"(expected literal {NE_TOKEN!r})"
                        )

    def subset(self, name: str) -> tuple[Sample, ...]:
        if name not in SUBSET_NAMES:
            raise KeyError(name)
        return getattr(self, name)

    def subsets(self) -> dict[str, tuple[Sample, ...]]:
        return {name: self.subset(name) for name in SUBSET_NAMES}

    def __len__(self) -> int:
        return len(self.train) + len(self.validation) + len(self.test)


# ---------------------------------------------------------------------------
# Canonical TSV format


def _escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace("\t", "\\t").replace("\n", "\\n")


def _unescape(text: str) -> str:
    out: list[str] = []
    it = iter(range(len(text)))
    i = 0
    while i < len(text):
        c = text[i]
        if c == "\\" and i + 1 < len(text):
            nxt = text[i + 1]
            if nxt == "t":
                out.append("\t")
                i += 2
                continue
            if nxt == "n":
                out.append("\n")
                i += 2
                continue
            if nxt == "\\":
                out.append("\\")
                i += 2
                continue
        out.append(c)
        i += 1
    return "".join(out)


@dataclass
class LayoutConfig:
    """Maps upstream filenames / column indices onto the canonical fields.

    Parsed from a flat ``key = value`` file. Recognized keys::

        train.file / validation.file / test.file   relative file names
        separator                                  "tab" (default) or "comma" or a literal
        id.column / dialect.column / topic.column / text.column
                                                   0-based column indices
        dialect.map.<raw> = MD|RO                  raw label -> canonical dialect
        topic.map.<raw>   = culture|...|tech       raw label -> canonical topic
        encoding                                   default utf-8
    """

    files: dict[str, str] = field(
        default_factory=lambda: {n: f"{n}.tsv" for n in SUBSET_NAMES}
    )
    separator: str = "\t"
    columns: dict[str, int] = field(
        default_factory=lambda: {"id": 0, "dialect": 1, "topic": 2, "text": 3}
    )
    dialect_map: dict[str, str] = field(default_factory=dict)
    topic_map: dict[str, str] = field(default_factory=dict)
    encoding: str = "utf-8"

    @classmethod
    def from_file(cls, path: str | Path) -> "LayoutConfig":
        cfg = cls()
        for lineno, raw in enumerate(Path(path).read_text("utf-8").splitlines(), 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise CorpusError(f"{path}:{lineno}: expected key = value")
            key, _, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if key.endswith(".file") and key[:-5] in SUBSET_NAMES:
                cfg.files[key[:-5]] = value
            elif key == "separator":
                cfg.separator = {"tab": "\t", "comma": ","}.get(value, value)
            elif key == "encoding":
                cfg.encoding = value
            elif key.endswith(".column") and key[:-7] in cfg.columns:
                cfg.columns[key[:-7]] = int(value)
            elif key.startswith("dialect.map."):
                cfg.dialect_map[key[len("dialect.map.") :]] = value
            elif key.startswith("topic.map."):
                cfg.topic_map[key[len("topic.map.") :]] = value
            else:
                raise CorpusError(f"{path}:{lineno}: unknown layout key {key!r}")
        return cfg


def _parse_subset(
    path: Path, layout: LayoutConfig, errors: list[RowError]
) -> list[Sample]:
    samples: list[Sample] = []
    needed = max(layout.columns.values()) + 1
    with open(path, encoding=layout.encoding, newline="") as fh:
        for row_no, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            cols = line.split(layout.separator)
            if len(cols) < needed:
                errors.append(
                    RowError(path.name, row_no, f"expected {needed} columns, got {len(cols)}")
                )
                continue
            raw_dialect = cols[layout.columns["dialect"]]
            raw_topic = cols[layout.columns["topic"]]
            dialect = layout.dialect_map.get(raw_dialect, raw_dialect)
            topic = layout.topic_map.get(raw_topic, raw_topic)
            try:
                Dialect(dialect)
            except ValueError:
                errors.append(RowError(path.name, row_no, f"unknown dialect label {raw_dialect!r}"))
                continue
            try:
                Topic(topic)
            except ValueError:
                errors.append(RowError(path.name, row_no, f"unknown topic label {raw_topic!r}"))
                continue
            text = _unescape(cols[layout.columns["text"]])
            try:
                sample = Sample(cols[layout.columns["id"]], Dialect(dialect), Topic(topic), text)
            except ValueError:
                errors.append(RowError(path.name, row_no, "empty text"))
                continue
            samples.append(sample)
    return samples


def load_corpus(
    root_path: str | Path,
    layout: LayoutConfig | None = None,
    ner_masked: bool = True,
) -> CorpusSplit:
    """Load the three subsets from ``root_path``, rejecting malformed rows.

    Raises :class:`MissingSubsetError` if a subset file is absent and
    :class:`CorpusValidationError` with row diagnostics if any row is invalid.
    """
    root = Path(root_path)
    layout = layout or LayoutConfig()
    paths = {name: root / layout.files[name] for name in SUBSET_NAMES}
    missing = [str(p) for p in paths.values() if not p.is_file()]
    if missing:
        raise MissingSubsetError(f"missing subset file(s): {', '.join(missing)}")
    errors: list[RowError] = []
    parsed = {name: _parse_subset(paths[name], layout, errors) for name in SUBSET_NAMES}
    seen: dict[str, tuple[str, int]] = {}
    for name in SUBSET_NAMES:
        kept = []
        for idx, s in enumerate(parsed[name]):
            if s.id in seen:
                errors.append(RowError(layout.files[name], idx + 1, f"duplicate id {s.id!r}"))
            else:
                seen[s.id] = (name, idx)
                kept.append(s)
        parsed[name] = kept
    if errors:
        raise CorpusValidationError(errors)
    return CorpusSplit(
        train=tuple(parsed["train"]),
        validation=tuple(parsed["validation"]),
        test=tuple(parsed["test"]),
        ner_masked=ner_masked,
    )


def write_corpus(split: CorpusSplit, out_dir: str | Path) -> dict[str, Path]:
    """Write the canonical TSVs; returns the written paths per subset."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: dict[str, Path] = {}
    for name in SUBSET_NAMES:
        path = out / f"{name}.tsv"
        with open(path, "w", encoding="utf-8", newline="") as fh:
            for s in split.subset(name):
                fh.write(
                    f"{s.id}\t{s.dialect.value}\t{s.topic.value}\t{_escape(s.text)}\n"
                )
        written[name] = path
    return written


def corpus_checksum(split: CorpusSplit) -> str:
    """Deterministic sha256 over the canonical serialization of all subsets."""
    h = hashlib.sha256()
    h.update(b"masked" if split.ner_masked else b"raw")
    for name in SUBSET_NAMES:
        h.update(name.encode())
        for s in split.subset(name):
            h.update(
                f"{s.id}\t{s.dialect.value}\t{s.topic.value}\t{_escape(s.text)}\n".encode()
            )
    return h.hexdigest()


# ---------------------------------------------------------------------------
# Named-entity policy


def mask_text(text: str, spans: Iterable[str]) -> str:
    """Replace each entity span with the single token $NE$ (longest span first)."""
    for span in sorted(set(spans), key=lambda s: (-len(s), s)):
        if span:
            text = text.replace(span, NE_TOKEN)
    return normalize_text(text)


def apply_ne_policy(
    split: CorpusSplit,
    policy: NePolicy | str,
    entity_spans: Callable[[Sample], Iterable[str]] | None = None,
) -> CorpusSplit:
    """Return the corpus under the requested named-entity policy.

    ``keep`` is the identity and requires a raw (unmasked) corpus. ``mask`` is
    idempotent on pre-masked corpora; on raw corpora it needs ``entity_spans``,
    a function yielding the entity substrings of a sample.
    """
    policy = NePolicy(policy)
    if policy is NePolicy.KEEP:
        if split.ner_masked:
            raise CorpusError("keep policy requested but only a masked variant is loaded")
        return split
    if split.ner_masked:
        return split
    if entity_spans is None:
        raise CorpusError("mask policy on a raw corpus requires an entity_spans function")

    def _mask(s: Sample) -> Sample:
        return Sample(s.id, s.dialect, s.topic, mask_text(s.text, entity_spans(s)))

    return CorpusSplit(
        train=tuple(_mask(s) for s in split.train),
        validation=tuple(_mask(s) for s in split.validation),
        test=tuple(_mask(s) for s in split.test),
        ner_masked=True,
    )


# ---------------------------------------------------------------------------
# Stratified splitting


def _allocate(total: int, ratios: Sequence[float]) -> list[int]:
    """Largest-remainder apportionment of ``total`` into len(ratios) parts."""
    raw = [total * r for r in ratios]
    counts = [int(x) for x in raw]
    short = total - sum(counts)
    remainders = sorted(
        range(len(ratios)), key=lambda i: (-(raw[i] - counts[i]), i)
    )
    for i in remainders[:short]:
        counts[i] += 1
    return counts


def stratified_split(
    samples: Sequence[Sample],
    ratios: tuple[float, float, float],
    seed: int,
    ner_masked: bool = True,
) -> CorpusSplit:
    """Partition samples into train/validation/test preserving (dialect, topic) strata.

    Per-stratum subset sizes match the ratios within one sample; membership is
    deterministic for a fixed seed.
    """
    import numpy as np

    if len(ratios) != 3:
        raise ValueError("exactly three ratios required")
    if any(r <= 0 for r in ratios):
        raise ValueError("ratios must be positive")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must sum to 1 (got {sum(ratios)!r})")

    strata: dict[tuple[Dialect, Topic], list[int]] = {}
    for idx, s in enumerate(samples):
        strata.setdefault((s.dialect, s.topic), []).append(idx)
    for key, members in strata.items():
        if len(members) < 3:
            raise ValueError(
                f"stratum {key[0].value}/{key[1].value} has only {len(members)} samples (need >= 3)"
            )

    rng = np.random.default_rng(seed)
    assigned: dict[int, int] = {}
    for key in sorted(strata, key=lambda k: (k[0].value, k[1].value)):
        members = strata[key]
        order = rng.permutation(len(members))
        counts = _allocate(len(members), ratios)
        bucket_of = (
            [0] * counts[0] + [1] * counts[1] + [2] * counts[2]
        )
        for pos, member_pos in enumerate(order):
            assigned[members[member_pos]] = bucket_of[pos]

    buckets: tuple[list[Sample], list[Sample], list[Sample]] = ([], [], [])
    for idx, s in enumerate(samples):
        buckets[assigned[idx]].append(s)
    return CorpusSplit(
        train=tuple(buckets[0]),
        validation=tuple(buckets[1]),
        test=tuple(buckets[2]),
        ner_masked=ner_masked,
    )


def stratified_subsample(
    samples: Sequence[Sample], per_dialect: int, seed: int
) -> list[Sample]:
    """Seeded subsample keeping ``per_dialect`` samples per dialect.

    Within each dialect the topic distribution is preserved (largest-remainder
    apportionment over topics). Output keeps the input order.
    """
    import numpy as np

    by_dialect: dict[Dialect, dict[Topic, list[int]]] = {}
    for idx, s in enumerate(samples):
        by_dialect.setdefault(s.dialect, {}).setdefault(s.topic, []).append(idx)

    rng = np.random.default_rng(seed)
    chosen: set[int] = set()
    for dialect in sorted(by_dialect, key=lambda d: d.value):
        topics = sorted(by_dialect[dialect], key=lambda t: t.value)
        pools = [by_dialect[dialect][t] for t in topics]
        total = sum(len(p) for p in pools)
        if per_dialect > total:
            raise ValueError(
                f"dialect {dialect.value} has only {total} samples (< {per_dialect})"
            )
        quotas = [
            min(q, len(p))
            for q, p in zip(_allocate(per_dialect, [len(p) / total for p in pools]), pools)
        ]
        # rounding may overshoot a small topic; top up the largest pools
        deficit = per_dialect - sum(quotas)
        while deficit > 0:
            i = max(range(len(pools)), key=lambda j: len(pools[j]) - quotas[j])
            quotas[i] += 1
            deficit -= 1
        for pool, quota in zip(pools, quotas):
            picked = rng.choice(len(pool), size=quota, replace=False)
            chosen.update(pool[i] for i in picked)
    return [s for i, s in enumerate(samples) if i in chosen]


# ---------------------------------------------------------------------------
# Statistics


@dataclass(frozen=True)
class CorpusStats:
    samples: dict[str, int]
    tokens: dict[str, int]
    dialect_hist: dict[str, dict[str, int]]
    topic_hist: dict[str, dict[str, int]]
    mean_tokens_per_sample: float

    @property
    def total_samples(self) -> int:
        return sum(self.samples.values())

    @property
    def total_tokens(self) -> int:
        return sum(self.tokens.values())

    def dialect_totals(self) -> dict[str, int]:
        totals: Counter[str] = Counter()
        for hist in self.dialect_hist.values():
            totals.update(hist)
        return dict(totals)

    def topic_totals(self) -> dict[str, int]:
        totals: Counter[str] = Counter()
        for hist in self.topic_hist.values():
            totals.update(hist)
        return dict(totals)


def corpus_stats(split: CorpusSplit) -> CorpusStats:
    """Per-subset sample/token counts and label histograms."""
    samples: dict[str, int] = {}
    tokens: dict[str, int] = {}
    dialect_hist: dict[str, dict[str, int]] = {}
    topic_hist: dict[str, dict[str, int]] = {}
    for name in SUBSET_NAMES:
        subset = split.subset(name)
        samples[name] = len(subset)
        tokens[name] = sum(count_tokens(s.text) for s in subset)
        dialect_hist[name] = dict(Counter(s.dialect.value for s in subset))
        topic_hist[name] = dict(Counter(s.topic.value for s in subset))
    total = sum(samples.values())
    mean = (sum(tokens.values()) / total) if total else 0.0
    return CorpusStats(samples, tokens, dialect_hist, topic_hist, mean)

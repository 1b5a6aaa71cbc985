"""Seeded synthetic corpora for tests, demos and pipeline shakedowns.

Two generators are provided: a trivially separable corpus whose classes use
disjoint character sets, and a surrogate news corpus in which the two
dialects share a vocabulary but differ in spelling preferences and word
choice, roughly mimicking how real Moldavian/Romanian text differs. The
surrogate is NOT a substitute for the official corpus when reproducing
published figures; it exists so the full pipeline can be exercised
end-to-end without external data.
"""

from __future__ import annotations

import numpy as np

from .corpus import CorpusSplit, Dialect, Sample, Topic, stratified_split

_SHARED_WORDS = (
    "de la cu pe un o și nu se a în care este mai dar pentru din ce au fost "
    "după între acest această toate fiind prin asupra către fără or pot"
).split()

# spelling/lexical preferences per dialect (î-internal forms vs â-internal forms)
_DIALECT_VARIANTS = [
    ("sînt", "sunt"),
    ("cînd", "când"),
    ("pînă", "până"),
    ("decît", "decât"),
    ("cîteva", "câteva"),
    ("cuvîntul", "cuvântul"),
    ("tenismen", "jucător de tenis"),
    ("oleacă", "puțin"),
]

_TOPIC_WORDS = {
    Topic.CULTURE: "teatru muzică artist scenă piesă actorul spectacol scriitor".split(),
    Topic.FINANCE: "bănci monede afaceri exporturi produse economie tranzacție firme".split(),
    Topic.POLITICS: "politica președinte primar partidul democrație parlament guvern vot".split(),
    Topic.SCIENCE: "cercetare astronomie planeta universitatea teorie studiu experiment date".split(),
    Topic.SPORTS: "fotbal meciul jucătorul antrenorul clubul campion echipe turneu".split(),
    Topic.TECH: "mașini utilizator telefon companie tehnologie internet rețea aplicație".split(),
}


def surrogate_samples(
    n_per_dialect: int,
    seed: int = 0,
    tokens_low: int = 60,
    tokens_high: int = 160,
    dialect_fidelity: float = 0.9,
    ne_rate: float = 0.03,
    id_prefix: str = "syn",
) -> list[Sample]:
    """Dialect- and topic-labeled word-soup documents.

    Each document mixes shared function words, topic-specific words and
    dialect-marked spelling variants; ``dialect_fidelity`` is the probability
    that a marked word uses the writer's own dialectal form, so the task is
    separable but not degenerate.
    """
    rng = np.random.default_rng(seed)
    topics = list(Topic)
    samples: list[Sample] = []
    counter = 0
    for dialect in (Dialect.MD, Dialect.RO):
        own = 0 if dialect is Dialect.MD else 1
        for _ in range(n_per_dialect):
            topic = topics[int(rng.integers(len(topics)))]
            n_tokens = int(rng.integers(tokens_low, tokens_high + 1))
            words: list[str] = []
            for _ in range(n_tokens):
                u = rng.random()
                if u < ne_rate:
                    words.append("$NE$")
                elif u < 0.15:
                    pair = _DIALECT_VARIANTS[int(rng.integers(len(_DIALECT_VARIANTS)))]
                    side = own if rng.random() < dialect_fidelity else 1 - own
                    words.append(pair[side])
                elif u < 0.40:
                    tw = _TOPIC_WORDS[topic]
                    words.append(tw[int(rng.integers(len(tw)))])
                else:
                    words.append(_SHARED_WORDS[int(rng.integers(len(_SHARED_WORDS)))])
            samples.append(
                Sample(f"{id_prefix}-{counter:06d}", dialect, topic, " ".join(words))
            )
            counter += 1
    return samples


def surrogate_corpus(
    n_per_dialect: int,
    seed: int = 0,
    ratios: tuple[float, float, float] = (0.65, 0.175, 0.175),
    **kwargs,
) -> CorpusSplit:
    """Stratified split over :func:`surrogate_samples`."""
    samples = surrogate_samples(n_per_dialect, seed=seed, **kwargs)
    return stratified_split(samples, ratios, seed=seed, ner_masked=True)


_CLASS_ALPHABETS = "abcde fghij klmno pqrst uvwxy z0123".split()


def separable_samples(
    n_per_class: int,
    classes: int = 2,
    seed: int = 0,
    length: int = 40,
    id_prefix: str = "sep",
) -> tuple[list[str], list[int]]:
    """Texts whose classes use disjoint alphabets: any sane model reaches 100%."""
    if classes > len(_CLASS_ALPHABETS):
        raise ValueError("too many classes")
    rng = np.random.default_rng(seed)
    texts: list[str] = []
    labels: list[int] = []
    for c in range(classes):
        alphabet = _CLASS_ALPHABETS[c]
        for _ in range(n_per_class):
            chars = [alphabet[int(rng.integers(len(alphabet)))] for _ in range(length)]
            texts.append("".join(chars))
            labels.append(c)
    return texts, labels

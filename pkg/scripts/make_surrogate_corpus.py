#!/usr/bin/env python3
"""Generate a seeded surrogate corpus in the canonical TSV layout.

Useful for shaking down the full pipeline without the official data:

    python scripts/make_surrogate_corpus.py --out data/surrogate --per-dialect 300
    dialect-bench train --corpus data/surrogate --task dialect_binary --out model.bin
"""

import argparse
from pathlib import Path

from dialect_bench.corpus import corpus_stats, write_corpus
from dialect_bench.synthetic import surrogate_corpus


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--per-dialect", type=int, default=300)
    parser.add_argument("--seed", type=int, default=42)
    args = parser.parse_args()

    split = surrogate_corpus(args.per_dialect, seed=args.seed)
    write_corpus(split, Path(args.out))
    stats = corpus_stats(split)
    print(
        "wrote {train}/{validation}/{test} samples to {out}".format(
            out=args.out, **stats.samples
        )
    )


if __name__ == "__main__":
    main()

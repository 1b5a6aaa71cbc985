#!/usr/bin/env python3
"""Run the KRR baseline on all five tasks and emit one merged metrics grid.

    python scripts/run_benchmark.py --corpus data/moroco --out results/

Writes per-task JSON reports plus a combined markdown grid (tasks x models x
metrics). CNN reports produced by the charcnn package can be merged into the
same grid afterwards with `dialect-bench report`.
"""

import argparse
import time
from pathlib import Path

from dialect_bench.corpus import load_corpus
from dialect_bench.evaluation import (
    ALL_TASKS,
    KrrHyperparams,
    TaskSpec,
    emit_report,
    run_task,
)
from dialect_bench.kernel import KernelConfig


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--corpus", required=True, help="canonical corpus directory")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--ngram", type=int, default=6)
    parser.add_argument("--lambda", dest="lam", type=float, default=1e-5)
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    corpus = load_corpus(args.corpus)
    hp = KrrHyperparams(
        kernel=KernelConfig(n_low=args.ngram, n_high=args.ngram, normalize=True),
        lam=args.lam,
        seed=args.seed,
        workers=args.workers,
    )
    out = Path(args.out)
    reports = []
    for task_id in ALL_TASKS:
        t0 = time.perf_counter()
        run = run_task(TaskSpec.for_task(task_id), corpus, hyperparams=hp)
        reports.extend([run.validation, run.test])
        emit_report([run.validation, run.test], "json", out / f"{task_id.value}.json")
        print(
            f"{task_id.value}: val acc {run.validation.accuracy:.4f}, "
            f"test acc {run.test.accuracy:.4f} ({time.perf_counter() - t0:.1f}s)"
        )
    grid = emit_report(reports, "markdown", out / "grid.md")
    print(f"grid written to {grid}")


if __name__ == "__main__":
    main()

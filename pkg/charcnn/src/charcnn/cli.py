"""CLI: `charcnn audit` (architecture numbers) and `charcnn train`."""

from __future__ import annotations

import argparse
import json
import sys
import time

from .alphabet import build_alphabet
from .model import CharCnn, CnnConfig, flatten_size, layer_lengths, parameter_count, se_parameter_delta
from .training import TASKS, run_task


def cmd_audit(args) -> int:
    classes = args.classes
    base = CnnConfig(classes=classes, input_length=args.max_chars)
    se = CnnConfig(classes=classes, input_length=args.max_chars, se_enabled=True)
    alphabet = build_alphabet()
    print(f"alphabet symbols: {len(alphabet)}")
    print(f"layer lengths (conv/pool alternating): {layer_lengths(base)}")
    print(f"flatten size: {flatten_size(base)}")
    p_base = parameter_count(CharCnn(base))
    p_se = parameter_count(CharCnn(se))
    print(f"parameters: {p_base:,} (cnn), {p_se:,} (cnn+se), delta {p_se - p_base:,}")
    print(f"audited SE delta: {se_parameter_delta(se):,}; bottleneck width {se.se_bottleneck}")
    return 0


def cmd_train(args) -> int:
    config = CnnConfig(
        classes=2 if args.task == "dialect_binary" else 6,
        input_length=args.max_chars,
        se_enabled=args.model == "cnn-se",
        lr=args.lr,
        batch_size=args.batch_size,
        epochs=args.epochs,
        seed=args.seed,
    )
    t0 = time.perf_counter()
    summary = run_task(
        args.corpus,
        args.task,
        config,
        args.out,
        max_steps=args.max_steps,
        limit_per_subset=args.limit,
    )
    elapsed = time.perf_counter() - t0
    print(
        f"{summary['task']} [{summary['model']}]: validation acc "
        f"{summary['validation_accuracy']:.4f}, test acc {summary['test_accuracy']:.4f} "
        f"({summary['steps']} steps, {elapsed:.0f}s)"
    )
    print(f"reports written to {summary['report_path']}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="charcnn",
        description="Character-level CNN (+SE) baseline for the dialect/topic benchmark",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("audit", help="print architecture shapes and parameter counts")
    p.add_argument("--classes", type=int, default=2)
    p.add_argument("--max-chars", type=int, default=5000)
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("train", help="train on a canonical corpus and emit reports")
    p.add_argument("--corpus", required=True, help="canonical corpus directory")
    p.add_argument("--task", required=True, choices=sorted(TASKS))
    p.add_argument("--model", choices=["cnn", "cnn-se"], default="cnn")
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--batch-size", type=int, default=128)
    p.add_argument("--lr", type=float, default=5e-4)
    p.add_argument("--max-chars", type=int, default=5000)
    p.add_argument("--max-steps", type=int, default=None)
    p.add_argument("--limit", type=int, default=None, help="cap docs per subset (smoke runs)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_train)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

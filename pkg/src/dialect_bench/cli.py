"""Command-line entry point for reproducible benchmark runs.

Subcommands: ingest, train, evaluate, tune, features, report. Every command
reads an optional flat ``key = value`` config file (``--config``) whose keys
match the long flag names; explicit flags win. All randomness sits behind
``--seed`` and primary outputs carry no timestamps, so a rerun with the same
arguments is byte-identical.

Exit codes: 0 success, 2 input validation, 3 numerical failure,
4 consistency/checksum mismatch. Failures emit a JSON error object on stderr.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from pathlib import Path

from . import corpus as corpus_mod
from . import evaluation as eval_mod
from . import kernel as kernel_mod
from . import krr as krr_mod

CACHE_ENV = "DIALECT_BENCH_CACHE"

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERICAL = 3
EXIT_CONSISTENCY = 4


class ConsistencyError(Exception):
    """Corpus/model checksum or reference mismatch."""


class CliError(Exception):
    """Input validation failure surfaced with exit code 2."""


def _read_config_file(path: str | None) -> dict[str, str]:
    if not path:
        return {}
    values: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text("utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise CliError(f"{path}:{lineno}: expected key = value")
        key, _, value = line.partition("=")
        values[key.strip().replace("-", "_")] = value.strip()
    return values


def _merge_config(args: argparse.Namespace, defaults: dict) -> argparse.Namespace:
    """Layer: hard default < config file < explicit flag (flags parse to None)."""
    file_values = _read_config_file(getattr(args, "config", None))
    for key, hard_default in defaults.items():
        if getattr(args, key, None) is None:
            if key in file_values:
                raw = file_values[key]
                caster = type(hard_default) if hard_default is not None else str
                if caster is bool:
                    setattr(args, key, raw.lower() in ("1", "true", "on", "yes"))
                else:
                    setattr(args, key, caster(raw))
            else:
                setattr(args, key, hard_default)
    return args


def _load_split(args) -> corpus_mod.CorpusSplit:
    layout = (
        corpus_mod.LayoutConfig.from_file(args.layout) if getattr(args, "layout", None) else None
    )
    ner_masked = getattr(args, "ner", "mask") != "keep"
    return corpus_mod.load_corpus(args.corpus, layout, ner_masked=ner_masked)


def _kernel_config(args) -> kernel_mod.KernelConfig:
    return kernel_mod.KernelConfig(
        kind=kernel_mod.KernelKind(args.kernel_kind),
        n_low=args.ngram_min,
        n_high=args.ngram_max,
        normalize=args.normalize == "on",
        hash_seed=args.seed,
    )


def _cache_dir() -> Path | None:
    value = os.environ.get(CACHE_ENV)
    return Path(value) if value else None


def _cached_profiles(texts, refs, cfg, checksum, tag, workers):
    """Profile with an optional on-disk cache keyed by corpus checksum and config."""
    cache_dir = _cache_dir()
    if cache_dir is None:
        return kernel_mod.profile_documents(texts, cfg, doc_refs=refs, workers=workers)
    cache_dir.mkdir(parents=True, exist_ok=True)
    cfg_key = hashlib.sha256(
        json.dumps(cfg.to_dict(), sort_keys=True).encode()
    ).hexdigest()[:16]
    path = cache_dir / f"profiles_{tag}_{checksum[:16]}_{cfg_key}.bin"
    if path.is_file():
        try:
            return kernel_mod.load_profiles(path, cfg, checksum)
        except kernel_mod.KernelError:
            pass  # stale cache: recompute below
    docs = kernel_mod.profile_documents(texts, cfg, doc_refs=refs, workers=workers)
    kernel_mod.save_profiles(docs, cfg, checksum, path)
    return docs


def _hyperparams(args) -> eval_mod.KrrHyperparams:
    if args.lam is not None and args.lam <= 0:
        raise CliError(f"--lambda must be > 0, got {args.lam}")
    return eval_mod.KrrHyperparams(
        kernel=_kernel_config(args),
        lam=args.lam,
        seed=args.seed,
        workers=args.workers,
    )


# ---------------------------------------------------------------------------
# Commands


def cmd_ingest(args) -> int:
    split = _load_split(args)
    out = Path(args.out)
    corpus_mod.write_corpus(split, out)
    stats = corpus_mod.corpus_stats(split)
    checksum = corpus_mod.corpus_checksum(split)
    print(
        "ingested {train:,} / {validation:,} / {test:,} samples".format(**stats.samples)
    )
    print(f"tokens: {stats.total_tokens:,} total, {stats.mean_tokens_per_sample:.1f} per sample")
    for dialect, count in sorted(stats.dialect_totals().items()):
        print(f"dialect {dialect}: {count:,} samples")
    for topic, count in sorted(stats.topic_totals().items()):
        print(f"topic {topic}: {count:,} samples")
    print(f"corpus checksum: {checksum}")
    print(f"canonical files written to {out}")
    return EXIT_OK


def cmd_train(args) -> int:
    if args.model in ("cnn", "cnn-se"):
        raise CliError(
            "CNN training is provided by the companion charcnn package; "
            "use `charcnn train` and merge reports with `dialect-bench report`"
        )
    t0 = time.perf_counter()
    split = _load_split(args)
    spec = eval_mod.TaskSpec.for_task(args.task, args.ner)
    hp = _hyperparams(args)
    checksum = corpus_mod.corpus_checksum(split)
    train, _, _ = eval_mod.task_subsets(spec, split)
    train_docs = _cached_profiles(
        [s.text for s in train],
        [s.id for s in train],
        hp.kernel,
        checksum,
        f"{spec.task_id.value}_train",
        hp.workers,
    )
    model, _, _ = eval_mod.fit_task_model(spec, split, hp, train_docs=train_docs)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    krr_mod.save_model(
        model,
        out,
        corpus_checksum=checksum,
        extra={"task": spec.task_id.value, "ner": spec.ner_policy.value, "seed": args.seed},
    )
    elapsed = time.perf_counter() - t0
    rss = _rss_mib()
    print(f"trained {spec.task_id.value} on {len(train)} samples in {elapsed:.1f}s"
          + (f" (rss {rss:.0f} MiB)" if rss else ""))
    print(f"model written to {out}")
    return EXIT_OK


def _rss_mib() -> float | None:
    try:
        import psutil

        return psutil.Process().memory_info().rss / 2**20
    except Exception:
        return None


def _load_model_for_corpus(args, split):
    model, header = krr_mod.load_model(args.model_file)
    checksum = corpus_mod.corpus_checksum(split)
    if header.get("corpus_checksum") and header["corpus_checksum"] != checksum:
        raise ConsistencyError(
            "model was trained on a different corpus "
            f"(model {header['corpus_checksum'][:12]}.., loaded {checksum[:12]}..)"
        )
    return model, header, checksum


def cmd_evaluate(args) -> int:
    split = _load_split(args)
    model, header, checksum = _load_model_for_corpus(args, split)
    task = args.task or header["extra"].get("task")
    if not task:
        raise CliError("model file does not record a task; pass --task")
    spec = eval_mod.TaskSpec.for_task(task, header["extra"].get("ner", args.ner))
    by_id = {s.id: s for s in split.train}
    try:
        train_samples = [by_id[ref] for ref in model.train_refs]
    except KeyError as exc:
        raise ConsistencyError(f"training ref {exc.args[0]!r} not present in corpus") from None
    hp = eval_mod.KrrHyperparams(
        kernel=model.kernel_cfg, lam=model.lam, seed=args.seed, workers=args.workers
    )
    train_docs = _cached_profiles(
        [s.text for s in train_samples],
        [s.id for s in train_samples],
        model.kernel_cfg,
        checksum,
        f"{spec.task_id.value}_train",
        args.workers,
    )
    run = eval_mod.run_task(spec, split, hyperparams=hp, model=model, train_docs=train_docs)
    out = Path(args.out)
    written = []
    for fmt in args.format.split(","):
        ext = {"json": "json", "csv": "csv", "markdown": "md"}[fmt.strip()]
        written.append(
            eval_mod.emit_report(
                [run.validation, run.test], fmt.strip(), out / f"{spec.task_id.value}.{ext}"
            )
        )
    print(
        f"{spec.task_id.value}: validation acc {run.validation.accuracy:.4f}, "
        f"test acc {run.test.accuracy:.4f}"
    )
    for path in written:
        print(f"report written to {path}")
    return EXIT_OK


def cmd_tune(args) -> int:
    split = _load_split(args)
    spec = eval_mod.TaskSpec.for_task(args.task, args.ner)
    train, val, _ = eval_mod.task_subsets(spec, split)
    lambdas = [float(v) for v in args.lambdas.split(",")]
    n_grid = list(range(args.ngram_min, args.ngram_max + 1))
    result = krr_mod.tune(
        [s.text for s in train],
        [getattr(s, spec.label_field).value for s in train],
        [s.text for s in val],
        [getattr(s, spec.label_field).value for s in val],
        n_grid,
        lambdas,
        normalize=args.normalize == "on",
        hash_seed=args.seed,
        workers=args.workers,
    )
    payload = {
        "task": spec.task_id.value,
        "grid": [
            {
                "n": p.n,
                "lambda": p.lam,
                "accuracy": p.accuracy,
                "weighted_f1": p.weighted_f1,
                "failed": p.failed,
            }
            for p in result.points
        ],
        "best": {"n": result.best[0], "lambda": result.best[1]},
        "seed": args.seed,
    }
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    print(f"best: n={result.best[0]}, lambda={result.best[1]:g}")
    print(f"tune report written to {out}")
    return EXIT_OK


def cmd_features(args) -> int:
    split = _load_split(args)
    model, header, checksum = _load_model_for_corpus(args, split)
    by_id = {s.id: s for s in split.train}
    try:
        train_samples = [by_id[ref] for ref in model.train_refs]
    except KeyError as exc:
        raise ConsistencyError(f"training ref {exc.args[0]!r} not present in corpus") from None
    vocab = kernel_mod.GramVocabulary()
    train_docs = [
        kernel_mod.profile_document(s.text, model.kernel_cfg, s.id, vocab=vocab)
        for s in train_samples
    ]
    weights = krr_mod.extract_primal_weights(model, train_docs)
    per_class = {
        pw.class_label: krr_mod.top_features(pw, args.top, krr_mod.Direction.POSITIVE, vocab)
        for pw in weights
    }
    report = krr_mod.format_feature_report(per_class)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(report, encoding="utf-8")
    sys.stdout.write(report)
    print(f"feature report written to {out}")
    return EXIT_OK


def cmd_report(args) -> int:
    reports = []
    for path in args.inputs:
        reports.extend(eval_mod.load_reports(path))
    out = Path(args.out)
    eval_mod.emit_report(reports, args.format, out)
    print(f"merged {len(reports)} reports into {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser


def _add_common(p: argparse.ArgumentParser, *, corpus=True) -> None:
    p.add_argument("--config", help="flat key=value config file; flags override it")
    if corpus:
        p.add_argument("--corpus", help="canonical corpus directory")
        p.add_argument("--layout", help="layout config adapting an upstream release")
    p.add_argument("--ner", choices=["keep", "mask"], default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--workers", type=int, default=None)


def _add_kernel_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--ngram-min", dest="ngram_min", type=int, default=None)
    p.add_argument("--ngram-max", dest="ngram_max", type=int, default=None)
    p.add_argument("--normalize", choices=["on", "off"], default=None)
    p.add_argument(
        "--kernel-kind", dest="kernel_kind", choices=["presence", "intersection"], default=None
    )


_COMMON_DEFAULTS = {"ner": "mask", "seed": 0, "workers": 1}
_KERNEL_DEFAULTS = {"ngram_min": 6, "ngram_max": 6, "normalize": "on", "kernel_kind": "presence"}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dialect-bench",
        description="Dialect/topic classification benchmark: string kernels + KRR",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate a release and write canonical TSVs")
    _add_common(p)
    p.add_argument("--out", required=True, help="output directory for canonical TSVs")
    p.set_defaults(func=cmd_ingest, defaults={**_COMMON_DEFAULTS})

    p = sub.add_parser("train", help="fit a KRR model for one task")
    _add_common(p)
    _add_kernel_flags(p)
    p.add_argument("--task", required=True, choices=[t.value for t in eval_mod.TaskId])
    p.add_argument("--model", choices=["krr", "cnn", "cnn-se"], default="krr")
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.add_argument("--out", required=True, help="model file path")
    p.set_defaults(
        func=cmd_train, defaults={**_COMMON_DEFAULTS, **_KERNEL_DEFAULTS, "lam": 1e-5}
    )

    p = sub.add_parser("evaluate", help="score a saved model on its task")
    _add_common(p)
    p.add_argument("--model-file", dest="model_file", required=True)
    p.add_argument("--task", default=None, help="override the task recorded in the model")
    p.add_argument("--out", required=True, help="report output directory")
    p.add_argument("--format", default="json", help="comma list of json,csv,markdown")
    p.set_defaults(func=cmd_evaluate, defaults={**_COMMON_DEFAULTS})

    p = sub.add_parser("tune", help="grid-sweep n and lambda on the validation set")
    _add_common(p)
    _add_kernel_flags(p)
    p.add_argument("--task", required=True, choices=[t.value for t in eval_mod.TaskId])
    p.add_argument(
        "--lambdas", default="1e-3,1e-4,1e-5,1e-6", help="comma list of lambda values"
    )
    p.add_argument("--out", required=True, help="tune report path (json)")
    p.set_defaults(func=cmd_tune, defaults={**_COMMON_DEFAULTS, **_KERNEL_DEFAULTS})

    p = sub.add_parser("features", help="top discriminative n-grams per class")
    _add_common(p)
    p.add_argument("--model-file", dest="model_file", required=True)
    p.add_argument("-k", "--top", type=int, default=10)
    p.add_argument("--out", required=True, help="feature TSV path")
    p.set_defaults(func=cmd_features, defaults={**_COMMON_DEFAULTS})

    p = sub.add_parser("report", help="merge report JSONs into one grid")
    p.add_argument("--config", help=argparse.SUPPRESS)
    p.add_argument("inputs", nargs="+", help="report JSON files (kernel and/or CNN)")
    p.add_argument("--format", default="markdown", choices=["json", "csv", "markdown"])
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report, defaults={})

    return parser


def _classify_exit(exc: Exception) -> int:
    import numpy as np

    if isinstance(exc, (ConsistencyError, kernel_mod.CacheInvalidError)):
        return EXIT_CONSISTENCY
    if isinstance(exc, (krr_mod.SolverError, np.linalg.LinAlgError)):
        return EXIT_NUMERICAL
    return EXIT_INPUT


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _merge_config(args, args.defaults)
    if getattr(args, "corpus", "unused") is None:
        _fail(CliError("--corpus is required (flag or config file)"), EXIT_INPUT)
        return EXIT_INPUT
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - single funnel to exit codes
        code = _classify_exit(exc)
        _fail(exc, code)
        return code


def _fail(exc: Exception, code: int) -> None:
    payload = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    print(json.dumps(payload), file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())

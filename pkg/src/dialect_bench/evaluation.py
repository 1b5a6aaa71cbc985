"""The five benchmark tasks, report objects, and report emission.

Tasks: binary dialect discrimination, per-dialect 6-way topic categorization,
and the two cross-dialect topic transfers. Cross-dialect runs validate on the
training dialect (the test dialect stays unseen until test time) and the
harness asserts that no test-dialect sample leaks into training/validation.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .corpus import CorpusSplit, Dialect, NePolicy, Sample, Topic, corpus_checksum
from .kernel import KernelConfig, KernelKind, gram_matrix, profile_documents
from .krr import DualModel, fit_binary, fit_multiclass, predict
from .metrics import classification_metrics, confusion

TOPIC_LABELS = tuple(sorted(t.value for t in Topic))
DIALECT_LABELS = tuple(sorted(d.value for d in Dialect))


class EvalError(Exception):
    pass


class UnsupportedModelError(EvalError):
    """Model kind not trainable by this package (CNN kinds live in charcnn)."""


class TaskId(str, Enum):
    DIALECT_BINARY = "dialect_binary"
    MD_TOPIC = "md_topic"
    RO_TOPIC = "ro_topic"
    MD_TO_RO = "md_to_ro"
    RO_TO_MD = "ro_to_md"


class ModelKind(str, Enum):
    KRR_PRESENCE = "krr_presence"
    CNN = "cnn"
    CNN_SE = "cnn_se"


@dataclass(frozen=True)
class TaskSpec:
    """Subset filters and label field for one benchmark task."""

    task_id: TaskId
    ner_policy: NePolicy
    label_field: str  # "dialect" or "topic"
    train_dialect: Dialect | None  # None = both dialects
    validation_dialect: Dialect | None
    test_dialect: Dialect | None

    @classmethod
    def for_task(cls, task_id: TaskId | str, ner_policy: NePolicy | str = NePolicy.MASK):
        task_id = TaskId(task_id)
        ner_policy = NePolicy(ner_policy)
        if task_id is TaskId.DIALECT_BINARY:
            return cls(task_id, ner_policy, "dialect", None, None, None)
        if task_id is TaskId.MD_TOPIC:
            return cls(task_id, ner_policy, "topic", Dialect.MD, Dialect.MD, Dialect.MD)
        if task_id is TaskId.RO_TOPIC:
            return cls(task_id, ner_policy, "topic", Dialect.RO, Dialect.RO, Dialect.RO)
        if task_id is TaskId.MD_TO_RO:
            return cls(task_id, ner_policy, "topic", Dialect.MD, Dialect.MD, Dialect.RO)
        return cls(task_id, ner_policy, "topic", Dialect.RO, Dialect.RO, Dialect.MD)

    @property
    def labels(self) -> tuple[str, ...]:
        return DIALECT_LABELS if self.label_field == "dialect" else TOPIC_LABELS

    @property
    def is_cross_dialect(self) -> bool:
        return self.train_dialect is not None and self.train_dialect != self.test_dialect


ALL_TASKS = tuple(TaskId)


@dataclass(frozen=True)
class MetricsReport:
    """Metrics plus full config echo for one (task, model, split) run."""

    task: str
    model: str
    split: str
    ner: str
    accuracy: float
    weighted_f1: float
    macro_f1: float
    confusion: tuple[tuple[int, ...], ...]
    labels: tuple[str, ...]
    config: dict
    corpus_checksum: str
    seed: int

    def __post_init__(self) -> None:
        cm = np.asarray(self.confusion)
        total = cm.sum()
        if total and abs(self.accuracy - cm.trace() / total) > 1e-12:
            raise EvalError("accuracy does not equal confusion trace/total")

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "model": self.model,
            "split": self.split,
            "ner": self.ner,
            "accuracy": self.accuracy,
            "weighted_f1": self.weighted_f1,
            "macro_f1": self.macro_f1,
            "confusion": [list(row) for row in self.confusion],
            "labels": list(self.labels),
            "config": self.config,
            "corpus_checksum": self.corpus_checksum,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "MetricsReport":
        return cls(
            task=d["task"],
            model=d["model"],
            split=d["split"],
            ner=d["ner"],
            accuracy=d["accuracy"],
            weighted_f1=d["weighted_f1"],
            macro_f1=d["macro_f1"],
            confusion=tuple(tuple(int(v) for v in row) for row in d["confusion"]),
            labels=tuple(d["labels"]),
            config=dict(d["config"]),
            corpus_checksum=d["corpus_checksum"],
            seed=int(d["seed"]),
        )


def build_report(
    task: TaskId | str,
    model_name: str,
    split_name: str,
    ner_policy: NePolicy | str,
    gold: Sequence[str],
    pred: Sequence[str],
    labels: Sequence[str],
    config: Mapping,
    checksum: str,
    seed: int,
) -> MetricsReport:
    """Assemble a MetricsReport from raw predictions (shared with the CNN side)."""
    cm = confusion(list(gold), list(pred), list(labels))
    scores = classification_metrics(cm)
    return MetricsReport(
        task=TaskId(task).value,
        model=model_name,
        split=split_name,
        ner=NePolicy(ner_policy).value,
        accuracy=scores.accuracy,
        weighted_f1=scores.weighted_f1,
        macro_f1=scores.macro_f1,
        confusion=tuple(tuple(int(v) for v in row) for row in cm),
        labels=tuple(labels),
        config=dict(config),
        corpus_checksum=checksum,
        seed=seed,
    )


@dataclass(frozen=True)
class KrrHyperparams:
    kernel: KernelConfig
    lam: float
    seed: int = 0
    workers: int = 1

    @classmethod
    def defaults(cls) -> "KrrHyperparams":
        # best validation choice: single length 6, lambda 1e-5, normalized
        return cls(kernel=KernelConfig(n_low=6, n_high=6, normalize=True), lam=1e-5)


@dataclass(frozen=True)
class TaskRun:
    spec: TaskSpec
    validation: MetricsReport
    test: MetricsReport
    model: DualModel | None = None


def _filter(samples: Sequence[Sample], dialect: Dialect | None) -> list[Sample]:
    if dialect is None:
        return list(samples)
    return [s for s in samples if s.dialect is dialect]


def _labels_of(samples: Sequence[Sample], field: str) -> list[str]:
    return [getattr(s, field).value for s in samples]


def task_subsets(
    spec: TaskSpec, corpus: CorpusSplit
) -> tuple[list[Sample], list[Sample], list[Sample]]:
    """Filtered (train, validation, test) with the leakage guard applied."""
    if corpus.ner_masked != (spec.ner_policy is NePolicy.MASK):
        have = "masked" if corpus.ner_masked else "raw"
        raise EvalError(
            f"task wants ner={spec.ner_policy.value} but the loaded corpus is {have}"
        )
    train = _filter(corpus.train, spec.train_dialect)
    val = _filter(corpus.validation, spec.validation_dialect)
    test = _filter(corpus.test, spec.test_dialect)
    for name, subset in (("train", train), ("validation", val), ("test", test)):
        if not subset:
            raise EvalError(f"empty filtered {name} subset for task {spec.task_id.value}")
    test_ids = {s.id for s in test}
    if test_ids & ({s.id for s in train} | {s.id for s in val}):
        raise EvalError("test ids leak into training/validation")
    return train, val, test


def model_display_name(model_kind: ModelKind, kernel_cfg: KernelConfig | None = None) -> str:
    if model_kind is ModelKind.KRR_PRESENCE and kernel_cfg is not None:
        if kernel_cfg.kind is KernelKind.INTERSECTION:
            return "krr_intersection"
    return model_kind.value


def fit_task_model(
    spec: TaskSpec,
    corpus: CorpusSplit,
    hyperparams: KrrHyperparams | None = None,
    train_docs: list | None = None,
):
    """Fit the task's KRR model; returns (model, train_docs, checksum)."""
    hp = hyperparams or KrrHyperparams.defaults()
    train, _, _ = task_subsets(spec, corpus)
    checksum = corpus_checksum(corpus)
    cfg = hp.kernel
    if train_docs is None:
        train_docs = profile_documents(
            [s.text for s in train], cfg, doc_refs=[s.id for s in train], workers=hp.workers
        )
    K = gram_matrix(train_docs, None, cfg, workers=hp.workers)
    gold_train = _labels_of(train, spec.label_field)
    if spec.label_field == "dialect":
        y = np.where(np.asarray(gold_train) == DIALECT_LABELS[1], 1.0, -1.0)
        model = fit_binary(K, y, hp.lam, classes=DIALECT_LABELS)
    else:
        model = fit_multiclass(K, gold_train, hp.lam, classes=TOPIC_LABELS)
    return model, train_docs, checksum


def run_task(
    spec: TaskSpec,
    corpus: CorpusSplit,
    model_kind: ModelKind | str = ModelKind.KRR_PRESENCE,
    hyperparams: KrrHyperparams | None = None,
    model: DualModel | None = None,
    train_docs: list | None = None,
) -> TaskRun:
    """Train on the task's filtered training set; report validation and test metrics.

    A pre-fitted model (with its training profiles) can be supplied to skip
    refitting, e.g. when evaluating a saved model file.
    """
    model_kind = ModelKind(model_kind)
    if model_kind is not ModelKind.KRR_PRESENCE:
        raise UnsupportedModelError(
            f"{model_kind.value} training lives in the charcnn package; its reports "
            "use the same JSON schema and merge via the report command"
        )
    hp = hyperparams or KrrHyperparams.defaults()
    _, val, test = task_subsets(spec, corpus)
    cfg = hp.kernel
    if model is None or train_docs is None:
        model, train_docs, checksum = fit_task_model(spec, corpus, hp, train_docs=train_docs)
    else:
        checksum = corpus_checksum(corpus)

    # worker count deliberately not echoed: outputs must be identical for any
    # degree of parallelism
    config_echo = {
        "model_kind": model_kind.value,
        "kernel": cfg.to_dict(),
        "lambda": hp.lam,
        "ovr_multiclass": spec.label_field == "topic",
    }
    name = model_display_name(model_kind, cfg)

    def _report(samples: list[Sample], split_name: str) -> MetricsReport:
        docs = profile_documents(
            [s.text for s in samples], cfg, doc_refs=[s.id for s in samples], workers=hp.workers
        )
        K_eval = gram_matrix(docs, train_docs, cfg, workers=hp.workers)
        pred, _ = predict(model, K_eval)
        return build_report(
            spec.task_id,
            name,
            split_name,
            spec.ner_policy,
            _labels_of(samples, spec.label_field),
            pred,
            spec.labels,
            config_echo,
            checksum,
            hp.seed,
        )

    return TaskRun(
        spec=spec,
        validation=_report(val, "validation"),
        test=_report(test, "test"),
        model=model,
    )


# ---------------------------------------------------------------------------
# Named-entity ablation


@dataclass(frozen=True)
class AblationEntry:
    task: str
    keep: MetricsReport | None
    mask: MetricsReport
    deltas: dict | None  # keep minus mask, per metric; None without a raw corpus


def ner_ablation(
    task_ids: Sequence[TaskId | str],
    corpus_raw: CorpusSplit | None,
    corpus_masked: CorpusSplit,
    hyperparams: KrrHyperparams | None = None,
) -> list[AblationEntry]:
    """Run each task under keep and mask with identical hyperparameters.

    Without a raw corpus variant the result is partial: mask-only, no deltas.
    """
    entries = []
    for task_id in task_ids:
        mask_run = run_task(
            TaskSpec.for_task(task_id, NePolicy.MASK),
            corpus_masked,
            hyperparams=hyperparams,
        )
        if corpus_raw is None:
            entries.append(AblationEntry(TaskId(task_id).value, None, mask_run.test, None))
            continue
        keep_run = run_task(
            TaskSpec.for_task(task_id, NePolicy.KEEP),
            corpus_raw,
            hyperparams=hyperparams,
        )
        deltas = {
            "accuracy": keep_run.test.accuracy - mask_run.test.accuracy,
            "weighted_f1": keep_run.test.weighted_f1 - mask_run.test.weighted_f1,
            "macro_f1": keep_run.test.macro_f1 - mask_run.test.macro_f1,
        }
        entries.append(
            AblationEntry(TaskId(task_id).value, keep_run.test, mask_run.test, deltas)
        )
    return entries


# ---------------------------------------------------------------------------
# Report emission


class ReportFormat(str, Enum):
    JSON = "json"
    CSV = "csv"
    MARKDOWN = "markdown"


_TASK_ORDER = {t.value: i for i, t in enumerate(TaskId)}


def render_report(reports: Sequence[MetricsReport], fmt: ReportFormat | str) -> str:
    """Render reports with stable field order; markdown gives a tasks x models grid."""
    fmt = ReportFormat(fmt)
    if not reports:
        raise EvalError("need at least one report")
    if fmt is ReportFormat.JSON:
        return json.dumps([r.to_dict() for r in reports], indent=2, ensure_ascii=False) + "\n"
    if fmt is ReportFormat.CSV:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(
            [
                "task",
                "model",
                "split",
                "ner",
                "accuracy",
                "weighted_f1",
                "macro_f1",
                "labels",
                "confusion",
                "corpus_checksum",
                "seed",
            ]
        )
        for r in reports:
            flat = " ".join(str(v) for row in r.confusion for v in row)
            writer.writerow(
                [
                    r.task,
                    r.model,
                    r.split,
                    r.ner,
                    repr(r.accuracy),
                    repr(r.weighted_f1),
                    repr(r.macro_f1),
                    "|".join(r.labels),
                    flat,
                    r.corpus_checksum,
                    r.seed,
                ]
            )
        return buf.getvalue()

    # markdown: one row group per task, one row per model, metric columns
    # for validation and test
    by_key: dict[tuple[str, str], dict[str, MetricsReport]] = {}
    for r in reports:
        by_key.setdefault((r.task, r.model), {})[r.split] = r
    lines = [
        "| Task | Model | Val acc | Val wF1 | Val mF1 | Test acc | Test wF1 | Test mF1 |",
        "|---|---|---|---|---|---|---|---|",
    ]

    def _pct(report: MetricsReport | None, attr: str) -> str:
        if report is None:
            return "-"
        return f"{getattr(report, attr) * 100:.2f}"

    for task, model in sorted(
        by_key, key=lambda km: (_TASK_ORDER.get(km[0], 99), km[0], km[1])
    ):
        splits = by_key[(task, model)]
        va, te = splits.get("validation"), splits.get("test")
        lines.append(
            f"| {task} | {model} | {_pct(va, 'accuracy')} | {_pct(va, 'weighted_f1')} "
            f"| {_pct(va, 'macro_f1')} | {_pct(te, 'accuracy')} | {_pct(te, 'weighted_f1')} "
            f"| {_pct(te, 'macro_f1')} |"
        )
    return "\n".join(lines) + "\n"


def emit_report(
    reports: Sequence[MetricsReport], fmt: ReportFormat | str, path: str | Path
) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render_report(reports, fmt), encoding="utf-8")
    return path


def load_reports(path: str | Path) -> list[MetricsReport]:
    """Read back a JSON report file (single object or list)."""
    data = json.loads(Path(path).read_text("utf-8"))
    if isinstance(data, Mapping):
        data = [data]
    return [MetricsReport.from_dict(d) for d in data]

"""Training loop, metrics, and report emission in the shared JSON schema.

Reports match the kernel toolkit's schema field-for-field so both model
families merge into one grid. Metric conventions are identical: F1 = 0 when
precision + recall = 0, macro averages every declared class, weighted
averages by gold support.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .alphabet import build_alphabet
from .encoding import DIALECTS, TOPICS, Doc, corpus_checksum, encode_batch, read_corpus
from .model import CharCnn, CnnConfig

TASKS = {
    # task_id: (label_field, train_dialect, validation_dialect, test_dialect)
    "dialect_binary": ("dialect", None, None, None),
    "md_topic": ("topic", "MD", "MD", "MD"),
    "ro_topic": ("topic", "RO", "RO", "RO"),
    "md_to_ro": ("topic", "MD", "MD", "RO"),
    "ro_to_md": ("topic", "RO", "RO", "MD"),
}


class TrainingDivergedError(RuntimeError):
    pass


def confusion_matrix(gold: list[str], pred: list[str], labels: list[str]) -> np.ndarray:
    index = {label: i for i, label in enumerate(labels)}
    cm = np.zeros((len(labels), len(labels)), dtype=np.int64)
    for g, p in zip(gold, pred):
        cm[index[g], index[p]] += 1
    return cm


def metrics_from_confusion(cm: np.ndarray) -> tuple[float, float, float]:
    diag = np.diag(cm).astype(np.float64)
    support = cm.sum(axis=1).astype(np.float64)
    predicted = cm.sum(axis=0).astype(np.float64)
    with np.errstate(invalid="ignore", divide="ignore"):
        precision = np.where(predicted > 0, diag / predicted, 0.0)
        recall = np.where(support > 0, diag / support, 0.0)
        pr = precision + recall
        f1 = np.where(pr > 0, 2.0 * precision * recall / pr, 0.0)
    accuracy = float(diag.sum() / cm.sum())
    macro = float(f1.mean())
    weighted = float((f1 * support).sum() / support.sum())
    return accuracy, weighted, macro


def build_report(
    task: str,
    model_name: str,
    split: str,
    gold: list[str],
    pred: list[str],
    labels: list[str],
    config: dict,
    checksum: str,
    seed: int,
) -> dict:
    cm = confusion_matrix(gold, pred, labels)
    accuracy, weighted, macro = metrics_from_confusion(cm)
    return {
        "task": task,
        "model": model_name,
        "split": split,
        "ner": "mask",
        "accuracy": accuracy,
        "weighted_f1": weighted,
        "macro_f1": macro,
        "confusion": cm.tolist(),
        "labels": list(labels),
        "config": config,
        "corpus_checksum": checksum,
        "seed": seed,
    }


@dataclass
class TrainResult:
    model: CharCnn
    losses: list[float]
    steps: int


def _batches(n: int, batch_size: int, generator: torch.Generator):
    order = torch.randperm(n, generator=generator)
    for start in range(0, n, batch_size):
        yield order[start : start + batch_size]


def train_model(
    model: CharCnn,
    x: np.ndarray,
    y: np.ndarray,
    config: CnnConfig,
    max_steps: int | None = None,
    log_every: int = 0,
    stop_at_train_accuracy: float | None = None,
    eval_every: int = 10,
) -> TrainResult:
    """Adam + categorical cross-entropy over shuffled mini-batches.

    Batch composition is driven by a generator seeded from the config, so a
    fixed seed reproduces the same run (up to framework kernel determinism).
    A non-finite loss aborts immediately with diagnostics. When
    ``stop_at_train_accuracy`` is set, training accuracy is checked every
    ``eval_every`` steps and the run stops early once reached.
    """
    torch.manual_seed(config.seed)
    generator = torch.Generator().manual_seed(config.seed)
    optimizer = torch.optim.Adam(model.parameters(), lr=config.lr)
    loss_fn = nn.CrossEntropyLoss()
    x_t = torch.from_numpy(x)
    y_t = torch.from_numpy(y)
    losses: list[float] = []
    step = 0

    def _train_accuracy() -> float:
        model.eval()
        with torch.no_grad():
            hits = 0
            for start in range(0, len(x), 256):
                logits = model(x_t[start : start + 256])
                hits += int((logits.argmax(dim=1) == y_t[start : start + 256]).sum())
        model.train()
        return hits / len(x)

    model.train()
    for epoch in range(config.epochs):
        for batch_idx in _batches(len(x), config.batch_size, generator):
            optimizer.zero_grad()
            logits = model(x_t[batch_idx])
            loss = loss_fn(logits, y_t[batch_idx])
            if not torch.isfinite(loss):
                raise TrainingDivergedError(
                    f"non-finite loss {loss.item()!r} at step {step} (epoch {epoch}); "
                    f"last finite losses: {losses[-3:]}"
                )
            loss.backward()
            optimizer.step()
            losses.append(float(loss.item()))
            step += 1
            if log_every and step % log_every == 0:
                print(f"step {step}: loss {losses[-1]:.4f}")
            done = max_steps is not None and step >= max_steps
            if (
                stop_at_train_accuracy is not None
                and (step % eval_every == 0 or done)
                and _train_accuracy() >= stop_at_train_accuracy
            ):
                model.eval()
                return TrainResult(model, losses, step)
            if done:
                model.eval()
                return TrainResult(model, losses, step)
    model.eval()
    return TrainResult(model, losses, step)


@torch.no_grad()
def predict_labels(model: CharCnn, x: np.ndarray, labels: list[str], batch_size: int = 256) -> list[str]:
    model.eval()
    out: list[str] = []
    x_t = torch.from_numpy(x)
    for start in range(0, len(x), batch_size):
        logits = model(x_t[start : start + batch_size])
        out.extend(labels[i] for i in logits.argmax(dim=1).tolist())
    return out


def accuracy(model: CharCnn, x: np.ndarray, y: np.ndarray) -> float:
    labels = [str(v) for v in range(int(y.max()) + 1)]
    pred = predict_labels(model, x, labels)
    return float(np.mean([int(p) == t for p, t in zip(pred, y)]))


# ---------------------------------------------------------------------------
# Task runner over the canonical corpus


def _filter(docs: list[Doc], dialect: str | None) -> list[Doc]:
    return docs if dialect is None else [d for d in docs if d.dialect == dialect]


def run_task(
    corpus_dir: str | Path,
    task: str,
    config: CnnConfig,
    out_dir: str | Path,
    max_steps: int | None = None,
    limit_per_subset: int | None = None,
) -> dict:
    """Train on the task's filtered training set; write validation+test reports.

    Returns a summary dict with the report path and headline accuracies.
    """
    if task not in TASKS:
        raise ValueError(f"unknown task {task!r}")
    label_field, train_d, val_d, test_d = TASKS[task]
    labels = list(DIALECTS) if label_field == "dialect" else list(TOPICS)
    corpus = read_corpus(corpus_dir)
    checksum = corpus_checksum(corpus_dir)

    subsets = {}
    for name, dialect in (("train", train_d), ("validation", val_d), ("test", test_d)):
        docs = _filter(corpus[name], dialect)
        if limit_per_subset is not None:
            docs = docs[:limit_per_subset]
        if not docs:
            raise ValueError(f"empty filtered {name} subset for task {task}")
        subsets[name] = docs

    alphabet = build_alphabet()
    label_index = {label: i for i, label in enumerate(labels)}
    encoded = {
        name: encode_batch([d.text for d in docs], alphabet, config.input_length)
        for name, docs in subsets.items()
    }
    y_train = np.array(
        [label_index[getattr(d, label_field)] for d in subsets["train"]], dtype=np.int64
    )

    model = CharCnn(config)
    result = train_model(model, encoded["train"], y_train, config, max_steps=max_steps)

    model_name = "cnn_se" if config.se_enabled else "cnn"
    config_echo = {"model_kind": model_name, **config.to_dict()}
    reports = []
    summary = {"task": task, "model": model_name, "steps": result.steps}
    for split in ("validation", "test"):
        gold = [getattr(d, label_field) for d in subsets[split]]
        pred = predict_labels(model, encoded[split], labels)
        report = build_report(
            task, model_name, split, gold, pred, labels, config_echo, checksum, config.seed
        )
        reports.append(report)
        summary[f"{split}_accuracy"] = report["accuracy"]

    out = Path(out_dir)
    reports_dir = out / "reports"
    reports_dir.mkdir(parents=True, exist_ok=True)
    report_path = reports_dir / f"{task}.json"
    report_path.write_text(
        json.dumps(reports, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )
    torch.save(model.state_dict(), out / f"{task}_{model_name}.pt")
    (out / f"{task}_{model_name}.config.json").write_text(
        json.dumps(config_echo, indent=2) + "\n", encoding="utf-8"
    )
    summary["report_path"] = str(report_path)
    return summary

"""Kernel ridge regression in the dual, with primal weight recovery.

Fitting solves ``(K + lambda*I) alpha = y`` through a symmetric
positive-definite factorization (one diagonal-jitter retry, then a single
iterative-refinement step to push the residual under tolerance).
Multi-class tasks use one-vs-rest with +/-1 targets; all classes share one
factorization. For the presence kernel the dual coefficients convert into
explicit per-n-gram weights, which is what makes the discriminative-feature
reports possible.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Hashable, Mapping, Sequence

import numpy as np
import scipy.linalg

from .kernel import (
    DocumentProfiles,
    GramMatrix,
    GramVocabulary,
    KernelConfig,
    KernelKind,
    gram_matrix,
    profile_documents,
)
from .metrics import accuracy_score, classification_metrics, confusion

RESIDUAL_TOL = 1e-8


class KrrError(Exception):
    pass


class SolverError(KrrError):
    pass


def solve_regularized(K: np.ndarray, Y: np.ndarray, lam: float) -> np.ndarray:
    """Solve (K + lam*I) A = Y for symmetric PSD K; returns A with Y's shape."""
    K = np.asarray(K, dtype=np.float64)
    m = K.shape[0]
    if K.ndim != 2 or K.shape[1] != m:
        raise KrrError(f"kernel matrix must be square, got {K.shape}")
    y2 = np.asarray(Y, dtype=np.float64)
    squeeze = y2.ndim == 1
    if squeeze:
        y2 = y2[:, None]
    if y2.shape[0] != m:
        raise KrrError(f"dimension mismatch: K is {m}x{m}, targets have {y2.shape[0]} rows")
    if not lam > 0:
        raise KrrError(f"lambda must be > 0, got {lam}")

    system = K + lam * np.eye(m)
    try:
        factor = scipy.linalg.cho_factor(system, lower=True, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        # normalized presence kernels can be numerically semidefinite
        jitter = 1e-10 * float(np.trace(K)) / m
        try:
            factor = scipy.linalg.cho_factor(
                system + jitter * np.eye(m), lower=True, check_finite=False
            )
        except scipy.linalg.LinAlgError:
            raise SolverError(
                f"Cholesky failed even with jitter {jitter:.3e}; smallest diagonal "
                f"pivot candidate {system.diagonal().min():.6e} ({exc})"
            ) from exc

    alphas = scipy.linalg.cho_solve(factor, y2, check_finite=False)
    norms = np.linalg.norm(y2, axis=0)
    residual = y2 - system @ alphas
    bad = np.linalg.norm(residual, axis=0) > RESIDUAL_TOL * np.maximum(norms, 1e-300)
    if bad.any():
        alphas = alphas + scipy.linalg.cho_solve(factor, residual, check_finite=False)
        residual = y2 - system @ alphas
        bad = np.linalg.norm(residual, axis=0) > RESIDUAL_TOL * np.maximum(norms, 1e-300)
        if bad.any():
            worst = float(np.max(np.linalg.norm(residual, axis=0) / np.maximum(norms, 1e-300)))
            raise SolverError(f"residual {worst:.3e} above tolerance after refinement")
    return alphas[:, 0] if squeeze else alphas


@dataclass(frozen=True)
class DualModel:
    """Fitted KRR coefficients plus everything needed to score new documents."""

    classes: tuple
    alphas: np.ndarray  # (stored_vectors, n_train); binary stores the positive class only
    lam: float
    kernel_cfg: KernelConfig
    train_refs: tuple[str, ...]

    def __post_init__(self) -> None:
        if self.alphas.ndim != 2 or self.alphas.shape[1] != len(self.train_refs):
            raise KrrError(
                f"alpha shape {self.alphas.shape} inconsistent with "
                f"{len(self.train_refs)} training refs"
            )

    @property
    def is_binary(self) -> bool:
        return len(self.classes) == 2 and self.alphas.shape[0] == 1

    @property
    def n_train(self) -> int:
        return self.alphas.shape[1]

    def class_coefficients(self) -> np.ndarray:
        """Per-class alpha matrix (n_classes, n_train); expands the binary form."""
        if self.is_binary:
            return np.vstack([-self.alphas[0], self.alphas[0]])
        return self.alphas


def fit_binary(
    K: GramMatrix,
    labels: Sequence[int] | np.ndarray,
    lam: float,
    classes: tuple = (-1, 1),
) -> DualModel:
    """Fit a two-class model from +/-1 targets; stores one alpha vector.

    ``classes[0]`` is the label scored -1 and ``classes[1]`` the label scored +1.
    """
    if not K.symmetric:
        raise KrrError("training Gram matrix must be symmetric")
    y = np.asarray(labels, dtype=np.float64)
    if y.shape != (len(K.row_refs),):
        raise KrrError(f"labels shape {y.shape} does not match K dimension {len(K.row_refs)}")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise KrrError("binary labels must be +1/-1")
    if len(classes) != 2:
        raise KrrError("binary fit needs exactly two classes")
    alpha = solve_regularized(K.values, y, lam)
    return DualModel(
        classes=tuple(classes),
        alphas=alpha[None, :],
        lam=float(lam),
        kernel_cfg=K.config,
        train_refs=K.row_refs,
    )


def fit_multiclass(
    K: GramMatrix,
    labels: Sequence[Hashable],
    lam: float,
    classes: Sequence[Hashable] | None = None,
) -> DualModel:
    """One-vs-rest fit: per class c, targets are +1 on c and -1 elsewhere.

    All class systems share the single factorization of (K + lam*I).
    """
    if not K.symmetric:
        raise KrrError("training Gram matrix must be symmetric")
    labels = list(labels)
    if len(labels) != len(K.row_refs):
        raise KrrError("label count does not match K dimension")
    present = set(labels)
    if classes is None:
        classes = sorted(present)
    else:
        classes = list(classes)
        missing = [c for c in classes if c not in present]
        if missing:
            raise KrrError(f"class(es) absent from training: {missing!r}")
    if len(classes) < 2:
        raise KrrError("need at least two distinct classes")
    Y = np.full((len(labels), len(classes)), -1.0)
    index = {c: j for j, c in enumerate(classes)}
    for i, lab in enumerate(labels):
        Y[i, index[lab]] = 1.0
    alphas = solve_regularized(K.values, Y, lam)
    return DualModel(
        classes=tuple(classes),
        alphas=alphas.T.copy(),
        lam=float(lam),
        kernel_cfg=K.config,
        train_refs=K.row_refs,
    )


def predict(model: DualModel, K_test: GramMatrix) -> tuple[list, np.ndarray]:
    """Labels and per-class scores for rows of a (test x train) Gram matrix.

    score(x, c) = sum_i alpha_c[i] * K_test[x, i]; the predicted label is the
    argmax with ties broken toward the lowest class index.
    """
    if K_test.col_refs != model.train_refs:
        raise KrrError("K_test column refs do not match model training refs")
    if model.is_binary:
        f = K_test.values @ model.alphas[0]
        scores = np.column_stack([-f, f])
    else:
        scores = K_test.values @ model.alphas.T
    picks = np.argmax(scores, axis=1)
    labels = [model.classes[i] for i in picks]
    return labels, scores


# ---------------------------------------------------------------------------
# Primal weights and feature reports


class FeatureSpace(str, Enum):
    RAW = "raw"
    NORMALIZED = "normalized"


class Direction(str, Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"


def _doc_fingerprints(doc: DocumentProfiles, n_low: int, n_high: int) -> np.ndarray:
    parts = [doc.profile(n).grams for n in range(n_low, n_high + 1)]
    return parts[0] if len(parts) == 1 else np.concatenate(parts)


@dataclass(frozen=True)
class PrimalWeights:
    """Explicit per-n-gram weights of one one-vs-rest scorer."""

    class_label: object
    fingerprints: np.ndarray  # sorted uint64
    weights: np.ndarray
    feature_space: FeatureSpace
    n_low: int
    n_high: int

    def weight_of(self, fingerprint: int) -> float:
        i = int(np.searchsorted(self.fingerprints, np.uint64(fingerprint)))
        if i < self.fingerprints.size and self.fingerprints[i] == np.uint64(fingerprint):
            return float(self.weights[i])
        return 0.0

    def score(self, doc: DocumentProfiles) -> float:
        """Primal score sum_s w[s] * phi_s(doc); must match the dual score."""
        fps = _doc_fingerprints(doc, self.n_low, self.n_high)
        if fps.size == 0:
            return 0.0
        idx = np.searchsorted(self.fingerprints, fps)
        idx_clipped = np.minimum(idx, self.fingerprints.size - 1)
        hit = self.fingerprints[idx_clipped] == fps
        total = float(self.weights[idx_clipped[hit]].sum())
        if self.feature_space is FeatureSpace.NORMALIZED:
            v = doc.self_value(self.n_low, self.n_high)
            return 0.0 if v == 0 else total / float(np.sqrt(v))
        return total


def extract_primal_weights(
    model: DualModel, train_profiles: Sequence[DocumentProfiles]
) -> list[PrimalWeights]:
    """Convert dual coefficients into per-n-gram weights, one per class.

    Defined for the presence kernel only. In the normalized feature space each
    document's presence bits are scaled by 1/sqrt(k(x,x)), matching what the
    model actually scored with.
    """
    cfg = model.kernel_cfg
    if cfg.kind is not KernelKind.PRESENCE:
        raise KrrError(f"primal weights are defined for the presence kernel, not {cfg.kind.value}")
    if tuple(d.doc_ref for d in train_profiles) != model.train_refs:
        raise KrrError("training profiles do not match model training refs")

    feature_space = FeatureSpace.NORMALIZED if cfg.normalize else FeatureSpace.RAW
    fps_per_doc = [_doc_fingerprints(d, cfg.n_low, cfg.n_high) for d in train_profiles]
    sizes = np.array([f.size for f in fps_per_doc], dtype=np.int64)
    if sizes.sum() == 0:
        raise KrrError("no n-grams in any training profile")
    all_fps = np.concatenate([f for f in fps_per_doc if f.size])
    doc_index = np.repeat(np.arange(len(fps_per_doc)), sizes)
    uniq, inverse = np.unique(all_fps, return_inverse=True)

    if feature_space is FeatureSpace.NORMALIZED:
        self_values = np.array(
            [d.self_value(cfg.n_low, cfg.n_high) for d in train_profiles], dtype=np.float64
        )
        scale = np.where(self_values > 0, 1.0 / np.sqrt(np.maximum(self_values, 1.0)), 0.0)
    else:
        scale = np.ones(len(train_profiles))

    coefs = model.class_coefficients()
    out = []
    for row, label in zip(coefs, model.classes):
        contrib = (row * scale)[doc_index]
        weights = np.bincount(inverse, weights=contrib, minlength=uniq.size)
        out.append(
            PrimalWeights(
                class_label=label,
                fingerprints=uniq,
                weights=weights,
                feature_space=feature_space,
                n_low=cfg.n_low,
                n_high=cfg.n_high,
            )
        )
    return out


@dataclass(frozen=True)
class TopFeatures:
    features: tuple[tuple[str, float], ...]
    requested: int

    @property
    def clipped(self) -> bool:
        """True when fewer features than requested exist in the vocabulary."""
        return len(self.features) < self.requested


def top_features(
    weights: PrimalWeights,
    k: int,
    direction: Direction | str,
    vocab: GramVocabulary,
) -> TopFeatures:
    """Top-k n-grams by signed weight; ties broken lexicographically."""
    direction = Direction(direction)
    if k < 1:
        raise KrrError("k must be >= 1")
    w = weights.weights
    mask = w > 0 if direction is Direction.POSITIVE else w < 0
    fps = weights.fingerprints[mask]
    vals = w[mask]
    grams = [vocab.window(fp) for fp in fps.tolist()]
    if direction is Direction.POSITIVE:
        order = sorted(range(len(grams)), key=lambda i: (-vals[i], grams[i]))
    else:
        order = sorted(range(len(grams)), key=lambda i: (vals[i], grams[i]))
    chosen = order[:k]
    return TopFeatures(
        features=tuple((grams[i], float(vals[i])) for i in chosen), requested=k
    )


def visible_whitespace(gram: str) -> str:
    return gram.replace(" ", "␣")


def format_feature_report(per_class: Mapping[object, TopFeatures]) -> str:
    """TSV `class<TAB>rank<TAB>ngram<TAB>weight` with spaces made visible."""
    lines = []
    for label, feats in per_class.items():
        name = getattr(label, "value", label)
        for rank, (gram, weight) in enumerate(feats.features, 1):
            lines.append(f"{name}\t{rank}\t{visible_whitespace(gram)}\t{weight!r}")
    return "\n".join(lines) + ("\n" if lines else "")


# ---------------------------------------------------------------------------
# Grid tuning


@dataclass(frozen=True)
class TunePoint:
    n: int
    lam: float
    accuracy: float | None
    weighted_f1: float | None
    failed: bool = False


@dataclass(frozen=True)
class TuneResult:
    points: tuple[TunePoint, ...]
    best: tuple[int, float]


def tune(
    train_texts: Sequence[str],
    train_labels: Sequence[Hashable],
    val_texts: Sequence[str],
    val_labels: Sequence[Hashable],
    n_grid: Sequence[int],
    lambda_grid: Sequence[float],
    kind: KernelKind = KernelKind.PRESENCE,
    normalize: bool = True,
    hash_seed: int = 0,
    workers: int = 1,
) -> TuneResult:
    """Validation-accuracy sweep over (n, lambda); best = argmax accuracy.

    Ties prefer smaller n, then larger lambda. Per n-gram length the training
    Gram matrix is eigendecomposed once and reused for every lambda. The
    validation set must be disjoint from training. Grid points whose
    decomposition fails are recorded and skipped.
    """
    if not n_grid or not lambda_grid:
        raise KrrError("grids must be non-empty")
    if len(train_texts) != len(train_labels) or len(val_texts) != len(val_labels):
        raise KrrError("texts/labels length mismatch")
    classes = sorted(set(train_labels))
    if len(classes) < 2:
        raise KrrError("need at least two classes to tune")
    binary = len(classes) == 2

    if binary:
        Y = np.where(np.asarray([l == classes[1] for l in train_labels]), 1.0, -1.0)[:, None]
    else:
        Y = np.full((len(train_labels), len(classes)), -1.0)
        for i, lab in enumerate(train_labels):
            Y[i, classes.index(lab)] = 1.0

    points: list[TunePoint] = []
    for n in n_grid:
        cfg = KernelConfig(kind=kind, n_low=n, n_high=n, normalize=normalize, hash_seed=hash_seed)
        train_docs = profile_documents(train_texts, cfg, workers=workers)
        val_docs = profile_documents(val_texts, cfg, workers=workers)
        K = gram_matrix(train_docs, None, cfg, workers=workers)
        K_val = gram_matrix(val_docs, train_docs, cfg, workers=workers)
        try:
            eigvals, eigvecs = np.linalg.eigh(K.values)
        except np.linalg.LinAlgError:
            points.extend(
                TunePoint(n, float(lam), None, None, failed=True) for lam in lambda_grid
            )
            continue
        eigvals = np.maximum(eigvals, 0.0)  # clip PSD round-off
        uty = eigvecs.T @ Y
        for lam in lambda_grid:
            alphas = eigvecs @ (uty / (eigvals + lam)[:, None])
            scores = K_val.values @ alphas
            if binary:
                pred = [classes[1] if s > 0 else classes[0] for s in scores[:, 0]]
            else:
                pred = [classes[i] for i in np.argmax(scores, axis=1)]
            acc = accuracy_score(list(val_labels), pred)
            wf1 = classification_metrics(confusion(list(val_labels), pred, classes)).weighted_f1
            points.append(TunePoint(n, float(lam), acc, wf1))

    usable = [p for p in points if not p.failed]
    if not usable:
        raise KrrError("every grid point failed to factorize")
    best = min(usable, key=lambda p: (-p.accuracy, p.n, -p.lam))
    return TuneResult(points=tuple(points), best=(best.n, best.lam))


# ---------------------------------------------------------------------------
# Model container

_MODEL_MAGIC = b"DBKRRM01"


def save_model(
    model: DualModel,
    path: str | Path,
    corpus_checksum: str = "",
    extra: Mapping | None = None,
) -> None:
    """Versioned self-describing container; byte-identical for identical inputs."""
    classes = [getattr(c, "value", c) for c in model.classes]
    header = {
        "version": 1,
        "classes": classes,
        "binary": model.is_binary,
        "lambda": model.lam,
        "kernel": model.kernel_cfg.to_dict(),
        "train_refs": list(model.train_refs),
        "corpus_checksum": corpus_checksum,
        "alpha_shape": list(model.alphas.shape),
        "extra": dict(extra or {}),
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MODEL_MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        fh.write(np.ascontiguousarray(model.alphas, dtype="<f8").tobytes())


def load_model(path: str | Path) -> tuple[DualModel, dict]:
    """Returns the model plus its header (corpus checksum, config echo)."""
    with open(path, "rb") as fh:
        if fh.read(len(_MODEL_MAGIC)) != _MODEL_MAGIC:
            raise KrrError(f"{path}: not a model file")
        (length,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(length).decode("utf-8"))
        rows, cols = header["alpha_shape"]
        alphas = np.frombuffer(fh.read(rows * cols * 8), dtype="<f8").reshape(rows, cols)
    model = DualModel(
        classes=tuple(header["classes"]),
        alphas=alphas.copy(),
        lam=float(header["lambda"]),
        kernel_cfg=KernelConfig.from_dict(header["kernel"]),
        train_refs=tuple(header["train_refs"]),
    )
    return model, header

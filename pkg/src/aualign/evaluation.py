"""Confusion matrices, unweighted F1/recall metrics, and LOSO folds.

Per-class scores with an empty denominator contribute 0 to the
unweighted means, which keeps the metrics defined when a fold never
sees or never predicts a class. LOSO aggregation defaults to pooling
all fold predictions into one confusion matrix; fold-averaged metrics
are available behind a flag.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError

AGG_POOLED = "pooled"
AGG_AVERAGED = "averaged"


@dataclass(frozen=True)
class ConfusionMatrix:
    """Rows are true classes, columns predicted classes."""

    counts: np.ndarray

    def __post_init__(self):
        c = self.counts
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise ContractError(f"ConfusionMatrix: counts must be square, got {c.shape}")
        if np.any(c < 0):
            raise ContractError("ConfusionMatrix: negative counts")

    @property
    def num_classes(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def merged(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        if other.num_classes != self.num_classes:
            raise ContractError(
                f"ConfusionMatrix: cannot merge {self.num_classes} and {other.num_classes} classes"
            )
        return ConfusionMatrix(self.counts + other.counts)


@dataclass(frozen=True)
class ClassScores:
    precision: float
    recall: float
    f1: float


@dataclass(frozen=True)
class EvalReport:
    cm: ConfusionMatrix
    uf1: float
    uar: float
    acc: float
    per_class: tuple[ClassScores, ...]
    fold_id: str | None = None


@dataclass(frozen=True)
class LosoFolds:
    folds: tuple[tuple[str, tuple[int, ...], tuple[int, ...]], ...] = field(default=())


def confusion(preds, labels, num_classes: int) -> ConfusionMatrix:
    preds = np.asarray(preds, dtype=np.int64).reshape(-1)
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if preds.shape != labels.shape:
        raise ContractError(f"confusion: {preds.shape[0]} predictions vs {labels.shape[0]} labels")
    if preds.size and (
        preds.min() < 0 or preds.max() >= num_classes or labels.min() < 0 or labels.max() >= num_classes
    ):
        raise ContractError(f"confusion: class index outside [0, {num_classes})")
    counts = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(counts, (labels, preds), 1)
    return ConfusionMatrix(counts)


def compute_metrics(cm: ConfusionMatrix, fold_id: str | None = None) -> EvalReport:
    if cm.total == 0:
        raise ContractError("compute_metrics: empty confusion matrix")
    counts = cm.counts.astype(np.float64)
    tp = np.diag(counts)
    fp = counts.sum(axis=0) - tp
    fn = counts.sum(axis=1) - tp

    per_class = []
    for c in range(cm.num_classes):
        precision = tp[c] / (tp[c] + fp[c]) if tp[c] + fp[c] > 0 else 0.0
        recall = tp[c] / (tp[c] + fn[c]) if tp[c] + fn[c] > 0 else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
        per_class.append(ClassScores(precision=precision, recall=recall, f1=f1))

    return EvalReport(
        cm=cm,
        uf1=float(np.mean([s.f1 for s in per_class])),
        uar=float(np.mean([s.recall for s in per_class])),
        acc=float(tp.sum() / cm.total),
        per_class=tuple(per_class),
        fold_id=fold_id,
    )


def loso_folds(subject_ids: list[str]) -> LosoFolds:
    """One fold per distinct subject, in sorted subject order."""
    if not subject_ids:
        raise ContractError("loso_folds: empty subject list")
    folds = []
    for subject in sorted(set(subject_ids)):
        test = tuple(i for i, s in enumerate(subject_ids) if s == subject)
        train = tuple(i for i, s in enumerate(subject_ids) if s != subject)
        folds.append((subject, train, test))
    return LosoFolds(folds=tuple(folds))


def aggregate_reports(reports: list[EvalReport], mode: str = AGG_POOLED) -> EvalReport:
    """Combine per-fold reports: pool confusion counts (default) or
    average the fold-level metrics."""
    if not reports:
        raise ContractError("aggregate_reports: no reports")
    if mode == AGG_POOLED:
        pooled = reports[0].cm
        for rep in reports[1:]:
            pooled = pooled.merged(rep.cm)
        return compute_metrics(pooled, fold_id="pooled")
    if mode == AGG_AVERAGED:
        pooled = reports[0].cm
        for rep in reports[1:]:
            pooled = pooled.merged(rep.cm)
        base = compute_metrics(pooled, fold_id="averaged")
        return EvalReport(
            cm=base.cm,
            uf1=float(np.mean([r.uf1 for r in reports])),
            uar=float(np.mean([r.uar for r in reports])),
            acc=float(np.mean([r.acc for r in reports])),
            per_class=base.per_class,
            fold_id="averaged",
        )
    raise ContractError(f"aggregate_reports: unknown mode {mode!r}")


def report_lines(report: EvalReport) -> str:
    """Structured text record of the metrics for one report."""
    lines = [
        f"fold\t{report.fold_id or '-'}",
        f"uf1\t{report.uf1!r}",
        f"uar\t{report.uar!r}",
        f"acc\t{report.acc!r}",
        f"samples\t{report.cm.total}",
    ]
    for c, s in enumerate(report.per_class):
        lines.append(f"class{c}\tprecision={s.precision!r} recall={s.recall!r} f1={s.f1!r}")
    return "\n".join(lines) + "\n"


def cm_csv(cm: ConfusionMatrix) -> str:
    return "\n".join(",".join(str(int(v)) for v in row) for row in cm.counts) + "\n"

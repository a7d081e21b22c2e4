"""K-fold cross-validation and micro-averaged classification metrics.

Micro precision, recall and F1 are computed from class-summed true/false
positive counts. For single-label multiclass confusion matrices they all
collapse to accuracy; the implementations below keep the arithmetic on
integer counts until the final division so that identity holds exactly.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import EmptyMatrix, FoldError

K_FOLDS_DEFAULT = 5


@dataclass(frozen=True)
class FoldPlan:
    """Partition of s samples into n_folds groups of near-equal size."""

    n_folds: int
    assignments: np.ndarray  # (s,) fold index per sample
    seed: int
    stratified: bool  # whether stratification was actually applied

    @property
    def n_samples(self) -> int:
        return self.assignments.shape[0]

    def test_mask(self, fold: int) -> np.ndarray:
        return self.assignments == fold


def kfold_plan(labels, n_folds: int = K_FOLDS_DEFAULT, seed: int = 0,
               stratified: bool = True) -> FoldPlan:
    """Seeded shuffle followed by round-robin fold assignment.

    With stratification the round-robin runs within each class while the
    fold counter continues across classes, keeping sizes balanced both
    per class and globally. If some class has fewer members than folds,
    stratification falls back to the plain shuffle with a warning.
    """
    labels = np.asarray(labels, dtype=np.int64)
    s = labels.shape[0]
    if n_folds < 2:
        raise ValueError("need at least 2 folds")
    if n_folds > s:
        raise ValueError(f"cannot split {s} samples into {n_folds} folds")

    rng = np.random.default_rng(seed)
    assignments = np.empty(s, dtype=np.int64)
    if stratified:
        counts = np.bincount(labels)
        thin = np.flatnonzero((counts > 0) & (counts < n_folds))
        if thin.size:
            warnings.warn(
                f"classes {thin.tolist()} have fewer than {n_folds} members; "
                "falling back to unstratified folds", RuntimeWarning,
                stacklevel=2)
            stratified = False
    if stratified:
        cursor = 0
        for c in np.unique(labels):
            idx = rng.permutation(np.flatnonzero(labels == c))
            assignments[idx] = (cursor + np.arange(idx.size)) % n_folds
            cursor += idx.size
    else:
        perm = rng.permutation(s)
        assignments[perm] = np.arange(s) % n_folds
    return FoldPlan(n_folds=n_folds, assignments=assignments, seed=seed,
                    stratified=stratified)


def confusion_matrix(y_true, y_pred, n_classes: int) -> np.ndarray:
    """(C, C) counts, rows = true class, columns = predicted class."""
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (y_true, y_pred), 1)
    return cm


def _check_total(cm: np.ndarray) -> int:
    total = int(cm.sum())
    if total == 0:
        raise EmptyMatrix("confusion matrix holds no samples")
    return total


def micro_precision(cm: np.ndarray) -> float:
    _check_total(cm)
    tp = int(np.trace(cm))
    fp = int(cm.sum()) - tp  # column residue summed over classes
    return tp / (tp + fp)


def micro_recall(cm: np.ndarray) -> float:
    _check_total(cm)
    tp = int(np.trace(cm))
    fn = int(cm.sum()) - tp  # row residue summed over classes
    return tp / (tp + fn)


def f1_micro(cm: np.ndarray) -> float:
    """Harmonic mean of micro precision and recall, computed from counts
    as 2*TP / (2*TP + FP + FN). Returns 0 (with a warning) when no
    sample is correct."""
    total = _check_total(cm)
    tp = int(np.trace(cm))
    if tp == 0:
        warnings.warn("no true positives; F1 reported as 0", RuntimeWarning,
                      stacklevel=2)
        return 0.0
    fp = fn = total - tp
    return 2 * tp / (2 * tp + fp + fn)


def accuracy(cm: np.ndarray) -> float:
    total = _check_total(cm)
    return int(np.trace(cm)) / total


def error_rate(cm: np.ndarray) -> float:
    return 1.0 - accuracy(cm)


@dataclass(frozen=True)
class CvSummary:
    """Per-fold F1 scores with their mean and 2x population std."""

    fold_scores: tuple[float, ...]
    mean: float
    two_sigma: float

    @classmethod
    def from_scores(cls, scores) -> "CvSummary":
        arr = np.asarray(scores, dtype=np.float64)
        return cls(fold_scores=tuple(float(v) for v in arr),
                   mean=float(arr.mean()), two_sigma=float(2.0 * arr.std()))

    def format_cell(self) -> str:
        return f"{self.mean:.4f} (+/- {self.two_sigma:.4f})"


@dataclass(frozen=True)
class CvResult:
    summary: CvSummary
    fold_matrices: tuple[np.ndarray, ...]
    pooled_matrix: np.ndarray

    @property
    def pooled_accuracy(self) -> float:
        return accuracy(self.pooled_matrix)

    @property
    def pooled_error_rate(self) -> float:
        return error_rate(self.pooled_matrix)


def cross_validate(pipeline_factory, X, labels, plan: FoldPlan) -> CvResult:
    """Refit a fresh pipeline per fold and score micro-F1 on the held-out
    part. The factory must return an unfitted object with fit/predict."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if plan.n_samples != y.shape[0]:
        raise ValueError("fold plan does not cover the data")
    n_classes = int(y.max()) + 1

    scores = []
    matrices = []
    for fold in range(plan.n_folds):
        test = plan.test_mask(fold)
        train = ~test
        try:
            pipe = pipeline_factory()
            pipe.fit(X[train], y[train])
            pred = pipe.predict(X[test])
        except Exception as exc:
            raise FoldError(fold, str(exc)) from exc
        cm = confusion_matrix(y[test], pred, n_classes)
        matrices.append(cm)
        scores.append(f1_micro(cm))

    pooled = np.sum(matrices, axis=0)
    return CvResult(summary=CvSummary.from_scores(scores),
                    fold_matrices=tuple(matrices), pooled_matrix=pooled)

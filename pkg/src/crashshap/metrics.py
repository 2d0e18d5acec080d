"""Binary classification metrics and cross-validation plumbing.

Fatal (label 1) is the positive class everywhere. Macro averages over both
classes are reported alongside the positive-class numbers.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, DataError


def _ratio(num: float, den: float) -> tuple[float, bool]:
    if den == 0:
        return 0.0, True
    return num / den, False


def _f1(p: float, r: float) -> float:
    return 0.0 if p + r == 0 else 2 * p * r / (p + r)


@dataclass
class MetricsReport:
    tp: int
    fp: int
    tn: int
    fn: int
    precision: float
    recall: float
    f1: float
    accuracy: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    threshold: float = 0.5
    undefined: list = field(default_factory=list)
    roc_auc: float | None = None
    roc_curve: list = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def to_dict(self) -> dict:
        d = asdict(self)
        d["roc_curve"] = [list(p) for p in self.roc_curve]
        return d


def confusion_and_rates(y, scores, threshold: float = 0.5) -> MetricsReport:
    """Confusion counts and rates with hard label ``score >= threshold``.

    Zero-denominator ratios are reported as 0 and their names listed in
    ``undefined``.
    """
    y = np.asarray(y)
    scores = np.asarray(scores, dtype=np.float64)
    if y.shape != scores.shape:
        raise DataError(f"length mismatch: {len(y)} labels vs {len(scores)} scores")
    if y.size == 0:
        raise DataError("need at least one instance")
    pred = scores >= threshold
    pos = y == 1
    tp = int(np.sum(pred & pos))
    fp = int(np.sum(pred & ~pos))
    tn = int(np.sum(~pred & ~pos))
    fn = int(np.sum(~pred & pos))
    undefined = []
    prec, bad = _ratio(tp, tp + fp)
    if bad:
        undefined.append("precision")
    rec, bad = _ratio(tp, tp + fn)
    if bad:
        undefined.append("recall")
    # negative-class rates feed the macro averages
    nprec, bad = _ratio(tn, tn + fn)
    if bad:
        undefined.append("negative_precision")
    nrec, bad = _ratio(tn, tn + fp)
    if bad:
        undefined.append("negative_recall")
    f1 = _f1(prec, rec)
    return MetricsReport(
        tp=tp, fp=fp, tn=tn, fn=fn,
        precision=prec, recall=rec, f1=f1,
        accuracy=(tp + tn) / y.size,
        macro_precision=(prec + nprec) / 2,
        macro_recall=(rec + nrec) / 2,
        macro_f1=(f1 + _f1(nprec, nrec)) / 2,
        threshold=threshold,
        undefined=undefined,
    )


def _check_binary(y) -> tuple[np.ndarray, int, int]:
    y = np.asarray(y)
    n_pos = int(np.sum(y == 1))
    n_neg = int(np.sum(y == 0))
    if n_pos + n_neg != y.size:
        raise DataError("labels must be 0 or 1")
    if n_pos == 0 or n_neg == 0:
        raise DataError("ROC-AUC needs both classes present")
    return y, n_pos, n_neg


def average_ranks(values) -> np.ndarray:
    """1-based ranks with ties sharing their mean rank."""
    values = np.asarray(values, dtype=np.float64)
    order = np.argsort(values, kind="mergesort")
    sv = values[order]
    ranks = np.empty(len(values), dtype=np.float64)
    # boundaries of tie groups in sorted order
    starts = np.flatnonzero(np.r_[True, sv[1:] != sv[:-1]])
    ends = np.r_[starts[1:], len(sv)]
    for s, e in zip(starts, ends):
        ranks[order[s:e]] = (s + 1 + e) / 2.0
    return ranks


def roc_auc(y, scores) -> float:
    """Mann-Whitney AUC: P(score_pos > score_neg) with ties counted half."""
    y, n_pos, n_neg = _check_binary(y)
    ranks = average_ranks(scores)
    u = ranks[y == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def roc_curve(y, scores) -> list[tuple[float, float, float]]:
    """ROC points ``(fpr, tpr, threshold)`` from a sweep over distinct scores.

    The first point is ``(0, 0, +inf)``; each subsequent threshold predicts
    positive for ``score >= threshold``.
    """
    y, n_pos, n_neg = _check_binary(y)
    scores = np.asarray(scores, dtype=np.float64)
    order = np.argsort(-scores, kind="mergesort")
    ss, ys = scores[order], y[order]
    last = np.r_[ss[1:] != ss[:-1], True]
    tps = np.cumsum(ys == 1)[last]
    fps = np.cumsum(ys == 0)[last]
    pts = [(0.0, 0.0, math.inf)]
    pts += [(f / n_neg, t / n_pos, float(s)) for f, t, s in zip(fps, tps, ss[last])]
    return pts


def roc_trapezoid_area(curve) -> float:
    fpr = np.array([p[0] for p in curve])
    tpr = np.array([p[1] for p in curve])
    return float(np.trapezoid(tpr, fpr))


def evaluate_scores(y, scores, threshold: float = 0.5) -> MetricsReport:
    report = confusion_and_rates(y, scores, threshold)
    report.roc_auc = roc_auc(y, scores)
    report.roc_curve = roc_curve(y, scores)
    return report


# ---------------------------------------------------------------------------
# cross validation

@dataclass(frozen=True)
class FoldPlan:
    k: int
    folds: tuple
    seed: int

    def __iter__(self):
        return iter(self.folds)

    def __len__(self):
        return len(self.folds)


def stratified_kfold(y, k: int, seed: int) -> FoldPlan:
    """Shuffle each class, lay the classes end to end, deal rows to folds round-robin."""
    y = np.asarray(y)
    if k < 2:
        raise ConfigError(f"k must be at least 2, got {k}")
    rng = np.random.default_rng(seed)
    dealt = []
    for cls in (0, 1):
        idx = np.flatnonzero(y == cls)
        if len(idx) < k:
            raise DataError(f"class {cls} has {len(idx)} rows, fewer than k={k}")
        dealt.append(rng.permutation(idx))
    dealt = np.concatenate(dealt)
    assign = np.empty(len(y), dtype=np.intp)
    assign[dealt] = np.arange(len(dealt)) % k
    folds = tuple(
        (np.flatnonzero(assign != f), np.flatnonzero(assign == f)) for f in range(k)
    )
    return FoldPlan(k, folds, seed)


def score_metric(metric: str, y, proba) -> float:
    if metric == "roc_auc":
        return roc_auc(y, proba)
    rep = confusion_and_rates(y, proba)
    if metric in ("accuracy", "precision", "recall", "f1", "macro_f1", "macro_precision", "macro_recall"):
        return float(getattr(rep, metric))
    raise ConfigError(f"unknown metric {metric!r}")


METRICS = ("accuracy", "roc_auc", "precision", "recall", "f1", "macro_precision", "macro_recall", "macro_f1")


@dataclass
class CVResult:
    scores: list
    mean: float
    std: float

    def to_dict(self) -> dict:
        return {"scores": list(self.scores), "mean": self.mean, "std": self.std}


def run_folds(fn: Callable[[int, tuple], object], plan: FoldPlan, n_jobs: int = 1) -> list:
    """Apply ``fn(fold_index, (train_idx, val_idx))`` to every fold, in fold order."""
    items = list(enumerate(plan.folds))
    if n_jobs is None or n_jobs <= 1:
        return [fn(i, f) for i, f in items]
    with ThreadPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(lambda it: fn(*it), items))


def cross_val_score(train, factory: Callable, plan: FoldPlan, metric: str = "accuracy",
                    smote=None, n_jobs: int = 1) -> CVResult:
    """Fit ``factory(fold_train)`` per fold and score it on the fold's validation rows.

    ``smote`` is an optional :class:`~crashshap.resampling.SmoteConfig`
    applied to the fold-train partition only.
    """
    if metric not in METRICS:
        raise ConfigError(f"unknown metric {metric!r}")
    from .resampling import smote as apply_smote

    def one(i, fold):
        tr, va = fold
        fold_train = train.subset(tr)
        if smote is not None:
            fold_train = apply_smote(fold_train, smote.for_fold(i))
        model = factory(fold_train)
        val = train.subset(va)
        return score_metric(metric, val.y, model.predict_proba(val.x))

    scores = run_folds(one, plan, n_jobs)
    arr = np.array(scores, dtype=np.float64)
    return CVResult([float(s) for s in scores], float(arr.mean()), float(arr.std()))


def mean_std(values: Sequence[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=np.float64)
    return float(arr.mean()), float(arr.std())

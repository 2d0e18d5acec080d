"""Shapley attributions for fitted models and the derived explanation views.

``shapley_exact`` enumerates every coalition with an interventional value
function and serves as the brute-force reference. ``tree_shap`` is the
polynomial-time path-dependent algorithm over the ensemble's stored
``weight_fraction`` statistics. All attributions are in log-odds units.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import factorial
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .errors import ExplanationError

MAX_EXACT_FEATURES = 14
LOCAL_ACCURACY_TOL = 1e-6


# ---------------------------------------------------------------------------
# brute-force reference

def shapley_weights(d: int) -> np.ndarray:
    """``|S|! (d - |S| - 1)! / d!`` for ``|S| = 0 .. d-1``."""
    return np.array([factorial(s) * factorial(d - s - 1) / factorial(d) for s in range(d)])


def shapley_from_values(values: np.ndarray, d: int) -> np.ndarray:
    """Shapley values of a ``d``-player game given ``values[mask] = v(S)``.

    Bit ``i`` of ``mask`` marks player ``i`` as a member of ``S``.
    """
    w = shapley_weights(d)
    masks = np.arange(1 << d)
    sizes = np.array([bin(m).count("1") for m in masks])
    phi = np.zeros(d)
    for i in range(d):
        bit = 1 << i
        without = masks[(masks & bit) == 0]
        phi[i] = np.sum(w[sizes[without]] * (values[without | bit] - values[without]))
    return phi


def _check_active(p, active_features):
    active = list(range(p)) if active_features is None else sorted(set(int(a) for a in active_features))
    if len(active) > MAX_EXACT_FEATURES:
        raise ExplanationError(f"exact enumeration limited to {MAX_EXACT_FEATURES} features, got {len(active)}")
    if any(a < 0 or a >= p for a in active):
        raise ExplanationError("active feature index out of range")
    return active


def shapley_exact(predict: Callable, x, background, active_features: Sequence[int] | None = None) -> np.ndarray:
    """Exact Shapley values by coalition enumeration.

    The value of coalition ``S`` is the mean of ``predict`` over the
    background rows with the columns in ``S`` overwritten by ``x``.
    ``predict`` maps an ``(m, p)`` array to ``m`` outputs. Features outside
    ``active_features`` always keep their background values and get 0.
    """
    x = np.asarray(x, dtype=np.float64)
    background = np.asarray(background, dtype=np.float64)
    if background.ndim != 2 or background.shape[0] == 0:
        raise ExplanationError("background must be a non-empty matrix")
    p = background.shape[1]
    if x.shape != (p,):
        raise ExplanationError(f"x must have {p} entries")
    active = _check_active(p, active_features)
    d = len(active)
    m = background.shape[0]
    values = np.empty(1 << d)
    chunk = max(1, 200_000 // m)
    for start in range(0, 1 << d, chunk):
        masks = np.arange(start, min(start + chunk, 1 << d))
        Z = np.repeat(background[None, :, :], len(masks), axis=0)
        for bit, j in enumerate(active):
            on = (masks >> bit) & 1 == 1
            Z[on, :, j] = x[j]
        out = np.asarray(predict(Z.reshape(-1, p)), dtype=np.float64).reshape(len(masks), m)
        values[masks] = out.mean(axis=1)
    phi = np.zeros(p)
    phi[active] = shapley_from_values(values, d)
    return phi


def tree_conditional_expectation(tree, x, coalition: set) -> float:
    """Path-dependent ``E[tree(x) | x_S]``: follow ``x`` on features in ``S``,
    otherwise average the children by ``weight_fraction``."""

    def rec(i):
        if tree.left[i] < 0:
            return tree.value[i]
        f = tree.feature[i]
        l, r = tree.left[i], tree.right[i]
        if f in coalition:
            return rec(l if x[f] < tree.threshold[i] else r)
        w = tree.weight_fraction[i]
        if w <= 0:
            return 0.0
        return (tree.weight_fraction[l] * rec(l) + tree.weight_fraction[r] * rec(r)) / w

    return float(rec(0))


def shapley_path_dependent_bruteforce(model, x) -> np.ndarray:
    """Coalition enumeration over the trees' own conditional expectations."""
    x = np.asarray(x, dtype=np.float64)
    p = model.n_features
    active = _check_active(p, None)
    d = len(active)
    values = np.zeros(1 << d)
    for mask in range(1 << d):
        S = {active[b] for b in range(d) if mask >> b & 1}
        values[mask] = sum(tree_conditional_expectation(t, x, S) for t in model.trees)
    return shapley_from_values(values, d)


# ---------------------------------------------------------------------------
# TreeSHAP

def _check_weights(model):
    for t in model.trees:
        wf = getattr(t, "weight_fraction", None)
        if wf is None or len(wf) != t.n_nodes or not np.all(np.isfinite(wf)) or abs(wf[0] - 1.0) > 1e-9:
            raise ExplanationError("model lacks node weight statistics")


def expected_margin(model) -> float:
    """``base_score`` plus each tree's weight-fraction-averaged leaf value."""
    return float(model.base_score + sum(t.expected_value() for t in model.trees))


def tree_shap_matrix(model, X) -> tuple[np.ndarray, float]:
    """Attributions for every row of ``X`` and the shared base value."""
    _check_weights(model)
    X = np.ascontiguousarray(np.asarray(X, dtype=np.float64))
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise ExplanationError(f"expected rows with {model.n_features} features")
    phi = np.zeros(X.shape, dtype=np.float64)
    acc = kernels.backend.tree_shap_accumulate
    for t in model.trees:
        acc(t.feature, t.threshold, t.left, t.right, t.value, t.weight_fraction, t.max_depth, X, phi)
    return phi, expected_margin(model)


def tree_shap(model, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return tree_shap_matrix(model, x[None, :])[0][0]


# ---------------------------------------------------------------------------
# explanation containers

@dataclass
class Explanation:
    base_value: float
    shap: np.ndarray
    x: np.ndarray
    feature_names: tuple
    margins: np.ndarray

    @property
    def n(self) -> int:
        return self.shap.shape[0]

    def local_accuracy_error(self) -> float:
        if self.n == 0:
            return 0.0
        return float(np.max(np.abs(self.base_value + self.shap.sum(axis=1) - self.margins)))

    def to_dict(self) -> dict:
        return {
            "base_value": self.base_value,
            "feature_names": list(self.feature_names),
            "rows": [
                {"x": self.x[i].tolist(), "shap": self.shap[i].tolist(), "margin": float(self.margins[i])}
                for i in range(self.n)
            ],
        }


def explain_set(model, xs) -> Explanation:
    """TreeSHAP for each row; raises if any row breaks local accuracy."""
    xs = np.asarray(xs, dtype=np.float64).reshape(-1, model.n_features)
    if xs.shape[0] == 0:
        _check_weights(model)
        return Explanation(expected_margin(model), np.zeros((0, model.n_features)), xs,
                           tuple(model.feature_names), np.zeros(0))
    phi, base = tree_shap_matrix(model, xs)
    margins = np.asarray(model.predict_margin(xs))
    expl = Explanation(base, phi, xs, tuple(model.feature_names), margins)
    err = expl.local_accuracy_error()
    if err > LOCAL_ACCURACY_TOL:
        raise ExplanationError(f"local accuracy violated: max error {err:.3g}")
    return expl


def global_importance(expl: Explanation) -> list[tuple[str, float]]:
    """Features by descending mean |SHAP|; ties keep feature order."""
    if expl.n == 0:
        raise ExplanationError("global importance needs at least one row")
    imp = np.abs(expl.shap).mean(axis=0)
    order = np.lexsort((np.arange(len(imp)), -imp))
    return [(expl.feature_names[j], float(imp[j])) for j in order]


@dataclass
class DependenceData:
    feature_index: int
    points: list
    interaction_feature_index: int | None
    scores: dict = field(default_factory=dict)


MIN_INTERACTION_ROWS = 10


def _quantile_groups(v: np.ndarray, k: int) -> np.ndarray:
    return np.searchsorted(np.quantile(v, np.arange(1, k) / k), v, side="right")


def interaction_scores(expl: Explanation, feature: int) -> dict[int, float]:
    """How much the detrended attributions of ``feature`` shift with each other feature.

    The attributions are detrended by a least-squares line in the feature's
    own value. Rows are then cut into deciles of that value and, for each
    other feature ``j``, into quartile groups of ``x_j``. The score is the
    size-weighted variance of the quartile-group means around their decile
    mean, pooled over deciles. It is zero when the attributions depend on the
    feature's own value only, and it picks up both offset and slope changes
    (a centred product ``x_i * x_j`` included). Scores below float noise are
    reported as 0 so the index tie rule applies.
    """
    s = expl.shap[:, feature]
    xi = expl.x[:, feature]
    if np.ptp(xi) > 0:
        slope, intercept = np.polyfit(xi, s, 1)
        r = s - (slope * xi + intercept)
    else:
        r = s - s.mean()
    floor = 1e-12 * float(np.var(s))
    cells_i = _quantile_groups(xi, 10)
    scores = {}
    for j in range(expl.shap.shape[1]):
        if j == feature:
            continue
        groups = _quantile_groups(expl.x[:, j], 4)
        total = 0.0
        for c in np.unique(cells_i):
            in_c = cells_i == c
            rc, gc = r[in_c], groups[in_c]
            labels, counts = np.unique(gc, return_counts=True)
            if len(labels) < 2:
                continue
            means = np.array([rc[gc == g].mean() for g in labels])
            total += float(np.sum(counts * (means - rc.mean()) ** 2))
        score = total / len(r)
        scores[j] = score if score > floor else 0.0
    return scores


def dependence_data(expl: Explanation, feature: int) -> DependenceData:
    if not 0 <= feature < expl.shap.shape[1]:
        raise ExplanationError(f"feature index {feature} out of range")
    scores = interaction_scores(expl, feature) if expl.n >= MIN_INTERACTION_ROWS else {}
    inter = None
    if scores:
        best = max(scores.values())
        inter = min(j for j, v in scores.items() if v == best)
    points = [
        (float(expl.x[i, feature]), float(expl.shap[i, feature]),
         None if inter is None else float(expl.x[i, inter]))
        for i in range(expl.n)
    ]
    return DependenceData(feature, points, inter, scores)


@dataclass
class ForcePlot:
    row: int
    base_value: float
    fx: float
    contributions: list  # (feature name, scaled value, phi), by descending |phi|
    other_phi: float
    n_other: int

    def to_dict(self) -> dict:
        return {
            "row": self.row,
            "base_value": self.base_value,
            "fx": self.fx,
            "contributions": [{"feature": n, "value": v, "shap": s} for n, v, s in self.contributions],
            "other_features": {"count": self.n_other, "shap": self.other_phi},
        }


def force_decomposition(expl: Explanation, row: int, top_k: int = 10) -> ForcePlot:
    if not 0 <= row < expl.n:
        raise ExplanationError(f"row {row} out of range for {expl.n} explained rows")
    phi = expl.shap[row]
    fx = float(expl.margins[row])
    err = abs(expl.base_value + phi.sum() - fx)
    if err > LOCAL_ACCURACY_TOL:
        raise ExplanationError(f"row {row}: base + sum(shap) misses f(x) by {err:.3g}")
    order = np.lexsort((np.arange(len(phi)), -np.abs(phi)))
    top, rest = order[:max(top_k, 0)], order[max(top_k, 0):]
    contrib = [(expl.feature_names[j], float(expl.x[row, j]), float(phi[j])) for j in top]
    return ForcePlot(row, float(expl.base_value), fx, contrib, float(phi[rest].sum()) if len(rest) else 0.0, len(rest))


def heatmap_order(expl: Explanation) -> np.ndarray:
    """Row order by ascending f(x); equal margins keep input order."""
    return np.argsort(expl.margins, kind="stable")

"""JSON and CSV writers for metrics and explanation artifacts.

Floats are written with ``repr`` so files round-trip exactly and repeated
runs produce identical bytes.
"""
from __future__ import annotations

import csv
import json
import math
import re
from pathlib import Path

import numpy as np

from .explain import Explanation, dependence_data, global_importance, heatmap_order


def _clean(obj):
    if isinstance(obj, float):
        return None if not math.isfinite(obj) else obj
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        return _clean(obj.item())
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


def write_json(obj, path) -> None:
    Path(path).write_text(json.dumps(_clean(obj), indent=1) + "\n", encoding="utf-8")


def write_rows(path, header, rows) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in r])


def slug(name: str) -> str:
    return re.sub(r"[^a-z0-9]+", "_", name.lower()).strip("_")


def write_roc_csv(curve, path) -> None:
    write_rows(path, ["fpr", "tpr", "threshold"], [(float(f), float(t), float(s)) for f, t, s in curve])


def beeswarm_data(expl: Explanation) -> dict:
    """Per-feature points in importance order, coloured by min-max normalised value."""
    ranking = global_importance(expl)
    idx = {n: j for j, n in enumerate(expl.feature_names)}
    feats = []
    for rank, (name, mean_abs) in enumerate(ranking):
        j = idx[name]
        col = expl.x[:, j]
        span = np.ptp(col)
        norm = (col - col.min()) / span if span > 0 else np.zeros_like(col)
        feats.append({
            "name": name,
            "rank": rank,
            "mean_abs_shap": mean_abs,
            "points": [{"shap": float(s), "value": float(v)} for s, v in zip(expl.shap[:, j], norm)],
        })
    return {"base_value": expl.base_value, "features": feats}


def heatmap_data(expl: Explanation) -> dict:
    order = heatmap_order(expl)
    ranking = global_importance(expl)
    idx = {n: j for j, n in enumerate(expl.feature_names)}
    cols = [idx[n] for n, _ in ranking]
    return {
        "base_value": expl.base_value,
        "instance_order": order.tolist(),
        "margins": expl.margins[order].tolist(),
        "features": [n for n, _ in ranking],
        "mean_abs_shap": [v for _, v in ranking],
        "shap": [expl.shap[order, j].tolist() for j in cols],
    }


def write_importance_csv(expl: Explanation, path) -> None:
    write_rows(path, ["rank", "feature", "mean_abs_shap"],
               [(r, n, v) for r, (n, v) in enumerate(global_importance(expl))])


def write_dependence_csv(expl: Explanation, feature: int, path):
    dep = dependence_data(expl, feature)
    name = expl.feature_names[feature]
    inter = None if dep.interaction_feature_index is None else expl.feature_names[dep.interaction_feature_index]
    header = [name, f"shap_{name}", inter if inter is not None else "interaction"]
    write_rows(path, header, [(x, s, "" if c is None else c) for x, s, c in dep.points])
    return dep

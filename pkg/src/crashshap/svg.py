"""Small deterministic SVG renderer for the report figures.

Only what the CLI needs: line charts with error bands, scatter plots with a
blue-to-red value colouring, and horizontal bar charts.
"""
from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

W, H = 640, 420
ML, MR, MT, MB = 70, 20, 40, 50


def _f(v: float) -> str:
    return f"{v:.2f}"


def _color(t: float) -> str:
    t = min(max(float(t), 0.0), 1.0)
    r, b = int(30 + 205 * t), int(235 - 205 * t)
    return f"rgb({r},40,{b})"


class _Canvas:
    def __init__(self, title, xlabel, ylabel, xlim, ylim, width=W, height=H):
        self.w, self.h = width, height
        self.xlim = xlim if xlim[1] > xlim[0] else (xlim[0] - 1, xlim[1] + 1)
        self.ylim = ylim if ylim[1] > ylim[0] else (ylim[0] - 1, ylim[1] + 1)
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
            f'<rect width="{width}" height="{height}" fill="white"/>',
            f'<text x="{width / 2}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>',
            f'<text x="{width / 2}" y="{height - 10}" text-anchor="middle">{escape(xlabel)}</text>',
            f'<text x="15" y="{height / 2}" text-anchor="middle" transform="rotate(-90 15 {height / 2})">{escape(ylabel)}</text>',
        ]
        self._axes()

    def sx(self, x):
        a, b = self.xlim
        return ML + (x - a) / (b - a) * (self.w - ML - MR)

    def sy(self, y):
        a, b = self.ylim
        return self.h - MB - (y - a) / (b - a) * (self.h - MT - MB)

    def _axes(self):
        x0, x1, y0, y1 = ML, self.w - MR, self.h - MB, MT
        self.parts.append(f'<path d="M{x0},{y1} L{x0},{y0} L{x1},{y0}" fill="none" stroke="black"/>')
        for t in np.linspace(*self.xlim, 5):
            self.parts.append(f'<text x="{_f(self.sx(t))}" y="{y0 + 15}" text-anchor="middle">{t:.3g}</text>')
        for t in np.linspace(*self.ylim, 5):
            self.parts.append(f'<text x="{x0 - 5}" y="{_f(self.sy(t) + 4)}" text-anchor="end">{t:.3g}</text>')

    def line(self, xs, ys, color="steelblue", width=2):
        pts = " ".join(f"{_f(self.sx(x))},{_f(self.sy(y))}" for x, y in zip(xs, ys))
        self.parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="{width}"/>')

    def band(self, xs, lo, hi, color="steelblue"):
        pts = [f"{_f(self.sx(x))},{_f(self.sy(y))}" for x, y in zip(xs, hi)]
        pts += [f"{_f(self.sx(x))},{_f(self.sy(y))}" for x, y in zip(xs[::-1], lo[::-1])]
        self.parts.append(f'<polygon points="{" ".join(pts)}" fill="{color}" fill-opacity="0.2" stroke="none"/>')

    def dot(self, x, y, color, r=2.5):
        self.parts.append(f'<circle cx="{_f(self.sx(x))}" cy="{_f(self.sy(y))}" r="{r}" fill="{color}"/>')

    def text(self, x, y, s, anchor="start"):
        self.parts.append(f'<text x="{_f(x)}" y="{_f(y)}" text-anchor="{anchor}">{escape(s)}</text>')

    def save(self, path):
        Path(path).write_text("\n".join(self.parts + ["</svg>"]) + "\n", encoding="utf-8")


def rfecv_curve(counts, means, stds, path, best_count=None):
    counts, means, stds = map(np.asarray, (counts, means, stds))
    c = _Canvas("SHAP recursive feature elimination", "number of features", "mean validation ROC-AUC",
                (counts.min(), counts.max()), (float((means - stds).min()), float((means + stds).max())))
    order = np.argsort(counts)
    c.band(counts[order], (means - stds)[order], (means + stds)[order])
    c.line(counts[order], means[order])
    if best_count is not None:
        i = int(np.flatnonzero(counts == best_count)[0])
        c.dot(counts[i], means[i], "crimson", r=4)
        c.text(c.sx(counts[i]) + 6, c.sy(means[i]) - 6, f"best: {best_count}")
    c.save(path)


def roc_curves(curves: dict, path):
    c = _Canvas("ROC curves (test set)", "false positive rate", "true positive rate", (0, 1), (0, 1))
    c.line([0, 1], [0, 1], color="gray", width=1)
    palette = ["steelblue", "crimson", "darkgreen", "darkorange", "purple", "black"]
    for k, (name, (fpr, tpr, auc)) in enumerate(curves.items()):
        col = palette[k % len(palette)]
        c.line(fpr, tpr, color=col)
        c.parts.append(f'<text x="{ML + 300}" y="{MT + 250 + 14 * k}" fill="{col}">{escape(name)} (AUC {auc:.3f})</text>')
    c.save(path)


def beeswarm(features, path, jitter_seed=0):
    """``features``: list of (name, shap array, normalised value array), top first."""
    rng = np.random.default_rng(jitter_seed)
    k = len(features)
    allv = np.concatenate([s for _, s, _ in features]) if k else np.zeros(1)
    c = _Canvas("SHAP summary", "SHAP value (log-odds)", "", (float(allv.min()), float(allv.max())),
                (-0.5, k - 0.5), height=max(H, 40 + 22 * k + MB))
    for rank, (name, shap, norm) in enumerate(features):
        y = k - 1 - rank
        c.text(ML + 4, c.sy(y) - 8, name)
        for s, v in zip(shap, norm):
            c.dot(s, y + rng.uniform(-0.3, 0.3), _color(v), r=2)
    c.save(path)


def scatter(xs, ys, colors, path, title, xlabel, ylabel):
    xs, ys = np.asarray(xs, float), np.asarray(ys, float)
    c = _Canvas(title, xlabel, ylabel, (float(xs.min()), float(xs.max())), (float(ys.min()), float(ys.max())))
    cs = np.zeros(len(xs)) if colors is None else np.asarray(colors, float)
    for x, y, v in zip(xs, ys, cs):
        c.dot(x, y, _color(v))
    c.save(path)


def force_bars(force, path):
    """Horizontal bars of the largest contributions, red pushes towards fatal."""
    items = [(n, s) for n, _, s in force.contributions]
    if force.n_other:
        items.append((f"{force.n_other} other features", force.other_phi))
    vals = [s for _, s in items] or [0.0]
    lim = max(abs(min(vals)), abs(max(vals)), 1e-12)
    c = _Canvas(f"f(x) = {force.fx:.3f}, base value = {force.base_value:.3f}", "SHAP value (log-odds)", "",
                (-lim, lim), (-0.5, len(items) - 0.5), height=max(H, 40 + 24 * len(items) + MB))
    for i, (name, s) in enumerate(items):
        y = len(items) - 1 - i
        x0, x1 = sorted((c.sx(0), c.sx(s)))
        col = "crimson" if s > 0 else "steelblue"
        c.parts.append(f'<rect x="{_f(x0)}" y="{_f(c.sy(y) - 8)}" width="{_f(max(x1 - x0, 0.5))}" height="16" fill="{col}"/>')
        c.text(ML + 4, c.sy(y) + 4, name)
    c.save(path)

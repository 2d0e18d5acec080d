"""Histogram gradient-boosted trees for binary logistic loss.

Two growth disciplines share one split finder:

* ``leaf_wise`` keeps a frontier of leaves and always splits the one whose
  best split has the largest gain, until ``max_leaves`` leaves exist;
* ``level_wise`` splits every splittable node of a depth level before moving
  on, until ``max_depth``.

Split gain is ``0.5 * (GL^2/(HL+l) + GR^2/(HR+l) - G^2/(H+l))`` over bin
boundaries and leaf values are ``-lr * G / (H + l)``.
"""
from __future__ import annotations

import heapq
import json
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .. import kernels
from ..errors import ConfigError, TrainingError
from .binning import HistogramBins, build_histograms
from .tree import LEAF, DecisionTree, TreeNode, tree_from_nodes

MARGIN_CLIP = 36.0
GROWTH = ("leaf_wise", "level_wise")


def sigmoid(m):
    m = np.clip(m, -MARGIN_CLIP, MARGIN_CLIP)
    return 1.0 / (1.0 + np.exp(-m))


def logistic_loss(y, margin) -> float:
    return float(np.mean(np.logaddexp(0.0, margin) - y * margin))


@dataclass(frozen=True)
class GbdtConfig:
    n_trees: int = 200
    learning_rate: float = 0.1
    growth: str = "leaf_wise"
    max_leaves: int = 31
    max_depth: int = 6
    min_child_hessian: float = 1.0
    lambda_l2: float = 1.0
    max_bins: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.growth not in GROWTH:
            raise ConfigError(f"growth must be one of {GROWTH}, got {self.growth!r}")
        for name in ("n_trees", "max_leaves", "max_depth", "max_bins"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.max_leaves < 2 and self.growth == "leaf_wise":
            raise ConfigError("max_leaves must be at least 2")
        if not 2 <= self.max_bins <= 256:
            raise ConfigError("max_bins must lie in [2, 256]")
        for name in ("learning_rate", "min_child_hessian", "lambda_l2"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")

    kind = "gbdt"

    def to_dict(self) -> dict:
        return {"kind": self.kind, **asdict(self)}

    @classmethod
    def from_dict(cls, d) -> "GbdtConfig":
        d = {k: v for k, v in d.items() if k != "kind"}
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(f"bad gbdt config: {exc}") from exc


@dataclass
class GbdtModel:
    trees: list
    base_score: float
    config: GbdtConfig
    bins: HistogramBins
    feature_names: tuple
    train_loss: list = field(default_factory=list, compare=False, repr=False)

    kind = "gbdt"

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def _check(self, X):
        X = np.asarray(X, dtype=np.float64)
        single = X.ndim == 1
        if single:
            X = X[None, :]
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got shape {np.shape(X)}")
        return X, single

    def predict_margin(self, X):
        """Log-odds ``base_score + sum_t tree_t(x)``; 1-D input returns a float."""
        X, single = self._check(X)
        m = np.full(X.shape[0], self.base_score)
        for t in self.trees:
            m = m + t.predict(X)
        return float(m[0]) if single else m

    def predict_proba(self, X):
        m = self.predict_margin(X)
        return float(sigmoid(m)) if np.ndim(m) == 0 else sigmoid(m)

    def used_features(self) -> set:
        out = set()
        for t in self.trees:
            out |= t.used_features()
        return out

    def with_weights_from(self, background) -> "GbdtModel":
        background = np.asarray(background, dtype=np.float64)
        return replace(self, trees=[t.with_weights_from(background) for t in self.trees])

    def to_dict(self) -> dict:
        return {
            "format": "crashshap.model",
            "kind": self.kind,
            "config": self.config.to_dict(),
            "base_score": self.base_score,
            "feature_names": list(self.feature_names),
            "bins": self.bins.to_dict(),
            "trees": [t.to_dict(self.feature_names) for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d) -> "GbdtModel":
        return cls(
            trees=[DecisionTree.from_dict(t) for t in d["trees"]],
            base_score=float(d["base_score"]),
            config=GbdtConfig.from_dict(d["config"]),
            bins=HistogramBins.from_dict(d["bins"]),
            feature_names=tuple(d["feature_names"]),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1)


class _Node:
    __slots__ = ("id", "rows", "hist", "depth", "split")

    def __init__(self, id, rows, hist, depth):
        self.id = id
        self.rows = rows
        self.hist = hist
        self.depth = depth
        self.split = None


class _Grower:
    """Grows one tree for fixed gradients and hessians."""

    def __init__(self, B, nbf, n_bins, g, h, cfg: GbdtConfig):
        self.B, self.nbf, self.n_bins = B, nbf, n_bins
        self.g, self.h, self.cfg = g, h, cfg
        self.n_total = B.shape[0]
        self.records = []  # node id -> [feature, threshold-bin, left, right, gain, rows]

    def _new(self, rows, hist, depth):
        node = _Node(len(self.records), rows, hist, depth)
        self.records.append([LEAF, -1, LEAF, LEAF, 0.0, rows])
        gain, f, b = kernels.backend.best_split(*hist, self.nbf, self.cfg.lambda_l2, self.cfg.min_child_hessian)
        if f >= 0:
            node.split = (gain, f, b)
        return node

    def _split(self, node):
        gain, f, b = node.split
        rows = node.rows
        mask = self.B[rows, f] <= b
        lrows, rrows = rows[mask], rows[~mask]
        build = kernels.backend.build_histogram
        # histogram the smaller child, derive the larger by subtraction
        if len(lrows) <= len(rrows):
            hl = build(self.B, self.g, self.h, lrows, self.n_bins)
            hr = tuple(P - S for P, S in zip(node.hist, hl))
        else:
            hr = build(self.B, self.g, self.h, rrows, self.n_bins)
            hl = tuple(P - S for P, S in zip(node.hist, hr))
        left = self._new(lrows, hl, node.depth + 1)
        right = self._new(rrows, hr, node.depth + 1)
        self.records[node.id][:5] = [f, b, left.id, right.id, gain]
        node.hist = None
        return left, right

    def grow(self) -> list:
        cfg = self.cfg
        root_rows = np.arange(self.n_total, dtype=np.intp)
        root = self._new(root_rows, kernels.backend.build_histogram(self.B, self.g, self.h, root_rows, self.n_bins), 0)
        if cfg.growth == "leaf_wise":
            heap = []
            if root.split:
                heapq.heappush(heap, (-root.split[0], root.id, root))
            n_leaves = 1
            while heap and n_leaves < cfg.max_leaves:
                _, _, node = heapq.heappop(heap)
                for child in self._split(node):
                    if child.split:
                        heapq.heappush(heap, (-child.split[0], child.id, child))
                n_leaves += 1
        else:
            frontier = [root]
            for _ in range(cfg.max_depth):
                nxt = []
                for node in frontier:
                    if node.split:
                        nxt.extend(self._split(node))
                frontier = nxt
        return self.records


def _finish_tree(records, edges, g, h, cfg: GbdtConfig, n_total: int) -> tuple[DecisionTree, list]:
    nodes = []
    leaves = []
    lam, lr = cfg.lambda_l2, cfg.learning_rate
    for i, (f, b, left, right, gain, rows) in enumerate(records):
        G = float(np.sum(g[rows]))
        H = float(np.sum(h[rows]))
        frac = len(rows) / n_total
        if left == LEAF:
            value = -lr * G / (H + lam)
            nodes.append(TreeNode(LEAF, 0.0, LEAF, LEAF, value, H, frac, 0.0))
            leaves.append((rows, value))
        else:
            nodes.append(TreeNode(f, float(edges[f][b]), left, right, 0.0, H, frac, gain))
    return tree_from_nodes(nodes), leaves


def _as_arrays(train):
    if hasattr(train, "x"):
        return np.asarray(train.x, dtype=np.float64), np.asarray(train.y, dtype=np.float64), tuple(train.feature_names)
    x, y = train
    x = np.asarray(x, dtype=np.float64)
    return x, np.asarray(y, dtype=np.float64), tuple(f"f{j}" for j in range(x.shape[1]))


def fit_gbdt(train, cfg: GbdtConfig | None = None) -> GbdtModel:
    """Fit on an :class:`~crashshap.dataset.EncodedMatrix` or an ``(x, y)`` pair."""
    cfg = cfg or GbdtConfig()
    x, y, names = _as_arrays(train)
    n = x.shape[0]
    pos = float(np.sum(y))
    if n == 0 or pos == 0 or pos == n:
        raise TrainingError("GBDT training needs both classes present")
    pbar = pos / n
    base = math.log(pbar / (1.0 - pbar))

    bins = build_histograms(x, cfg.max_bins)
    B = bins.transform(x)
    nbf = bins.n_bins
    n_bins = int(nbf.max())

    margin = np.full(n, base)
    history = [logistic_loss(y, margin)]
    trees = []
    for _ in range(cfg.n_trees):
        p = sigmoid(margin)
        g = p - y
        h = p * (1.0 - p)
        records = _Grower(B, nbf, n_bins, g, h, cfg).grow()
        tree, leaves = _finish_tree(records, bins.edges, g, h, cfg, n)
        for rows, value in leaves:
            margin[rows] = margin[rows] + value
        trees.append(tree)
        history.append(logistic_loss(y, margin))
    return GbdtModel(trees, base, cfg, bins, names, history)

"""Binary decision trees stored as parallel node arrays."""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

LEAF = -1


class TreeNode(NamedTuple):
    """Read-only view of one node. ``feature`` is -1 on leaves."""

    feature: int
    threshold: float
    left: int
    right: int
    value: float
    cover: float
    weight_fraction: float
    gain: float

    @property
    def is_leaf(self) -> bool:
        return self.left == LEAF


@dataclass(frozen=True)
class DecisionTree:
    """Rows with ``x[feature] < threshold`` go left.

    ``value`` already includes the learning rate. ``cover`` is the hessian sum
    and ``weight_fraction`` the share of training rows reaching each node.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    cover: np.ndarray
    weight_fraction: np.ndarray
    gain: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def n_leaves(self) -> int:
        return int(np.sum(self.left == LEAF))

    def node(self, i: int) -> TreeNode:
        return TreeNode(int(self.feature[i]), float(self.threshold[i]), int(self.left[i]), int(self.right[i]),
                        float(self.value[i]), float(self.cover[i]), float(self.weight_fraction[i]), float(self.gain[i]))

    @property
    def max_depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=np.intp)
        for i in range(self.n_nodes):
            if self.left[i] != LEAF:
                depth[self.left[i]] = depth[i] + 1
                depth[self.right[i]] = depth[i] + 1
        return int(depth.max())

    def used_features(self) -> set:
        return {int(f) for f in self.feature[self.left != LEAF]}

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by every row."""
        X = np.asarray(X, dtype=np.float64)
        node = np.zeros(X.shape[0], dtype=np.intp)
        rows = np.arange(X.shape[0])
        feat = np.where(self.feature < 0, 0, self.feature)
        while True:
            internal = self.left[node] != LEAF
            if not internal.any():
                return node
            go_left = X[rows, feat[node]] < self.threshold[node]
            node = np.where(internal, np.where(go_left, self.left[node], self.right[node]), node)

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def expected_value(self) -> float:
        leaves = self.left == LEAF
        return float(np.sum(self.value[leaves] * self.weight_fraction[leaves]))

    def node_paths(self, X: np.ndarray) -> np.ndarray:
        """Boolean ``(n, n_nodes)`` matrix: does row i pass through node j."""
        X = np.asarray(X, dtype=np.float64)
        through = np.zeros((X.shape[0], self.n_nodes), dtype=bool)
        through[:, 0] = True
        for i in range(self.n_nodes):
            if self.left[i] == LEAF:
                continue
            go_left = X[:, self.feature[i]] < self.threshold[i]
            through[:, self.left[i]] = through[:, i] & go_left
            through[:, self.right[i]] = through[:, i] & ~go_left
        return through

    def with_weights_from(self, background: np.ndarray) -> "DecisionTree":
        """Copy with ``weight_fraction`` recomputed by routing ``background``."""
        frac = self.node_paths(background).mean(axis=0)
        return DecisionTree(self.feature, self.threshold, self.left, self.right, self.value,
                            self.cover, frac, self.gain)

    # JSON as nested node records
    def to_dict(self, feature_names=None, i: int = 0) -> dict:
        n = self.node(i)
        rec = {"cover": n.cover, "weight_fraction": n.weight_fraction}
        if n.is_leaf:
            rec["value"] = n.value
            return rec
        rec = {
            "feature": n.feature,
            **({"feature_name": feature_names[n.feature]} if feature_names is not None else {}),
            "threshold": n.threshold,
            "gain": n.gain,
            **rec,
            "left": self.to_dict(feature_names, n.left),
            "right": self.to_dict(feature_names, n.right),
        }
        return rec

    @classmethod
    def from_dict(cls, root: dict) -> "DecisionTree":
        cols = {k: [] for k in ("feature", "threshold", "left", "right", "value", "cover", "weight_fraction", "gain")}

        def visit(rec):
            i = len(cols["feature"])
            leaf = "value" in rec
            cols["feature"].append(LEAF if leaf else int(rec["feature"]))
            cols["threshold"].append(0.0 if leaf else float(rec["threshold"]))
            cols["value"].append(float(rec["value"]) if leaf else 0.0)
            cols["cover"].append(float(rec["cover"]))
            cols["weight_fraction"].append(float(rec["weight_fraction"]))
            cols["gain"].append(0.0 if leaf else float(rec["gain"]))
            cols["left"].append(LEAF)
            cols["right"].append(LEAF)
            if not leaf:
                cols["left"][i] = visit(rec["left"])
                cols["right"][i] = visit(rec["right"])
            return i

        visit(root)
        ints = ("feature", "left", "right")
        return cls(**{k: np.array(v, dtype=np.intp if k in ints else np.float64) for k, v in cols.items()})


def tree_from_nodes(nodes) -> DecisionTree:
    """Build from a list of :class:`TreeNode` (children referenced by index)."""
    cols = list(zip(*nodes))
    ints = (0, 2, 3)
    arrs = [np.array(c, dtype=np.intp if i in ints else np.float64) for i, c in enumerate(cols)]
    return DecisionTree(*arrs)

"""Quantile histogram binning."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class HistogramBins:
    """Per-feature ascending bin edges.

    A value ``v`` falls in bin ``#{edges < v}``. Edges sit halfway between
    adjacent distinct training values, so no training value lies on an edge
    and ``v < edge`` reproduces the bin partition exactly at predict time.
    """

    edges: tuple
    max_bins: int = 32

    @property
    def n_features(self) -> int:
        return len(self.edges)

    @property
    def n_bins(self) -> np.ndarray:
        return np.array([len(e) + 1 for e in self.edges], dtype=np.intp)

    def transform(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        out = np.empty(x.shape, dtype=np.uint8)
        for j, e in enumerate(self.edges):
            out[:, j] = np.searchsorted(e, x[:, j], side="left")
        return np.ascontiguousarray(out)

    def to_dict(self) -> dict:
        return {"max_bins": self.max_bins, "edges": [e.tolist() for e in self.edges]}

    @classmethod
    def from_dict(cls, d) -> "HistogramBins":
        return cls(tuple(np.array(e, dtype=np.float64) for e in d["edges"]), int(d["max_bins"]))


def feature_edges(col: np.ndarray, max_bins: int) -> np.ndarray:
    values, counts = np.unique(col, return_counts=True)
    if len(values) <= max_bins:
        return (values[:-1] + values[1:]) / 2.0
    # cut where the cumulative count first reaches k/max_bins of the rows; rank based,
    # so any strictly increasing transform of the column yields the same partition
    cum = np.cumsum(counts)
    targets = np.arange(1, max_bins) * (cum[-1] / max_bins)
    cuts = np.unique(np.searchsorted(cum, targets, side="left"))
    cuts = cuts[cuts < len(values) - 1]
    return (values[cuts] + values[cuts + 1]) / 2.0


def build_histograms(x: np.ndarray, max_bins: int = 32) -> HistogramBins:
    if not 2 <= max_bins <= 256:
        raise ValueError("max_bins must lie in [2, 256]")
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 1:
        raise ValueError("need a non-empty n x p matrix")
    return HistogramBins(tuple(feature_edges(x[:, j], max_bins) for j in range(x.shape[1])), max_bins)

"""SMOTE oversampling of the minority class."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import numpy as np

from .dataset import EncodedMatrix
from .errors import ConfigError, DataError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SmoteConfig:
    k_neighbors: int = 5
    seed: int = 0
    target_ratio: float = 1.0

    def __post_init__(self):
        if self.k_neighbors < 1:
            raise ConfigError("k_neighbors must be >= 1")
        if not 0.0 < self.target_ratio <= 1.0:
            raise ConfigError("target_ratio must lie in (0, 1]")

    def for_fold(self, fold: int) -> "SmoteConfig":
        # fold seeds derive from the master seed only, so thread scheduling cannot matter
        return replace(self, seed=int(np.random.SeedSequence([self.seed, fold]).generate_state(1)[0]))


def minority_neighbors(xm: np.ndarray, k: int) -> np.ndarray:
    """Indices of the ``k`` nearest other rows (Euclidean), ties to the lower index."""
    m = len(xm)
    out = np.empty((m, k), dtype=np.intp)
    # explicit differences, not the Gram expansion: tie-breaking needs exact distances
    for start in range(0, m, 64):
        block = xm[start:start + 64]
        diff = block[:, None, :] - xm[None, :, :]
        d2 = np.einsum("ijk,ijk->ij", diff, diff)
        d2[np.arange(len(block)), np.arange(start, start + len(block))] = np.inf
        out[start:start + 64] = np.argsort(d2, axis=1, kind="stable")[:, :k]
    return out


def smote(train: EncodedMatrix, cfg: SmoteConfig) -> EncodedMatrix:
    """Raise the minority class to ``ceil(target_ratio * majority)`` rows.

    Synthetic rows ``x + u * (x_nn - x)`` are appended after the original
    rows, which are returned untouched.
    """
    if train.n == 0:
        raise DataError("SMOTE on an empty training set")
    n0, n1 = train.class_counts()
    minority = 0 if n0 < n1 else 1
    m, major = (n0, n1) if minority == 0 else (n1, n0)
    target = math.ceil(cfg.target_ratio * major)
    if m >= target:
        return train
    if m < 2:
        raise DataError(f"SMOTE needs at least 2 minority rows, got {m}")
    k = cfg.k_neighbors
    if k > m - 1:
        log.warning("k_neighbors=%d clamped to %d (minority has %d rows)", k, m - 1, m)
        k = m - 1

    idx = np.flatnonzero(train.y == minority)
    xm = train.x[idx]
    nn = minority_neighbors(xm, k)

    rng = np.random.default_rng(cfg.seed)
    n_new = target - m
    base = rng.integers(0, m, size=n_new)
    pick = rng.integers(0, k, size=n_new)
    u = rng.random(n_new)
    while np.any(u == 0.0):
        u[u == 0.0] = rng.random(int(np.sum(u == 0.0)))
    x0 = xm[base]
    x1 = xm[nn[base, pick]]
    synth = x0 + u[:, None] * (x1 - x0)

    x = np.vstack([train.x, synth])
    y = np.concatenate([train.y, np.full(n_new, minority, dtype=train.y.dtype)])
    return replace(train, x=x, y=y)

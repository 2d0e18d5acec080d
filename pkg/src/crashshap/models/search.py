"""Grid search over model configurations with stratified k-fold CV."""
from __future__ import annotations

from ..errors import ConfigError
from ..metrics import METRICS, cross_val_score, stratified_kfold


def grid_search(train, grid, k: int = 5, metric: str = "accuracy", seed: int = 0, smote=None, n_jobs: int = 1):
    """Return ``(best_config, table)``; ``table`` holds one row per grid entry.

    Every configuration sees the same folds. The best mean score wins and
    ties go to the earlier grid entry.
    """
    from . import fit_model

    grid = list(grid)
    if not grid:
        raise ConfigError("grid is empty")
    if metric not in METRICS:
        raise ConfigError(f"unknown metric {metric!r}")
    if k < 2:
        raise ConfigError("k must be at least 2")
    plan = stratified_kfold(train.y, k, seed)
    table = []
    best, best_score = None, None
    for i, cfg in enumerate(grid):
        res = cross_val_score(train, lambda tr, c=cfg: fit_model(tr, c), plan, metric, smote, n_jobs)
        table.append({"index": i, "config": cfg.to_dict(), "metric": metric, **res.to_dict()})
        if best_score is None or res.mean > best_score:
            best, best_score = cfg, res.mean
    return best, table

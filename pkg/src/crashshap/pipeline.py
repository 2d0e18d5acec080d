"""The fixed training-order pipeline shared by the CLI commands.

clean -> derive -> binarize -> encode -> split -> scale (fit on train)
-> SMOTE (train only) -> fit. Each stage's failures carry the stage name.
"""
from __future__ import annotations

import logging
from contextlib import contextmanager
from dataclasses import dataclass, field

from .dataset import (
    EncodedMatrix, RawTable, TabularSchema, binarize_target, clean, derive_features, encode,
    fit_scaler, scale_minmax, split_indices,
)
from .errors import ConfigError, CrashShapError
from .resampling import SmoteConfig, smote

log = logging.getLogger("crashshap.pipeline")


@contextmanager
def stage(name: str):
    try:
        yield
    except CrashShapError as exc:
        if str(exc).startswith("["):
            raise
        raise type(exc)(f"[{name}] {exc}") from exc


@dataclass
class Prepared:
    train: EncodedMatrix
    fit_set: EncodedMatrix
    test: EncodedMatrix
    train_idx: object
    test_idx: object
    stages: list = field(default_factory=list)

    def preprocessing(self, schema: TabularSchema, seed: int, test_fraction: float, smote_cfg) -> dict:
        """State needed to replay the preprocessing on new data."""
        return {
            "schema": schema.name,
            "schema_version": schema.version,
            "features": list(self.train.feature_names),
            "encoding_maps": {k: dict(v) for k, v in self.train.encoding_maps.items()},
            "scale_params": [list(p) for p in self.train.scale_params],
            "split": {"seed": seed, "test_fraction": test_fraction},
            "smote": None if smote_cfg is None else {
                "k_neighbors": smote_cfg.k_neighbors, "target_ratio": smote_cfg.target_ratio, "seed": smote_cfg.seed,
            },
        }


def _summary(name, **info):
    log.info("stage %s: %s", name, ", ".join(f"{k}={v}" for k, v in info.items()))
    return {"stage": name, **info}


def encode_table(table: RawTable, encoding_maps=None, features=None) -> tuple[EncodedMatrix, list]:
    stages = [_summary("load", rows=len(table))]
    with stage("clean"):
        table = clean(table)
    stages.append(_summary("clean", rows=len(table)))
    with stage("derive"):
        table = derive_features(table)
    with stage("binarize"):
        table = binarize_target(table)
    with stage("encode"):
        m = encode(table, encoding_maps)
        if features is not None:
            m = m.select(list(features))
    n0, n1 = m.class_counts()
    stages.append(_summary("encode", rows=m.n, features=m.p, non_fatal=n0, fatal=n1))
    return m, stages


def prepare(table: RawTable, seed: int, test_fraction: float = 0.2, smote_cfg: SmoteConfig | None = None,
            features=None) -> Prepared:
    m, stages = encode_table(table, features=features)
    with stage("split"):
        train_idx, test_idx = split_indices(m.y, test_fraction, seed)
    train, test = m.subset(train_idx), m.subset(test_idx)
    stages.append(_summary("split", train=train.n, test=test.n, test_fatal=int(test.y.sum())))
    with stage("scale"):
        params = fit_scaler(train)
        train = scale_minmax(train, params)
        test = scale_minmax(test, params)
    fit_set = train
    if smote_cfg is not None:
        with stage("smote"):
            fit_set = smote(train, smote_cfg)
    n0, n1 = fit_set.class_counts()
    stages.append(_summary("smote" if smote_cfg is not None else "no-smote", rows=fit_set.n, non_fatal=n0, fatal=n1))
    return Prepared(train, fit_set, test, train_idx, test_idx, stages)


def replay(table: RawTable, preprocessing: dict, split: str = "test") -> EncodedMatrix:
    """Apply stored encoding, split and scaling to ``table``.

    ``split`` picks the "train" or "test" partition, or "all" rows.
    """
    if split not in ("train", "test", "all"):
        raise ConfigError(f"split must be train, test or all; got {split!r}")
    m, _ = encode_table(table, preprocessing["encoding_maps"], preprocessing["features"])
    if split != "all":
        sp = preprocessing["split"]
        with stage("split"):
            tr, te = split_indices(m.y, sp["test_fraction"], sp["seed"])
        m = m.subset(tr if split == "train" else te)
    with stage("scale"):
        return scale_minmax(m, [tuple(p) for p in preprocessing["scale_params"]])

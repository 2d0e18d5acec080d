"""Model families and a uniform fit/load interface."""
import json
from pathlib import Path

from ..errors import ConfigError, DataError
from .baselines import GaussianNbModel, GnbConfig, LogisticConfig, LogisticModel, fit_gnb, fit_logistic
from .binning import HistogramBins, build_histograms
from .gbdt import GbdtConfig, GbdtModel, fit_gbdt, logistic_loss, sigmoid
from .search import grid_search
from .tree import DecisionTree, TreeNode

CONFIG_KINDS = {"gbdt": GbdtConfig, "logistic": LogisticConfig, "gnb": GnbConfig}
MODEL_KINDS = {"gbdt": GbdtModel, "logistic": LogisticModel, "gnb": GaussianNbModel}


def config_from_dict(d: dict):
    kind = d.get("kind", "gbdt")
    if kind not in CONFIG_KINDS:
        raise ConfigError(f"unknown model kind {kind!r}")
    cls = CONFIG_KINDS[kind]
    if kind == "gbdt":
        return cls.from_dict(d)
    try:
        return cls(**{k: v for k, v in d.items() if k != "kind"})
    except TypeError as exc:
        raise ConfigError(f"bad {kind} config: {exc}") from exc


def fit_model(train, cfg):
    """Fit whichever model family ``cfg`` describes."""
    if isinstance(cfg, GbdtConfig):
        return fit_gbdt(train, cfg)
    if isinstance(cfg, LogisticConfig):
        return fit_logistic(train, cfg.l2, cfg.epochs, cfg.step, cfg.tol)
    if isinstance(cfg, GnbConfig):
        return fit_gnb(train, cfg.var_floor)
    raise ConfigError(f"unsupported config {cfg!r}")


def model_from_dict(d: dict):
    kind = d.get("kind")
    if kind not in MODEL_KINDS:
        raise DataError(f"unknown model kind {kind!r}")
    return MODEL_KINDS[kind].from_dict(d)


def save_model(model, path, extra: dict | None = None) -> None:
    doc = model.to_dict()
    if extra:
        doc.update(extra)
    Path(path).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")


def load_model(path):
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read model {path}: {exc}") from exc
    return model_from_dict(doc), doc


__all__ = [
    "DecisionTree", "GaussianNbModel", "GbdtConfig", "GbdtModel", "GnbConfig", "HistogramBins",
    "LogisticConfig", "LogisticModel", "TreeNode", "build_histograms", "config_from_dict", "fit_gbdt",
    "fit_gnb", "fit_logistic", "fit_model", "grid_search", "load_model", "logistic_loss",
    "model_from_dict", "save_model", "sigmoid",
]

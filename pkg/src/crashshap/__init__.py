"""Crash-fatality classification: synthetic data, SMOTE, histogram GBDT, TreeSHAP."""
__version__ = "0.1.0"

from .dataset import (
    DEFAULT_SIGNAL, EncodedMatrix, RawTable, SignalSpec, TabularSchema, generate_synthetic, load_csv,
    load_schema, preprocess,
)
from .errors import (
    ConfigError, CrashShapError, DataError, EmptyDatasetError, ExplanationError, SchemaError, TrainingError,
)
from .explain import (
    Explanation, dependence_data, explain_set, force_decomposition, global_importance, shapley_exact,
    tree_shap, tree_shap_matrix,
)
from .featsel import ElimReport, shap_rfecv
from .kernels import BACKEND
from .metrics import evaluate_scores, roc_auc, stratified_kfold
from .models import GbdtConfig, GbdtModel, fit_gbdt, fit_model, load_model, save_model
from .resampling import SmoteConfig, smote

__all__ = [
    "BACKEND", "ConfigError", "CrashShapError", "DEFAULT_SIGNAL", "DataError", "ElimReport", "EmptyDatasetError",
    "EncodedMatrix", "Explanation", "ExplanationError", "GbdtConfig", "GbdtModel", "RawTable", "SchemaError",
    "SignalSpec", "SmoteConfig", "TabularSchema", "TrainingError", "dependence_data", "evaluate_scores",
    "explain_set", "fit_gbdt", "fit_model", "force_decomposition", "generate_synthetic", "global_importance",
    "load_csv", "load_model", "load_schema", "preprocess", "roc_auc", "save_model", "shap_rfecv",
    "shapley_exact", "smote", "stratified_kfold", "tree_shap", "tree_shap_matrix",
]

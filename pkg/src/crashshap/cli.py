"""Command-line entry point.

Subcommands: synth, train, evaluate, rfecv, explain, report. Settings come
from built-in defaults, then an optional ``--config`` JSON file, then flags.

Exit codes: 0 success, 2 configuration, 3 data, 4 training, 5 explanation
consistency.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, svg
from .dataset import DEFAULT_SIGNAL, SignalSpec, generate_synthetic, load_csv, load_schema, write_csv
from .errors import ConfigError, CrashShapError, DataError, ExplanationError, TrainingError
from .explain import LOCAL_ACCURACY_TOL, explain_set, force_decomposition, global_importance
from .exports import (
    beeswarm_data, heatmap_data, slug, write_dependence_csv, write_importance_csv, write_json,
    write_roc_csv,
)
from .featsel import shap_rfecv
from .metrics import cross_val_score, evaluate_scores, stratified_kfold
from .models import (
    GbdtConfig, GbdtModel, GnbConfig, LogisticConfig, config_from_dict, fit_model, grid_search,
    load_model, save_model,
)
from .pipeline import prepare, replay, stage
from .resampling import SmoteConfig

log = logging.getLogger("crashshap")

DEFAULTS = {
    "schema": None,
    "data": None,
    "out": "out",
    "seed": None,
    "test_fraction": 0.2,
    "smote": True,
    "smote_k": 5,
    "smote_ratio": 1.0,
    "model": "gbdt",
    "gbdt": {},
    "logistic": {},
    "grid": None,
    "cv_folds": 5,
    "metric": "accuracy",
    "features_from": None,
    "jobs": 1,
    "svg": True,
    # synth
    "n": 1700,
    "imbalance": "1165:535",
    "signal": None,
    # rfecv
    "step": 1,
    "min_features": 1,
    # explain / evaluate
    "model_path": None,
    "split": "test",
    "dependence": None,
    "force_rows": "0",
    "top_k": 10,
}

GBDT_FLAGS = ("n_trees", "learning_rate", "growth", "max_leaves", "max_depth", "min_child_hessian",
              "lambda_l2", "max_bins")


@dataclass
class RunConfig:
    schema: str | None
    data: str | None
    out: Path
    seed: int
    test_fraction: float
    smote: SmoteConfig | None
    gbdt: GbdtConfig
    model: str
    settings: dict = field(default_factory=dict)

    def model_config(self):
        if self.model == "gbdt":
            return self.gbdt
        if self.model == "logistic":
            return LogisticConfig(**self.settings.get("logistic", {}))
        if self.model == "gnb":
            return GnbConfig()
        raise ConfigError(f"unknown model {self.model!r}")


def _merge(args: argparse.Namespace) -> dict:
    settings = json.loads(json.dumps(DEFAULTS))
    if getattr(args, "config", None):
        try:
            doc = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        unknown = set(doc) - set(DEFAULTS)
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        settings.update(doc)
    for k, v in vars(args).items():
        if v is None or k in ("command", "config", "func"):
            continue
        if k in GBDT_FLAGS:
            settings["gbdt"] = {**settings["gbdt"], k: v}
        else:
            settings[k] = v
    return settings


def build_run_config(settings: dict, need_seed: bool = True) -> RunConfig:
    if need_seed and settings.get("seed") is None:
        raise ConfigError("a seed is required (--seed or config 'seed')")
    seed = int(settings.get("seed") or 0)
    for key in ("schema", "data", "features_from", "model_path", "grid", "signal"):
        p = settings.get(key)
        if p is not None and not Path(p).exists():
            raise ConfigError(f"{key} path does not exist: {p}")
    tf = float(settings["test_fraction"])
    if not 0 < tf < 1:
        raise ConfigError("test-fraction must lie in (0, 1)")
    smote_cfg = SmoteConfig(int(settings["smote_k"]), seed, float(settings["smote_ratio"])) if settings["smote"] else None
    gbdt = GbdtConfig.from_dict({**settings["gbdt"], "seed": seed})
    return RunConfig(settings["schema"], settings["data"], Path(settings["out"]), seed, tf, smote_cfg, gbdt,
                     settings["model"], settings)


@contextmanager
def locked(out: Path):
    out.mkdir(parents=True, exist_ok=True)
    lock = out / ".crashshap.lock"
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise ConfigError(f"output directory {out} is locked by another run ({lock})") from None
    try:
        os.close(fd)
        yield out
    finally:
        lock.unlink(missing_ok=True)


def _load_table(rc: RunConfig):
    if rc.data is None:
        raise ConfigError("--data is required")
    schema = load_schema(rc.schema)
    with stage("load"):
        return schema, load_csv(rc.data, schema)


def _features_from(settings) -> list | None:
    path = settings.get("features_from")
    if path is None:
        return None
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    feats = doc["best_features"] if isinstance(doc, dict) else doc
    if not feats:
        raise ConfigError("features-from file lists no features")
    return list(feats)


# ---------------------------------------------------------------------------
# commands

def cmd_synth(settings: dict) -> int:
    rc = build_run_config({**settings, "seed": 42 if settings.get("seed") is None else settings["seed"]})
    n = int(settings["n"])
    if n < 50:
        raise ConfigError(f"--n must be at least 50, got {n}")
    try:
        fatal, non_fatal = (float(v) for v in str(settings["imbalance"]).split(":"))
    except ValueError:
        raise ConfigError("--imbalance must look like FATAL:NONFATAL") from None
    schema = load_schema(rc.schema)
    if settings.get("signal"):
        weights = json.loads(Path(settings["signal"]).read_text(encoding="utf-8"))
    else:
        # default weights only apply to columns this schema actually has
        raw = {c.name for c in schema.raw_features}
        weights = {k: w for k, w in DEFAULT_SIGNAL.weights.items() if k in raw}
        if not weights:
            raise ConfigError("schema shares no columns with the default signal; pass --signal")
    signal = SignalSpec(weights, (fatal, non_fatal))
    with stage("synth"):
        table = generate_synthetic(schema, n, rc.seed, signal)
    with locked(rc.out) as out:
        try:
            write_csv(table, out / "data.csv")
        except OSError as exc:
            raise ConfigError(f"cannot write to {out}: {exc}") from exc
        write_json({"seed": rc.seed, "n": n, **signal.to_dict()}, out / "ground_truth.json")
    print(f"wrote {n} rows to {rc.out / 'data.csv'}")
    return 0


def _fit(rc: RunConfig, prepared, settings):
    cfg = rc.model_config()
    grid_table = None
    if settings.get("grid"):
        grid = [config_from_dict({**g, **({"seed": rc.seed} if g.get("kind", "gbdt") == "gbdt" else {})})
                for g in json.loads(Path(settings["grid"]).read_text(encoding="utf-8"))]
        with stage("grid-search"):
            cfg, grid_table = grid_search(prepared.train, grid, int(settings["cv_folds"]), settings["metric"],
                                          rc.seed, rc.smote, int(settings["jobs"]))
    try:
        with stage("fit"):
            model = fit_model(prepared.fit_set, cfg)
    except (ValueError, FloatingPointError) as exc:
        if isinstance(exc, CrashShapError):
            raise
        raise TrainingError(f"[fit] {exc}") from exc
    return cfg, model, grid_table


def cmd_train(settings: dict) -> int:
    rc = build_run_config(settings)
    schema, table = _load_table(rc)
    features = _features_from(settings)
    prepared = prepare(table, rc.seed, rc.test_fraction, rc.smote, features)
    cfg, model, grid_table = _fit(rc, prepared, settings)
    with stage("cv"):
        plan = stratified_kfold(prepared.train.y, int(settings["cv_folds"]), rc.seed)
        cv = cross_val_score(prepared.train, lambda tr: fit_model(tr, cfg), plan, settings["metric"], rc.smote,
                             int(settings["jobs"]))
    pre = prepared.preprocessing(schema, rc.seed, rc.test_fraction, rc.smote)
    train_rep = evaluate_scores(prepared.fit_set.y, model.predict_proba(prepared.fit_set.x))
    test_rep = evaluate_scores(prepared.test.y, model.predict_proba(prepared.test.x))
    with locked(rc.out) as out:
        save_model(model, out / "model.json", {"preprocessing": pre})
        write_json({
            "model": cfg.to_dict(),
            "features": list(prepared.train.feature_names),
            "stages": prepared.stages,
            "cv": {"metric": settings["metric"], "k": int(settings["cv_folds"]), **cv.to_dict()},
            "train": train_rep.to_dict(),
            "test": test_rep.to_dict(),
        }, out / "metrics.json")
        write_roc_csv(test_rep.roc_curve, out / "roc_test.csv")
        if grid_table is not None:
            write_json(grid_table, out / "grid.json")
    log.info("training used features: %s", ", ".join(prepared.train.feature_names))
    print(f"test ROC-AUC {test_rep.roc_auc:.4f}  accuracy {test_rep.accuracy:.4f}  -> {rc.out / 'model.json'}")
    return 0


def _load_model_and_data(settings):
    rc = build_run_config(settings, need_seed=False)
    if settings.get("model_path") is None:
        raise ConfigError("--model is required")
    model, doc = load_model(settings["model_path"])
    pre = doc.get("preprocessing")
    if pre is None:
        raise ConfigError("model file carries no preprocessing block")
    schema, table = _load_table(rc)
    if (pre["schema"], pre["schema_version"]) != (schema.name, schema.version):
        raise ConfigError(f"model was trained with schema {pre['schema']} v{pre['schema_version']}, "
                          f"data uses {schema.name} v{schema.version}")
    data = replay(table, pre, settings["split"])
    return rc, model, data


def cmd_evaluate(settings: dict) -> int:
    rc, model, data = _load_model_and_data(settings)
    rep = evaluate_scores(data.y, model.predict_proba(data.x))
    with locked(rc.out) as out:
        write_json({"split": settings["split"], "n": data.n, **rep.to_dict()}, out / "evaluation.json")
        write_roc_csv(rep.roc_curve, out / "roc.csv")
    print(f"{settings['split']} ROC-AUC {rep.roc_auc:.4f}  accuracy {rep.accuracy:.4f}")
    return 0


def cmd_rfecv(settings: dict) -> int:
    rc = build_run_config(settings)
    _, table = _load_table(rc)
    prepared = prepare(table, rc.seed, rc.test_fraction, None)
    with stage("rfecv"):
        report = shap_rfecv(prepared.train, rc.gbdt, int(settings["cv_folds"]), int(settings["step"]),
                            int(settings["min_features"]), rc.seed, rc.smote, int(settings["jobs"]))
    with locked(rc.out) as out:
        report.write_csv(out / "elim_report.csv")
        report.write_json(out / "elim_report.json")
        write_json({"best_count": report.best_count, "best_features": report.best_features}, out / "best_features.json")
        if settings["svg"]:
            svg.rfecv_curve([s.feature_count for s in report.steps], [s.mean_auc for s in report.steps],
                            [s.std_auc for s in report.steps], out / "rfecv.svg", report.best_count)
    print(f"best feature count {report.best_count}: {', '.join(report.best_features)}")
    return 0


def _parse_rows(spec) -> list[int]:
    if isinstance(spec, list):
        return [int(v) for v in spec]
    try:
        return [int(v) for v in str(spec).split(",") if v.strip() != ""]
    except ValueError:
        raise ConfigError(f"bad --force-rows {spec!r}") from None


def cmd_explain(settings: dict) -> int:
    rc, model, data = _load_model_and_data(settings)
    if not isinstance(model, GbdtModel):
        raise ConfigError("explain needs a gbdt model")
    with stage("explain"):
        expl = explain_set(model, data.x)
    if expl.n == 0:
        raise DataError("no rows to explain")
    ranking = global_importance(expl)
    dep = settings.get("dependence")
    if dep is None:
        dep_names = [n for n, _ in ranking[:4]]
    else:
        dep_names = dep if isinstance(dep, list) else [d.strip() for d in str(dep).split(",") if d.strip()]
    unknown = [d for d in dep_names if d not in expl.feature_names]
    if unknown:
        raise ConfigError(f"unknown dependence features {unknown}")
    rows = _parse_rows(settings["force_rows"])
    forces = []
    with stage("force"):
        for r in rows:
            fp = force_decomposition(expl, r, int(settings["top_k"]))
            # re-check on the emitted numbers, not just the in-memory matrix
            total = fp.base_value + sum(s for _, _, s in fp.contributions) + fp.other_phi
            if abs(total - fp.fx) > LOCAL_ACCURACY_TOL:
                raise ExplanationError(f"force row {r}: decomposition misses f(x) by {abs(total - fp.fx):.3g}")
            forces.append(fp)
    with locked(rc.out) as out:
        write_json(expl.to_dict(), out / "explanation.json")
        write_json(beeswarm_data(expl), out / "beeswarm.json")
        write_json(heatmap_data(expl), out / "heatmap.json")
        write_importance_csv(expl, out / "importance.csv")
        deps = {}
        for name in dep_names:
            j = expl.feature_names.index(name)
            deps[name] = write_dependence_csv(expl, j, out / f"dependence_{slug(name)}.csv")
        for fp in forces:
            write_json(fp.to_dict(), out / f"force_{fp.row}.json")
        if settings["svg"]:
            bee = beeswarm_data(expl)
            svg.beeswarm([(f["name"], np.array([p["shap"] for p in f["points"]]),
                           np.array([p["value"] for p in f["points"]])) for f in bee["features"]],
                         out / "beeswarm.svg")
            for name, d in deps.items():
                xs, ys, cs = zip(*d.points)
                col = None
                if d.interaction_feature_index is not None:
                    c = np.array(cs, dtype=float)
                    col = (c - c.min()) / np.ptp(c) if np.ptp(c) > 0 else np.zeros_like(c)
                inter = "none" if d.interaction_feature_index is None else expl.feature_names[d.interaction_feature_index]
                svg.scatter(xs, ys, col, out / f"dependence_{slug(name)}.svg",
                            f"{name} (colour: {inter})", name, f"SHAP value for {name}")
            for fp in forces:
                svg.force_bars(fp, out / f"force_{fp.row}.svg")
    print(f"explained {expl.n} rows; base value {expl.base_value:.4f}; top feature {ranking[0][0]}")
    return 0


REPORT_ROSTER = (
    ("LightGBM-style GBDT (leaf-wise)", {"growth": "leaf_wise"}),
    ("Gradient Boosting (level-wise)", {"growth": "level_wise"}),
    ("Logistic Regression", None),
    ("Naive Bayes", None),
)


def cmd_report(settings: dict) -> int:
    rc = build_run_config(settings)
    _, table = _load_table(rc)
    features = _features_from(settings)
    prepared = prepare(table, rc.seed, rc.test_fraction, rc.smote, features)
    k = int(settings["cv_folds"])
    plan = stratified_kfold(prepared.train.y, k, rc.seed)
    rows, curves, results = [], {}, {}
    for name, extra in REPORT_ROSTER:
        if extra is not None:
            cfg = GbdtConfig.from_dict({**rc.gbdt.to_dict(), **extra})
        elif name.startswith("Logistic"):
            cfg = LogisticConfig(**settings.get("logistic", {}))
        else:
            cfg = GnbConfig()
        with stage(f"report:{slug(name)}"):
            cv = cross_val_score(prepared.train, lambda tr, c=cfg: fit_model(tr, c), plan, settings["metric"],
                                 rc.smote, int(settings["jobs"]))
            model = fit_model(prepared.fit_set, cfg)
        rep = evaluate_scores(prepared.test.y, model.predict_proba(prepared.test.x))
        results[name] = {"config": cfg.to_dict(), "cv": cv.to_dict(), "test": rep.to_dict()}
        rows.append((name, rep, cv))
        curves[name] = ([p[0] for p in rep.roc_curve], [p[1] for p in rep.roc_curve], rep.roc_auc)
    lines = [
        "| Model | Precision | Recall | Mean CV Score | Test Accuracy | F1 Score | ROC-AUC | Macro F1 |",
        "|---|---|---|---|---|---|---|---|",
    ]
    for name, rep, cv in rows:
        lines.append(f"| {name} | {rep.precision:.2f} | {rep.recall:.2f} | {cv.mean:.2f} | {rep.accuracy:.2f} "
                     f"| {rep.f1:.2f} | {rep.roc_auc:.2f} | {rep.macro_f1:.2f} |")
    note = (f"\nPrecision, recall and F1 refer to the Fatal class; Macro F1 averages both classes. "
            f"Mean CV score: {k}-fold {settings['metric']} on the training partition.\n")
    with locked(rc.out) as out:
        (out / "comparison.md").write_text("\n".join(lines) + "\n" + note, encoding="utf-8")
        write_json(results, out / "comparison.json")
        for name, rep, _ in rows:
            write_roc_csv(rep.roc_curve, out / f"roc_{slug(name)}.csv")
        if settings["svg"]:
            svg.roc_curves(curves, out / "roc_curves.svg")
    print("\n".join(lines))
    return 0


COMMANDS = {
    "synth": cmd_synth, "train": cmd_train, "evaluate": cmd_evaluate,
    "rfecv": cmd_rfecv, "explain": cmd_explain, "report": cmd_report,
}


def _bool_flag(parser, name, dest, help_on, help_off):
    g = parser.add_mutually_exclusive_group()
    g.add_argument(f"--{name}", dest=dest, action="store_const", const=True, help=help_on)
    g.add_argument(f"--no-{name}", dest=dest, action="store_const", const=False, help=help_off)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="crashshap",
        description="Crash-fatality classification with SMOTE, histogram GBDT and SHAP explanations.",
        epilog="Pipeline order: clean, derive, binarize, encode, split, scale (fit on the training split only; "
               "test values are clamped to [0, 1]), SMOTE (training split only), fit. "
               "Log level via CRASHSHAP_LOG_LEVEL.",
    )
    ap.add_argument("--version", action="version", version=f"crashshap {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, data=True):
        p.add_argument("--config", help="JSON file of settings; flags override it")
        p.add_argument("--schema", help="schema JSON (default: shipped crash schema)")
        if data:
            p.add_argument("--data", help="input CSV")
        p.add_argument("--out", help="output directory (default: out)")
        p.add_argument("--seed", type=int, help="master seed (required)")
        _bool_flag(p, "svg", "svg", "write SVG figures (default)", "skip SVG figures")

    def prep(p):
        p.add_argument("--test-fraction", type=float, help="held-out fraction (default 0.2)")
        _bool_flag(p, "smote", "smote", "oversample the training split (default)", "disable SMOTE")
        p.add_argument("--smote-k", type=int, help="SMOTE neighbours (default 5)")
        p.add_argument("--smote-ratio", type=float, help="minority target as fraction of majority (default 1.0)")
        p.add_argument("--jobs", type=int, help="parallel folds (results do not depend on it)")
        p.add_argument("--cv-folds", type=int, help="k for stratified k-fold (default 5)")

    def gbdt(p):
        p.add_argument("--n-trees", type=int)
        p.add_argument("--learning-rate", type=float)
        p.add_argument("--growth", choices=("leaf_wise", "level_wise"))
        p.add_argument("--max-leaves", type=int)
        p.add_argument("--max-depth", type=int)
        p.add_argument("--min-child-hessian", type=float)
        p.add_argument("--lambda-l2", type=float)
        p.add_argument("--max-bins", type=int)

    p = sub.add_parser("synth", help="write a seeded synthetic dataset and its ground truth")
    common(p, data=False)
    p.add_argument("--n", type=int, help="rows (default 1700)")
    p.add_argument("--imbalance", help="FATAL:NONFATAL ratio (default 1165:535)")
    p.add_argument("--signal", help="JSON object of feature -> log-odds weight")

    p = sub.add_parser("train", help="preprocess, fit and score a model")
    common(p)
    prep(p)
    gbdt(p)
    p.add_argument("--model", choices=("gbdt", "logistic", "gnb"))
    p.add_argument("--grid", help="JSON list of model configs to grid-search")
    p.add_argument("--metric", help="grid/CV metric (default accuracy)")
    p.add_argument("--features-from", help="best_features.json from rfecv")

    p = sub.add_parser("evaluate", help="score a saved model on a data split")
    common(p)
    p.add_argument("--model", dest="model_path", help="model.json from train")
    p.add_argument("--split", choices=("train", "test", "all"))

    p = sub.add_parser("rfecv", help="SHAP recursive feature elimination")
    common(p)
    prep(p)
    gbdt(p)
    p.add_argument("--step", type=int)
    p.add_argument("--min-features", type=int)

    p = sub.add_parser("explain", help="SHAP explanation bundle for a saved GBDT")
    common(p)
    p.add_argument("--model", dest="model_path", help="model.json from train")
    p.add_argument("--split", choices=("train", "test", "all"))
    p.add_argument("--dependence", help="comma-separated features for dependence exports (default: top 4)")
    p.add_argument("--force-rows", help="comma-separated row indices for force decompositions (default 0)")
    p.add_argument("--top-k", type=int, help="features listed per force decomposition (default 10)")

    p = sub.add_parser("report", help="precision, recall, CV score and AUC for each model")
    common(p)
    prep(p)
    gbdt(p)
    p.add_argument("--metric", help="CV metric (default accuracy)")
    p.add_argument("--features-from", help="best_features.json from rfecv")
    return ap


def main(argv=None) -> int:
    level = os.environ.get("CRASHSHAP_LOG_LEVEL", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING) if level.isalpha() else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        settings = _merge(args)
        return COMMANDS[args.command](settings)
    except CrashShapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (KeyError, TypeError, ValueError) as exc:
        print(f"error: [config] {exc}", file=sys.stderr)
        return ConfigError.exit_code


if __name__ == "__main__":
    sys.exit(main())

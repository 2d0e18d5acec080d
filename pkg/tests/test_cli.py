import json
import logging

import numpy as np
import pytest

from crashshap import cli
from crashshap.dataset import bundled_data_path

BUNDLED = str(bundled_data_path())
FAST = ["--n-trees", "20", "--max-leaves", "8"]


def run(*argv):
    return cli.main([str(a) for a in argv])


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    out = tmp_path_factory.mktemp("train")
    assert run("train", "--data", BUNDLED, "--seed", 0, "--out", out, *FAST) == 0
    return out


@pytest.fixture
def small_schema(tmp_path):
    """Ten numeric features, no calendar columns."""
    doc = {
        "name": "ten", "version": "1",
        "features": [{"name": f"a{j}", "kind": "numeric", "value_range": [0, 100]} for j in range(10)],
        "target": {"name": "Accident Fatality", "kind": "ordinal", "categories": ["Non Fatal", "Fatal"]},
        "severity": {"name": "Accident severity", "kind": "categorical",
                     "categories": ["Fatal", "Serious", "Slight", "No Injury"]},
    }
    p = tmp_path / "ten.json"
    p.write_text(json.dumps(doc))
    sig = tmp_path / "signal.json"
    sig.write_text(json.dumps({"a0": 4.0, "a1": 3.0, "a2": 2.5}))
    return p, sig


def test_synth_default_matches_bundled(tmp_path):
    assert run("synth", "--out", tmp_path) == 0
    assert (tmp_path / "data.csv").read_bytes() == bundled_data_path().read_bytes()
    gt = json.loads((tmp_path / "ground_truth.json").read_text())
    assert gt["ranking"][0] == "Casualty class" and gt["fatal_ratio"] == [1165.0, 535.0]


def test_synth_validation(tmp_path, capsys):
    assert run("synth", "--n", 0, "--out", tmp_path) == 2
    assert run("synth", "--imbalance", "x", "--out", tmp_path) == 2
    assert "error" in capsys.readouterr().err


def test_seed_required(tmp_path):
    assert run("train", "--data", BUNDLED, "--out", tmp_path) == 2


def test_missing_data_is_data_error(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("Light\nDaylight\n")
    assert run("train", "--data", bad, "--seed", 0, "--out", tmp_path / "o") == 3
    assert "[load]" in capsys.readouterr().err


def test_train_outputs(trained):
    metrics = json.loads((trained / "metrics.json").read_text())
    assert metrics["test"]["roc_auc"] >= 0.85
    assert [s["stage"] for s in metrics["stages"]] == ["load", "clean", "encode", "split", "smote"]
    doc = json.loads((trained / "model.json").read_text())
    assert doc["preprocessing"]["schema"] == "crash-records"
    header = (trained / "roc_test.csv").read_text().splitlines()[0]
    assert header == "fpr,tpr,threshold"


def test_no_smote_keeps_counts(tmp_path, trained):
    assert run("train", "--data", BUNDLED, "--seed", 0, "--out", tmp_path, "--no-smote", *FAST) == 0
    stages = {s["stage"]: s for s in json.loads((tmp_path / "metrics.json").read_text())["stages"]}
    split = stages["split"]
    assert stages["no-smote"]["rows"] == split["train"]
    with_smote = {s["stage"]: s for s in json.loads((trained / "metrics.json").read_text())["stages"]}["smote"]
    assert with_smote["fatal"] == with_smote["non_fatal"]


def test_train_twice_identical(tmp_path, trained):
    assert run("train", "--data", BUNDLED, "--seed", 0, "--out", tmp_path, *FAST) == 0
    for f in ("model.json", "metrics.json", "roc_test.csv"):
        assert (tmp_path / f).read_bytes() == (trained / f).read_bytes()


def test_config_precedence(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"seed": 1, "gbdt": {"n_trees": 5, "max_leaves": 4}, "smote": False}))
    assert run("train", "--config", cfg, "--data", BUNDLED, "--out", tmp_path / "a") == 0
    m = json.loads((tmp_path / "a" / "model.json").read_text())
    assert m["config"]["n_trees"] == 5 and len(m["trees"]) == 5 and m["config"]["seed"] == 1
    assert run("train", "--config", cfg, "--data", BUNDLED, "--out", tmp_path / "b", "--n-trees", 7) == 0
    m = json.loads((tmp_path / "b" / "model.json").read_text())
    assert m["config"]["n_trees"] == 7 and m["config"]["max_leaves"] == 4
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"seeed": 1}))
    assert run("train", "--config", bad, "--data", BUNDLED, "--out", tmp_path / "c") == 2


def test_lock_file(tmp_path):
    (tmp_path / ".crashshap.lock").write_text("")
    assert run("synth", "--out", tmp_path) == 2
    assert not (tmp_path / "data.csv").exists()


def test_evaluate(tmp_path, trained):
    assert run("evaluate", "--data", BUNDLED, "--model", trained / "model.json", "--out", tmp_path) == 0
    ev = json.loads((tmp_path / "evaluation.json").read_text())
    test = json.loads((trained / "metrics.json").read_text())["test"]
    assert ev["roc_auc"] == test["roc_auc"] and ev["n"] == 340


def test_explain_bundle(tmp_path, trained):
    code = run("explain", "--data", BUNDLED, "--model", trained / "model.json", "--out", tmp_path,
               "--force-rows", "0,5", "--dependence", "Time,Casualty class")
    assert code == 0
    assert sorted(p.name for p in tmp_path.glob("force_*.json")) == ["force_0.json", "force_5.json"]
    assert sorted(p.name for p in tmp_path.glob("dependence_*.csv")) == ["dependence_casualty_class.csv",
                                                                        "dependence_time.csv"]
    heat = json.loads((tmp_path / "heatmap.json").read_text())
    assert np.all(np.diff(heat["margins"]) >= 0)
    expl = json.loads((tmp_path / "explanation.json").read_text())
    for r in expl["rows"]:
        assert abs(expl["base_value"] + sum(r["shap"]) - r["margin"]) <= 1e-6
    for f in ("force_0.json", "force_5.json"):
        fp = json.loads((tmp_path / f).read_text())
        total = fp["base_value"] + sum(c["shap"] for c in fp["contributions"]) + fp["other_features"]["shap"]
        assert abs(total - fp["fx"]) <= 1e-6
    assert (tmp_path / "beeswarm.svg").read_text().startswith("<svg")
    bee = json.loads((tmp_path / "beeswarm.json").read_text())
    assert bee["features"][0]["name"] == "Casualty class"


def test_explain_no_svg_and_bad_feature(tmp_path, trained):
    assert run("explain", "--data", BUNDLED, "--model", trained / "model.json", "--out", tmp_path, "--no-svg") == 0
    assert not list(tmp_path.glob("*.svg"))
    assert run("explain", "--data", BUNDLED, "--model", trained / "model.json", "--out", tmp_path / "x",
               "--dependence", "Colour") == 2


@pytest.mark.parametrize("bad_value", [0.5, float("nan")])
def test_explain_corrupt_weights_abort(tmp_path, trained, bad_value):
    doc = json.loads((trained / "model.json").read_text())
    doc["trees"][3]["weight_fraction"] = bad_value
    bad = tmp_path / "bad_model.json"
    bad.write_text(json.dumps(doc))
    assert run("explain", "--data", BUNDLED, "--model", bad, "--out", tmp_path / "o") == 5


def test_explain_schema_mismatch(tmp_path, trained, small_schema):
    schema, sig = small_schema
    assert run("synth", "--schema", schema, "--n", 100, "--out", tmp_path / "e") == 2
    assert run("synth", "--schema", schema, "--signal", sig, "--n", 100, "--out", tmp_path / "d") == 0
    code = run("explain", "--schema", schema, "--data", tmp_path / "d" / "data.csv",
               "--model", trained / "model.json", "--out", tmp_path / "o")
    assert code == 2


def test_rfecv_and_features_from(tmp_path, small_schema, caplog):
    schema, sig = small_schema
    assert run("synth", "--schema", schema, "--signal", sig, "--n", 400, "--seed", 3, "--out", tmp_path / "d") == 0
    data = tmp_path / "d" / "data.csv"
    assert run("rfecv", "--schema", schema, "--data", data, "--seed", 3, "--out", tmp_path / "r",
               "--min-features", 2, *FAST) == 0
    rows = (tmp_path / "r" / "elim_report.csv").read_text().splitlines()
    assert len(rows) - 1 == 10 - 2 + 1
    assert (tmp_path / "r" / "rfecv.svg").exists()
    best = json.loads((tmp_path / "r" / "best_features.json").read_text())["best_features"]
    caplog.set_level(logging.INFO, logger="crashshap")
    assert run("train", "--schema", schema, "--data", data, "--seed", 3, "--out", tmp_path / "t",
               "--features-from", tmp_path / "r" / "best_features.json", *FAST) == 0
    assert json.loads((tmp_path / "t" / "metrics.json").read_text())["features"] == best
    assert "training used features: " + ", ".join(best) in caplog.text


def test_rfecv_single_row(tmp_path, small_schema):
    schema, sig = small_schema
    assert run("synth", "--schema", schema, "--signal", sig, "--n", 200, "--out", tmp_path / "d") == 0
    assert run("rfecv", "--schema", schema, "--data", tmp_path / "d" / "data.csv", "--seed", 0,
               "--out", tmp_path / "r", "--min-features", 10, *FAST) == 0
    assert len((tmp_path / "r" / "elim_report.csv").read_text().splitlines()) == 2


def test_report(tmp_path):
    assert run("report", "--data", BUNDLED, "--seed", 0, "--out", tmp_path, *FAST) == 0
    table = (tmp_path / "comparison.md").read_text().splitlines()
    assert table[0].startswith("| Model | Precision | Recall | Mean CV Score")
    assert len([l for l in table if l.startswith("| ") and "---" not in l]) == 5
    assert set(json.loads((tmp_path / "comparison.json").read_text())) == {
        "LightGBM-style GBDT (leaf-wise)", "Gradient Boosting (level-wise)", "Logistic Regression", "Naive Bayes"}


def test_training_error_exit_code(tmp_path, monkeypatch):
    from crashshap.errors import TrainingError

    def boom(*a, **k):
        raise TrainingError("forced")

    monkeypatch.setattr(cli, "fit_model", boom)
    assert run("train", "--data", BUNDLED, "--seed", 0, "--out", tmp_path, *FAST) == 4


def test_help_mentions_scaling(capsys):
    with pytest.raises(SystemExit):
        run("--help")
    assert "training split only" in capsys.readouterr().out

"""End-to-end command behavior: artifacts, exit codes, determinism."""

import json
import os
import subprocess
import sys

import pytest

from panelfit.cli import main


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture()
def raw(tmp_path):
    out = tmp_path / "raw"
    code = run("synth", "--out", out, "--seed", 11, "--counties", 6,
               "--years", "2000:2003", "--features", 10,
               "--law", "friedman", "--noise-sd", 0.4)
    assert code == 0
    return out


@pytest.fixture()
def clean(raw, tmp_path):
    out = tmp_path / "clean"
    code = run("ingest", "--out", out,
               "--inputs", raw / "counts.csv", raw / "monthly.csv",
               raw / "annual.csv", "--schema", raw / "schema.txt")
    assert code == 0
    return out


def test_synth_writes_three_tables_and_manifest(raw):
    for name in ("counts.csv", "monthly.csv", "annual.csv", "schema.txt",
                 "manifest.json"):
        assert (raw / name).exists(), name
    manifest = json.loads((raw / "manifest.json").read_text())
    assert manifest["command"] == "synth"
    assert manifest["seed"] == 11
    assert sorted(manifest["outputs"]) == manifest["outputs"]
    for entry in manifest["outputs"]:
        assert (raw / entry).exists()
    # nothing stray: every file in out is either listed or the manifest
    listed = set(manifest["outputs"]) | {"manifest.json"}
    actual = {p.name for p in raw.iterdir()}
    assert actual <= listed


def test_ingest_produces_clean_dataset(clean):
    assert (clean / "dataset.csv").exists()
    assert (clean / "dataset.schema.txt").exists()
    lineage = json.loads((clean / "lineage.json").read_text())
    ops = [step["op"] for step in lineage]
    for op in ("join_on_keys", "normalize_rate", "drop_sparse_columns",
               "prune_correlated"):
        assert op in ops
    schema = (clean / "dataset.schema.txt").read_text()
    assert "rate,response" in schema
    assert "count" not in schema.split()


def test_split_partitions_and_plans(clean, tmp_path):
    out = tmp_path / "parts"
    assert run("split", "--out", out, "--dataset", clean / "dataset.csv",
               "--seed", 5, "--iterations", 4) == 0
    for name in ("urban", "nonurban"):
        assert (out / f"{name}.csv").exists()
        plan = json.loads((out / f"{name}.plan.json").read_text())
        assert plan["iterations"] == 4
    # the two partitions use different derived seeds
    pa = json.loads((out / "urban.plan.json").read_text())
    pb = json.loads((out / "nonurban.plan.json").read_text())
    assert pa["seed"] != pb["seed"]


def evaluate_into(clean, tmp_path, name, threads=None, extra=()):
    out = tmp_path / name
    env_before = os.environ.get("PANEL_THREADS")
    if threads is not None:
        os.environ["PANEL_THREADS"] = str(threads)
    try:
        code = run("evaluate", "--out", out, "--dataset", clean / "dataset.csv",
                   "--seed", 21, "--iterations", 3, "--no-figures", *extra)
    finally:
        if threads is not None:
            if env_before is None:
                os.environ.pop("PANEL_THREADS", None)
            else:
                os.environ["PANEL_THREADS"] = env_before
    return code, out


FAST_ZOO = [
    {"name": "Null Model", "kind": "null"},
    {"name": "Linear Model", "kind": "ols"},
    {"name": "Small Forest", "kind": "forest",
     "hyperparameters": {"b": 6, "n_min": 5}},
]


def test_evaluate_writes_reports_models_selection(clean, tmp_path):
    models = tmp_path / "models.json"
    models.write_text(json.dumps(FAST_ZOO))
    code, out = evaluate_into(clean, tmp_path, "eval",
                              extra=("--models", models))
    assert code == 0
    for name in ("report.md", "report.csv", "report.json", "selection.json"):
        assert (out / name).exists()
    selection = json.loads((out / "selection.json").read_text())
    assert selection["selected"] in {"Linear Model", "Small Forest"}
    saved = {p.name for p in (out / "models").iterdir()}
    assert saved == {"null_model.json", "linear_model.json", "small_forest.json"}
    report = json.loads((out / "report.json").read_text())
    assert report["iterations"] == 3
    assert "timestamp" not in (out / "report.json").read_text().lower()


def test_evaluate_report_byte_identical_across_thread_caps(clean, tmp_path):
    models = tmp_path / "models.json"
    models.write_text(json.dumps(FAST_ZOO))
    _, a = evaluate_into(clean, tmp_path, "eval_t1", threads=1,
                         extra=("--models", models))
    _, b = evaluate_into(clean, tmp_path, "eval_t8", threads=8,
                         extra=("--models", models))
    assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()


def test_evaluate_with_plan_file(clean, tmp_path):
    parts = tmp_path / "parts"
    run("split", "--out", parts, "--dataset", clean / "dataset.csv",
        "--seed", 5, "--iterations", 3)
    models = tmp_path / "models.json"
    models.write_text(json.dumps(FAST_ZOO))
    out = tmp_path / "eval_urban"
    code = run("evaluate", "--out", out, "--dataset", parts / "urban.csv",
               "--plan", parts / "urban.plan.json", "--no-figures",
               "--models", models)
    assert code == 0
    report = json.loads((out / "report.json").read_text())
    assert report["iterations"] == 3


def test_interpret_emits_curves_and_diagnostics(clean, tmp_path):
    models = tmp_path / "models.json"
    models.write_text(json.dumps(FAST_ZOO))
    _, ev = evaluate_into(clean, tmp_path, "eval_i", extra=("--models", models))
    out = tmp_path / "interp"
    code = run("interpret", "--out", out,
               "--model", ev / "models" / "small_forest.json",
               "--dataset", clean / "dataset.csv",
               "--features", "top2", "--no-figures")
    assert code == 0
    assert (out / "importance.csv").exists()
    pdps = sorted(p.name for p in out.glob("pdp_*.csv"))
    assert len(pdps) == 2
    assert (out / "qq.csv").exists()
    assert (out / "actual_vs_fitted.csv").exists()
    # named feature selection and figure rendering
    first = json.loads((out / "manifest.json").read_text())
    assert first["command"] == "interpret"
    out2 = tmp_path / "interp2"
    feats = pdps[0][len("pdp_"):-len(".csv")]
    code = run("interpret", "--out", out2,
               "--model", ev / "models" / "small_forest.json",
               "--dataset", clean / "dataset.csv", "--features", feats)
    assert code == 0
    figs = {p.name for p in (out2 / "figures").iterdir()}
    assert {"importance.png", "qq.png", "actual_vs_fitted.png"} <= figs
    assert any(n.startswith("pdp_") for n in figs)


def test_interpret_topk_requires_forest(clean, tmp_path):
    models = tmp_path / "models.json"
    models.write_text(json.dumps(FAST_ZOO))
    _, ev = evaluate_into(clean, tmp_path, "eval_k", extra=("--models", models))
    code = run("interpret", "--out", tmp_path / "nope",
               "--model", ev / "models" / "linear_model.json",
               "--dataset", clean / "dataset.csv",
               "--features", "top3", "--no-figures")
    assert code == 2


def test_exit_code_2_on_bad_input(tmp_path):
    assert run("ingest", "--out", tmp_path / "x",
               "--inputs", tmp_path / "missing.csv",
               "--schema", tmp_path / "none.txt") == 2
    assert run("split", "--out", tmp_path / "y",
               "--dataset", tmp_path / "missing.csv") == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run("evaluate", "--out", tmp_path / "z",
               "--dataset", tmp_path / "missing.csv", "--models", bad) == 2


def test_exit_code_3_on_model_failure(tmp_path):
    # constant feature makes OLS rank-deficient in every iteration
    out = tmp_path / "raw3"
    run("synth", "--out", out, "--seed", 2, "--counties", 4,
        "--years", "2000:2001", "--features", 6, "--noise-sd", 0.2)
    clean = tmp_path / "clean3"
    run("ingest", "--out", clean,
        "--inputs", out / "counts.csv", out / "monthly.csv", out / "annual.csv",
        "--schema", out / "schema.txt")
    # doctor the dataset: append a constant column via schema + csv rewrite
    import numpy as np
    from panelfit.datastore import ColumnSpec, Dataset, load_dataset
    d = load_dataset(clean / "dataset.csv")
    cols = dict(d.columns)
    cols["flat"] = np.full(d.n_rows, 1.0)
    schema = list(d.schema) + [ColumnSpec("flat", "numeric-feature", "static")]
    Dataset(schema, cols).write_csv(clean / "doctored.csv")
    models = tmp_path / "m.json"
    models.write_text(json.dumps([
        {"name": "Null Model", "kind": "null"},
        {"name": "Linear Model", "kind": "ols"},
        {"name": "Backup A", "kind": "forest", "hyperparameters": {"b": 3}},
        {"name": "Backup B", "kind": "tree", "hyperparameters": {"n_min": 8}},
    ]))
    code = run("evaluate", "--out", tmp_path / "ev3",
               "--dataset", clean / "doctored.csv", "--models", models,
               "--iterations", 2, "--no-figures")
    assert code == 3
    # the report still exists and carries the error
    report = json.loads((tmp_path / "ev3" / "report.json").read_text())
    failed = [r for r in report["models"] if r.get("error")]
    assert any(r["name"] == "Linear Model" for r in failed)
    # trees shrug off the constant column, so a selection still lands
    assert (tmp_path / "ev3" / "selection.json").exists()


def test_console_entry_point_runs():
    proc = subprocess.run(
        [sys.executable, "-m", "panelfit.cli", "--help"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0
    assert "synth" in proc.stdout and "interpret" in proc.stdout

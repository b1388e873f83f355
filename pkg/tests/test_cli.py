import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from ridge_mml.cli import main
from ridge_mml.data import load_builtin, write_csv


def run(capsys, *argv):
    code = main(list(argv))
    return code, capsys.readouterr().out


@pytest.fixture(scope="module")
def iris_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "iris.csv"
    write_csv(path, load_builtin("iris"))
    return str(path)


def test_fit_json(capsys, iris_csv):
    code, out = run(capsys, "fit", "--data", iris_csv, "--response", "sepal_length")
    assert code == 0
    doc = json.loads(out)
    assert doc["schema"] == "ridge-mml/1"
    assert doc["lambda_hat"] == pytest.approx(0.168, abs=0.001)
    assert doc["seconds"] >= 0.001


def test_fit_grr_reports_range(capsys):
    code, out = run(capsys, "fit", "--data", "builtin:iris", "--model", "grr")
    doc = json.loads(out)
    assert code == 0 and len(doc["lambda_hat"]) == 3
    assert doc["lambda_min"] == pytest.approx(min(doc["lambda_hat"]))
    assert doc["lambda_max"] == pytest.approx(max(doc["lambda_hat"]))


def test_fit_with_coefficients_and_significance(capsys):
    code, out = run(capsys, "fit", "--data", "builtin:iris", "--model", "prr",
                    "--coefficients", "--significance")
    doc = json.loads(out)
    assert code == 0
    assert set(doc["coefficients"]["slopes"]) == {"sepal_width", "petal_length",
                                                  "petal_width"}
    assert len(doc["significance"]) == 3
    assert "delta_hat" in doc


def test_fit_baseline_estimator(capsys):
    code, out = run(capsys, "fit", "--data", "builtin:iris", "--estimator", "hkb")
    assert code == 0
    assert json.loads(out)["lambda_hat"] == pytest.approx(0.1613, abs=5e-4)


def test_baseline_requires_rr(capsys):
    code, out = run(capsys, "fit", "--data", "builtin:iris", "--estimator", "gcv",
                    "--model", "grr")
    assert code == 1 and json.loads(out)["error"]["kind"] == "ConfigError"


def test_missing_file(capsys, tmp_path):
    code, out = run(capsys, "fit", "--data", str(tmp_path / "absent.csv"))
    assert code == 1
    assert json.loads(out)["error"]["kind"] == "IoError"


def test_cache_round_trip(capsys, tmp_path):
    cache = str(tmp_path / "design.npz")
    _, first = run(capsys, "fit", "--data", "builtin:iris", "--cache", cache,
                   "--omit-timing")
    _, second = run(capsys, "fit", "--data", cache, "--omit-timing")
    assert first == second


def test_curve_logml(capsys):
    code, out = run(capsys, "curve", "--data", "builtin:iris")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and len(rows) == 500
    lam = np.array([float(r["lambda"]) for r in rows])
    vals = np.array([float(r["log_ml"]) for r in rows])
    assert np.all(np.diff(lam) > 0)
    peak = int(np.argmax(vals))
    assert np.all(np.diff(vals[:peak + 1]) >= 0)
    assert np.all(np.diff(vals[peak:]) <= 0)
    assert lam[peak] == pytest.approx(0.17, abs=0.01)


def test_curve_prr_lattice(capsys):
    code, out = run(capsys, "curve", "--data", "builtin:iris", "--model", "prr",
                    "--grid-max", "0.5", "--grid-step", "0.1", "--delta-step", "0.5")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and len(rows) == 5 * 13


def test_curve_gcv(capsys):
    code, out = run(capsys, "curve", "--data", "builtin:iris", "--criterion", "gcv",
                    "--format", "json")
    doc = json.loads(out)
    assert code == 0 and "gcv" in doc["rows"][0]


def test_compare(capsys):
    code, out = run(capsys, "compare", "--data", "builtin:iris", "--omit-timing")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0
    assert [r["estimator"] for r in rows] == ["rr", "prr", "grr", "hkb", "hkb-ext", "gcv",
                                              "bic", "aic", "cv10"]
    assert all(r["error"] == "" for r in rows)
    assert all(float(r["cv10"]) > 0 for r in rows)
    grr = rows[2]
    assert grr["lambda_hat"] == "" and float(grr["lambda_min"]) < float(grr["lambda_max"])
    assert "nan" not in out.lower()


def test_compare_empty_and_unknown(capsys):
    code, out = run(capsys, "compare", "--data", "builtin:iris", "--estimators", "")
    assert code == 0 and out == ""
    code, out = run(capsys, "compare", "--data", "builtin:iris", "--estimators", "lasso")
    assert code == 1 and json.loads(out)["error"]["kind"] == "ConfigError"


def test_deterministic_output(capsys):
    argv = ("compare", "--data", "builtin:iris", "--estimators", "rr,cv10",
            "--omit-timing", "--seed", "3", "--format", "json")
    _, first = run(capsys, *argv)
    _, second = run(capsys, *argv)
    assert first == second


def test_simulate(capsys, tmp_path):
    details = tmp_path / "details.jsonl"
    code, out = run(capsys, "simulate", "--templates", "iris", "--replications", "2",
                    "--models", "rr", "--details", str(details))
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and len(rows) == 2 * 3
    assert len(details.read_text().splitlines()) == 2 * 2 * 3
    code, out = run(capsys, "simulate", "--templates", "iris", "--replications", "2",
                    "--models", "rr", "--aggregate")
    assert len(list(csv.DictReader(io.StringIO(out)))) == 3


def test_simulate_unknown_template(capsys):
    code, out = run(capsys, "simulate", "--templates", "moon")
    assert code == 1 and json.loads(out)["error"]["kind"] == "ConfigError"


def test_predict(capsys, tmp_path):
    new = tmp_path / "new.csv"
    new.write_text("sepal_width,petal_length,petal_width\n3.0,4.0,1.2\n3.5,1.4,0.2\n")
    code, out = run(capsys, "predict", "--data", "builtin:iris", "--new", str(new))
    doc = json.loads(out)
    assert code == 0 and len(doc["rows"]) == 2
    assert 4.0 < doc["rows"][1]["mean"] < 6.0
    code, out = run(capsys, "predict", "--data", "builtin:iris", "--new", str(new),
                    "--classify")
    probs = [r["probability"] for r in json.loads(out)["rows"]]
    # sepal length is positive for every plausible flower
    assert all(p > 0.99 for p in probs)


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "ridge_mml", "fit", "--data",
                           "builtin:iris", "--omit-timing"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "seconds" not in json.loads(proc.stdout)

import json
import math
from pathlib import Path

import jsonschema
import numpy as np
import pytest

from pmsdr import fileio
from pmsdr.cli import main
from pmsdr.pipeline import evaluate_run, run_pipeline, PipelineConfig

GOLDEN = Path(__file__).parent / "data" / "golden_synth"
SMALL = {"M": 30, "r": 3, "L": 2, "samples_per_group": 30, "outlier_ratio": 0.3,
         "shuffle_ratio": 0.2, "snr_db": 40.0}


def write(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    cfg = write(d / "synth.json", SMALL)
    assert main(["synth", "--config", cfg, "--seed", "9", "--out", str(d / "data")]) == 0
    return d


@pytest.fixture(scope="module")
def run_dir(dataset):
    out = dataset / "run"
    assert main(["run", "--data", str(dataset / "data"), "--out", str(out), "--seed", "9",
                 "--dump-intermediates", "--verbose"]) == 0
    return out


def test_synth_matches_golden(tmp_path):
    out = tmp_path / "new" / "nested"
    assert main(["synth", "--config", str(GOLDEN / "config.json"), "--seed", "2024",
                 "--out", str(out)]) == 0
    np.testing.assert_allclose(fileio.read_matrix(out / "corrupted.csv"),
                               fileio.read_matrix(GOLDEN / "corrupted.csv"), rtol=0, atol=1e-12)
    new, old = json.loads((out / "bundle.json").read_text()), json.loads((GOLDEN / "bundle.json").read_text())
    for key in ("labels", "outlier_mask", "permutations", "shape", "config"):
        assert new[key] == old[key]
    assert (out / "manifest.json").exists()


@pytest.mark.parametrize("cfg", [{"r": 50}, {"bogus": 1}, "not json"])
def test_synth_rejects_bad_config(tmp_path, cfg):
    path = tmp_path / "bad.json"
    path.write_text(cfg if isinstance(cfg, str) else json.dumps(cfg))
    assert main(["synth", "--config", str(path), "--out", str(tmp_path / "o")]) == 1


def test_usage_errors(tmp_path):
    assert main([]) == 1
    assert main(["synth"]) == 1
    assert main(["synth", "--config", str(tmp_path / "missing.json"), "--out", str(tmp_path)]) == 1


def test_run_outputs(run_dir):
    report = json.loads((run_dir / "report.json").read_text())
    jsonschema.validate(report, fileio.REPORT_SCHEMA)
    assert "classifications" in report["details"]
    for f in ("G_hat.csv", "run.json", "manifest.json", "intermediates/R.csv"):
        assert (run_dir / f).exists()
    manifest = json.loads((run_dir / "manifest.json").read_text())
    assert manifest["command"] == "run" and manifest["seed"] == 9


def test_run_is_deterministic(dataset, run_dir, tmp_path):
    assert main(["run", "--data", str(dataset / "data"), "--out", str(tmp_path), "--seed", "9"]) == 0
    assert (tmp_path / "G_hat.csv").read_bytes() == (run_dir / "G_hat.csv").read_bytes()


def test_run_failure_exit_code(dataset, tmp_path):
    cfg = write(tmp_path / "c.json", {"L": 2, "r": 3, "n_out": 55})
    assert main(["run", "--data", str(dataset / "data"), "--config", cfg,
                 "--out", str(tmp_path / "o")]) == 2
    assert main(["run", "--data", str(tmp_path / "nothing"), "--out", str(tmp_path / "o")]) == 2


def test_eval_matches_library(dataset, run_dir):
    assert main(["eval", "--run", str(run_dir), "--data", str(dataset / "data")]) == 0
    got = json.loads((run_dir / "metrics.json").read_text())
    jsonschema.validate(got, fileio.REPORT_SCHEMA)
    bundle = fileio.load_bundle(dataset / "data")
    cfg = PipelineConfig.from_dict(json.loads((run_dir / "run.json").read_text())["config"])
    expected = evaluate_run(run_pipeline(bundle.corrupted, cfg), bundle)
    for m, v in expected.metrics().items():
        assert got[m] == pytest.approx(v, abs=1e-12)
    row = fileio.read_rows(run_dir / "metrics.csv")[0]
    for m, v in expected.metrics().items():
        assert row[m] == got[m]


def test_eval_without_ground_truth(dataset, run_dir, tmp_path):
    data = tmp_path / "data"
    data.mkdir()
    (data / "corrupted.csv").write_bytes((dataset / "data" / "corrupted.csv").read_bytes())
    assert main(["eval", "--run", str(run_dir), "--data", str(data), "--out", str(tmp_path / "e")]) == 0
    got = json.loads((tmp_path / "e" / "metrics.json").read_text())
    assert got["details"]["ground_truth"] is False and got["ce_gt"] is None


def test_sweep(tmp_path):
    grid = write(tmp_path / "g.json", {"grid": {**SMALL, "r": [2, 3]}, "seeds": [0, 1]})
    out = tmp_path / "s" / "sweep.csv"
    assert main(["sweep", "--grid", grid, "--out", str(out)]) == 0
    rows = fileio.read_rows(out)
    assert len(rows) == 2 and all(r["n_ok"] == 2 for r in rows)
    header = out.read_text().splitlines()[0].split(",")
    assert header[:len(SMALL)] == list(SMALL)
    assert {"re_recon_median", "ce_recon_std", "scerr_max", "errors"} <= set(header)
    assert (out.parent / "manifest.json").exists()
    assert main(["sweep", "--grid", grid, "--out", str(out), "--resume"]) == 1


def test_theory(tmp_path, monkeypatch):
    monkeypatch.setenv("PMSDR_THREADS", "2")
    grid = write(tmp_path / "t.json", {"points": [[30, 12, 3], [200, 80, 10]], "trials": 100})
    out = tmp_path / "theory.csv"
    assert main(["theory", "--grid", grid, "--out", str(out), "--seed", "1"]) == 0
    rows = fileio.read_rows(out)
    assert set(rows[0]) == {"M", "M2", "r", "quantity", "predicted", "empirical", "std_err"}
    assert all(math.isfinite(r["predicted"]) and math.isfinite(r["std_err"]) for r in rows)
    assert main(["theory", "--grid", write(tmp_path / "b.json", {"trials": 100}),
                 "--out", str(out)]) == 1


def test_matrix_csv_roundtrip(tmp_path, rng):
    A = rng.standard_normal((4, 3)) * 1e-7
    fileio.write_matrix(tmp_path / "a.csv", A)
    np.testing.assert_array_equal(fileio.read_matrix(tmp_path / "a.csv"), A)


def test_rows_roundtrip(tmp_path):
    rows = [{"a": 1, "b": 0.1 + 0.2, "c": "x", "d": None}]
    fileio.write_rows(tmp_path / "r.csv", rows, ["a", "b", "c", "d"])
    assert fileio.read_rows(tmp_path / "r.csv") == rows


def test_bundle_roundtrip(small_bundle, tmp_path):
    fileio.save_bundle(small_bundle, tmp_path)
    b = fileio.load_bundle(tmp_path)
    np.testing.assert_array_equal(b.corrupted, small_bundle.corrupted)
    np.testing.assert_array_equal(b.bases[1], small_bundle.bases[1])
    assert b.permutations.keys() == small_bundle.permutations.keys()
    assert b.config == small_bundle.config

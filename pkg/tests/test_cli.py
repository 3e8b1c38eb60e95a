import csv
import json
import math

import pytest

from smalldev import cli


def run(tmp_path, command, cfg, *extra, name="out"):
    path = tmp_path / f"{name}.json"
    path.write_text(json.dumps(cfg))
    out = tmp_path / name
    code = cli.main([command, "--config", str(path), "--out", str(out), *extra])
    return code, out


def read_csv(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# manifest_sha256=")
    return list(csv.DictReader(lines[1:]))


SMALL_INDEP = {
    "process": {"kind": "IndepSequence", "law": {"alpha": 2.0}, "sigma_rule": {"kind": "power_log"}, "truncation_depth": 20},
    "eps_grid": [0.1, 0.3],
    "n_samples": 5000,
}


def test_bound_writes_table(tmp_path):
    cfg = {"profile": {"family": "polynomial", "gamma": 1.0}, "theorem": "Thm2", "eps_grid": {"min": 1e-3, "max": 1e-1, "num": 3}}
    code, out = run(tmp_path, "bound", cfg)
    assert code == 0
    rows = read_csv(out / "bound.csv")
    assert list(rows[0]) == ["eps", "log_bound", "radius_factor", "realized_K", "layers_used"]
    assert len(rows) == 3 and all(float(r["log_bound"]) < 0 for r in rows)
    man = json.loads((out / "manifest.json").read_text())
    assert man["command"] == "bound" and "bound.csv" in man["files"]


def test_classify_prints_decision(tmp_path, capsys):
    cfg = {"profile": {"family": "critical_stable", "alpha": 1.0, "beta": 0.9, "sigma": 0.05}, "law": {"alpha": 1.0}}
    code, out = run(tmp_path, "classify", cfg)
    assert code == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["applicable"] == []
    assert json.loads((out / "classify.json").read_text())["decision"]["applicable"] == []


def test_profile_eval_from_csv(tmp_path):
    f = tmp_path / "prof.csv"
    f.write_text("eps,psi\n1,1\n0.5,2\n0.25,4\n0.125,8\n")
    cfg = {"profile": {"family": "tabulated", "csv": str(f)}, "eps_grid": [0.5, 0.25]}
    code, out = run(tmp_path, "profile-eval", cfg)
    assert code == 0
    rows = read_csv(out / "profile.csv")
    assert float(rows[1]["log_psi"]) == pytest.approx(math.log(4))


def test_simulate_reports_exact_column(tmp_path):
    code, out = run(tmp_path, "simulate", SMALL_INDEP)
    assert code == 0
    rows = read_csv(out / "simulate.csv")
    for r in rows:
        p = math.exp(float(r["exact_log_prob"]))
        assert float(r["ci_low"]) <= p <= float(r["ci_high"])


def test_compare_clean_and_corrupted(tmp_path):
    code, out = run(tmp_path, "compare", SMALL_INDEP)
    assert code == 0
    assert all(r["violations"] == "" for r in read_csv(out / "compare.csv"))
    code, out = run(tmp_path, "compare", {**SMALL_INDEP, "corrupt_lower": 5.0}, name="bad")
    assert code == 1
    assert any("lower" in r["violations"] for r in read_csv(out / "compare.csv"))


def test_compare_needs_finite_depth(tmp_path, capsys):
    cfg = json.loads(json.dumps(SMALL_INDEP))
    cfg["process"]["truncation_depth"] = None
    code, out = run(tmp_path, "compare", cfg)
    assert code == 2 and (out / "error.json").exists()


def test_hypothesis_error_exit(tmp_path, capsys):
    cfg = {"profile": {"family": "critical_stable", "alpha": 1.0, "beta": 0.9, "sigma": 0.05}, "law": {"alpha": 1.0},
           "theorem": "Thm4", "eps_grid": [1e-2]}
    code, out = run(tmp_path, "bound", cfg)
    assert code == 2
    doc = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert doc["error"] == "HypothesisError" and doc["theorem"] == "Thm4"


def test_invalid_config_exit(tmp_path, capsys):
    code, out = run(tmp_path, "simulate", {**SMALL_INDEP, "n_samples": 0})
    assert code == 2
    assert json.loads((out / "error.json").read_text())["error"] == "ConfigError"
    code, _ = run(tmp_path, "simulate", {**SMALL_INDEP, "bogus": 1}, name="b2")
    assert code == 2


def test_outputs_independent_of_workers(tmp_path):
    cfg = {**SMALL_INDEP, "n_samples": 150000}
    _, a = run(tmp_path, "simulate", cfg, "--workers", "1", name="w1")
    _, b = run(tmp_path, "simulate", cfg, "--workers", "3", name="w3")
    assert (a / "simulate.csv").read_bytes() == (b / "simulate.csv").read_bytes()


def test_seed_flag_changes_hash(tmp_path):
    _, a = run(tmp_path, "simulate", SMALL_INDEP, "--seed", "1", name="s1")
    _, b = run(tmp_path, "simulate", SMALL_INDEP, "--seed", "2", name="s2")
    ha = (a / "simulate.csv").read_text().splitlines()[0]
    hb = (b / "simulate.csv").read_text().splitlines()[0]
    assert ha != hb

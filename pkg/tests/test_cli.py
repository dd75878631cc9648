import json

import pytest

from coflow.cli import EXIT_CONFIG, EXIT_FAIL, EXIT_OK, main
from coflow.config import ConfigError, content_hash, parse_config


def _write(tmp_path, text, name="c.toml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def _strip_timing(path):
    d = json.loads(path.read_text())
    d.pop("timing")
    return d


def test_invalid_drift_kind_exits_2_and_names_key(tmp_path, capsys):
    cfg = _write(tmp_path, f"""
[experiment]
kind = "estimate"
out = "{tmp_path / 'r.json'}"
[drift]
kind = "quadratic"
""")
    assert main(["run", str(cfg)]) == EXIT_CONFIG
    err = capsys.readouterr().err
    assert "[drift] kind" in err and "quadratic" in err


def test_unknown_key_rejected(tmp_path, capsys):
    cfg = _write(tmp_path, """
[experiment]
kind = "bounds"
[bounds]
n_max = 5
colour = "red"
""")
    assert main(["run", str(cfg)]) == EXIT_CONFIG
    assert "colour" in capsys.readouterr().err


def test_lattice_rejected_before_simulation():
    with pytest.raises(ConfigError, match="lattice"):
        parse_config({"experiment": {"kind": "simulate"}, "lattice": {"dt": 0.0125, "dx": 0.1}})


def test_sections_must_match_kind():
    with pytest.raises(ConfigError, match="do not apply"):
        parse_config({"experiment": {"kind": "bounds"}, "web": {}})


def test_same_config_twice_gives_identical_reports(tmp_path):
    out = tmp_path / "r.json"
    cfg = _write(tmp_path, f"""
[experiment]
kind = "verify"
seed = 3
out = "{out}"
[lattice]
n_steps = 20
dt = 0.01
dx = 0.05
x_min = -1.0
x_max = 1.0
margin = 0.5
[drift]
kind = "sine"
params = [1.0, 1.0]
[verify]
replicas = 2
n_triples = 20
duality_samples = 100
evolution_triples = 20
shift = 0.05
""")
    reports = []
    for _ in range(2):
        assert main(["run", str(cfg)]) == EXIT_OK
        reports.append(_strip_timing(out))
    a, b = reports
    assert a == b
    assert a["input_hash"] == content_hash(a["config"])
    assert a["ok"] and all(a["checks"].values())


def test_web_subcommand_writes_exact_fractions(tmp_path):
    out = tmp_path / "web.json"
    assert main(["web", "--T", "2", "--Z", "6", "--out", str(out)]) == EXIT_OK
    rep = json.loads(out.read_text())
    assert rep["results"]["report"]["forward_step_law"] == {"-1": "1/2", "1": "1/2"}
    assert all(r["forward"] == r["dual"] for r in rep["results"]["relations"])


def test_bounds_subcommand_csv(tmp_path):
    out, csv = tmp_path / "b.json", tmp_path / "b.csv"
    assert main(["bounds", "--out", str(out), "--csv", str(csv)]) == EXIT_OK
    lines = csv.read_text().splitlines()
    assert lines[0].startswith("n,eps,delta") and len(lines) == 21


def test_failing_check_exits_1(tmp_path):
    # with a single row there is no thousandfold fall, so the schedule check fails
    out = tmp_path / "b.json"
    assert main(["bounds", "--n-max", "1", "--out", str(out)]) == EXIT_FAIL


def test_acceptance_subset_from_config(tmp_path, capsys):
    out = tmp_path / "acc.json"
    cfg = _write(tmp_path, f"""
[experiment]
kind = "acceptance"
seed = 1
out = "{out}"
[acceptance]
criteria = [9]
quick = true
""")
    assert main(["run", str(cfg)]) == EXIT_OK
    assert "criterion  9 bounds: PASS" in capsys.readouterr().out
    rep = json.loads(out.read_text())
    assert rep["checks"] == {"criterion_9": True}


def test_bad_thread_env(monkeypatch, tmp_path):
    monkeypatch.setenv("COFLOW_THREADS", "many")
    assert main(["bounds", "--out", str(tmp_path / "x.json")]) == EXIT_CONFIG

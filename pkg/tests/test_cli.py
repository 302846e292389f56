import json
import os

import pytest

from rousim.cli import run_cli


def _lines(capsys):
    return capsys.readouterr().out.strip().splitlines()


def test_analytic_half_normal(capsys):
    rc = run_cli(["analytic", "--alpha", "0", "--gamma", "1",
                  "--sigma", "1.4142135623730951", "--lower", "0"])
    assert rc == 0
    out = dict(line.split("=", 1) for line in _lines(capsys))
    assert float(out["q"]) == pytest.approx(0.7978845608028654, rel=1e-12)
    assert float(out["tau2"]) == pytest.approx(0.8825424006106064, rel=1e-9)
    assert float(out["stationary_mean"]) == pytest.approx(0.7978845608, rel=1e-9)
    assert float(out["boundary_density"]) == pytest.approx(0.7978845608, rel=1e-9)


def test_machine_readable_output_shape(capsys):
    rc = run_cli(["analytic", "--alpha", "1", "--gamma", "2", "--sigma", "1",
                  "--upper", "3"])
    assert rc == 0
    for line in _lines(capsys):
        key, _, value = line.partition("=")
        assert key and value and " " not in key


def test_help_exits_zero(capsys):
    assert run_cli(["--help"]) == 0
    assert run_cli(["simulate", "--help"]) == 0


def test_usage_errors_exit_two(capsys):
    assert run_cli(["analytic", "--bogus"]) == 2
    assert run_cli(["frobnicate"]) == 2
    assert run_cli([]) == 2


def test_analytic_rejects_two_barriers(capsys):
    rc = run_cli(["analytic", "--alpha", "0", "--gamma", "1", "--sigma", "1",
                  "--lower", "0", "--upper", "1"])
    assert rc == 2


def test_invalid_params_exit_two(capsys):
    rc = run_cli(["analytic", "--alpha", "0", "--gamma", "-1", "--sigma", "1",
                  "--lower", "0"])
    assert rc == 2


def test_simulate_writes_csv(tmp_path, capsys):
    out = tmp_path / "path.csv"
    rc = run_cli(["simulate", "--alpha", "1", "--gamma", "1", "--sigma", "1",
                  "--lower", "0", "--horizon", "0.05", "--dt", "0.001",
                  "--seed", "3", "--output", str(out)])
    assert rc == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "t,y,l,u"
    assert len(lines) == 52  # header + 51 grid points


def test_simulate_stdout_default(capsys):
    rc = run_cli(["simulate", "--alpha", "0", "--gamma", "1", "--sigma", "1",
                  "--lower", "0", "--horizon", "0.01"])
    assert rc == 0
    assert _lines(capsys)[0] == "t,y,l,u"


def test_seed_env_var_and_flag_precedence(tmp_path, capsys, monkeypatch):
    args = ["simulate", "--alpha", "0", "--gamma", "1", "--sigma", "1",
            "--lower", "0", "--horizon", "0.02"]
    monkeypatch.setenv("ROU_SEED", "101")
    rc = run_cli(args + ["--output", str(tmp_path / "env.csv")])
    assert rc == 0
    rc = run_cli(args + ["--seed", "101", "--output", str(tmp_path / "flag.csv")])
    assert rc == 0
    assert (tmp_path / "env.csv").read_text() == (tmp_path / "flag.csv").read_text()
    # flag wins over environment
    rc = run_cli(args + ["--seed", "202", "--output", str(tmp_path / "flag2.csv")])
    assert (tmp_path / "flag2.csv").read_text() != (tmp_path / "env.csv").read_text()
    monkeypatch.setenv("ROU_SEED", "not-an-int")
    assert run_cli(args) == 2


def test_seed_env_beats_config_file(tmp_path, capsys, monkeypatch):
    monkeypatch.chdir(tmp_path)
    cfg = tmp_path / "c.yaml"
    cfg.write_text("kind: clt\nsim:\n  horizon: 4.0\nn_paths: 4\n"
                   "master_seed: 1\n")
    monkeypatch.setenv("ROU_SEED", "77")
    rc = run_cli(["clt", "--config", str(cfg), "--output", "r"])
    assert rc in (0, 1)
    assert json.load(open("r.json"))["config"]["master_seed"] == 77


def test_config_kind_mismatch_exits_two(tmp_path, capsys):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("kind: clt\n")
    assert run_cli(["stationary", "--config", str(cfg)]) == 2


def test_experiment_pass_and_fail_exit_codes(tmp_path, capsys, monkeypatch):
    monkeypatch.chdir(tmp_path)
    base = ["clt", "--alpha", "1", "--gamma", "1", "--sigma", "1",
            "--lower", "0", "--horizon", "5", "--paths", "8", "--seed", "4"]
    cfg = tmp_path / "loose.yaml"
    cfg.write_text("kind: clt\nthresholds:\n  ks: 0.999\n")
    rc = run_cli(base + ["--config", str(cfg), "--output", "ok"])
    assert rc == 0
    out = dict(l.split("=", 1) for l in _lines(capsys))
    assert out["passed"] == "true"
    assert os.path.exists(tmp_path / "ok.json")
    assert os.path.exists(tmp_path / "ok.csv")

    cfg.write_text("kind: clt\nthresholds:\n  ks: 1.0e-12\n")
    rc = run_cli(base + ["--config", str(cfg), "--output", "bad"])
    assert rc == 1
    out = dict(l.split("=", 1) for l in _lines(capsys))
    assert out["passed"] == "false"


def test_experiment_flag_equals_config(tmp_path, capsys, monkeypatch):
    monkeypatch.chdir(tmp_path)
    cfg = tmp_path / "c.yaml"
    cfg.write_text("kind: clt\nsim:\n  alpha: 0.5\n  horizon: 4.0\n"
                   "n_paths: 6\nmaster_seed: 2\n")
    assert run_cli(["clt", "--config", str(cfg), "--output", "a"]) in (0, 1)
    assert run_cli(["clt", "--alpha", "0.5", "--horizon", "4.0",
                    "--paths", "6", "--seed", "2", "--output", "b"]) in (0, 1)
    ja = json.load(open("a.json"))
    jb = json.load(open("b.json"))
    assert ja["empirical"] == jb["empirical"]
    assert ja["analytic"] == jb["analytic"]


def test_unknown_config_key_exits_two(tmp_path, capsys):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("kind: clt\nnot_a_key: 3\n")
    assert run_cli(["clt", "--config", str(cfg)]) == 2


def test_fclt_cli_flags(tmp_path, capsys, monkeypatch):
    monkeypatch.chdir(tmp_path)
    rc = run_cli(["fclt", "--alpha", "1", "--gamma", "1", "--sigma", "1",
                  "--lower", "0", "--horizon", "4", "--paths", "6",
                  "--seed", "5", "--fclt-n", "4", "--fclt-grid", "0.5", "1.0",
                  "--output", "f"])
    assert rc in (0, 1)
    rep = json.load(open("f.json"))
    assert rep["config"]["fclt_n"] == 4
    assert any("ks_at_1" == c["metric"] for c in rep["checks"])

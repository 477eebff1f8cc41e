import csv
import io
import json
import subprocess
import sys

import pytest

from aquifer_control.cli import ENV_OUTPUT_DIR, load_config, main

T4_INI = """\
[model]
b = 0.16
d = 2.0
rho = 0.05
eta = 0.3
beta = 0.1
hbar = 0.5

[run]
regime = benchmark,full,concave
"""


@pytest.fixture
def cfg(tmp_path):
    path = tmp_path / "t4.ini"
    path.write_text(T4_INI)
    return str(path)


def run(*argv):
    buf = io.StringIO()
    code = main(list(argv), out=buf)
    return code, buf.getvalue()


def test_validate_ok(cfg):
    code, text = run("validate", cfg, "--regime", "benchmark,concave")
    assert code == 0 and "concave" in text
    code, text = run("validate", cfg, "--regime", "full")
    assert code == 1 and "FAIL" in text


def test_validate_domain_failure_names_clause(cfg):
    code, text = run("validate", cfg, "--set", "model.beta=3", "--regime", "concave")
    assert code == 1
    assert "0<β ≤ 2η" in text


def test_validate_json(cfg):
    code, text = run("validate", cfg, "--regime", "benchmark", "--format", "json")
    assert code == 0 and json.loads(text)["overall"] is True


@pytest.mark.parametrize("body", ["[model\nb=1", "[model]\nb = 0.1\nfoo = 2\n", "[extra]\nx=1\n",
                                  "[model]\nb = abc\n", "[model]\nb = 0.1\n"])
def test_bad_configs_exit_2(tmp_path, body, capsys):
    path = tmp_path / "bad.ini"
    path.write_text(body)
    assert main(["validate", str(path)], out=io.StringIO()) == 2
    assert capsys.readouterr().err.startswith("error:")


def test_missing_file_and_model(tmp_path):
    assert run("validate", str(tmp_path / "nope.ini"))[0] == 2
    assert run("equilibrium")[0] == 2


def test_usage_error_from_argparse():
    with pytest.raises(SystemExit) as info:
        main(["frobnicate"])
    assert info.value.code == 2


def test_equilibrium_csv(cfg):
    code, text = run("equilibrium", cfg)
    assert code == 0
    rows = {r["regime"]: r for r in csv.DictReader(io.StringIO(text))}
    assert float(rows["concave"]["gamma_e"]) == pytest.approx(0.397, abs=1e-3)
    assert float(rows["benchmark"]["U_e"]) == pytest.approx(2.163, abs=1e-3)


def test_equilibrium_infeasible_regime_exit_1(cfg):
    code, _ = run("equilibrium", cfg, "--set", "model.beta=0.7", "--regime", "concave")
    assert code == 1


def test_path_outputs(cfg, tmp_path):
    out = tmp_path / "out"
    code, text = run("path", cfg, "--out-dir", str(out), "--set", "path.t_max=10", "--set", "path.dt=0.01")
    assert code == 0 and "J=" in text
    with open(out / "path_benchmark.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 1001 and all(float(r["psi"]) == 1.0 for r in rows)
    assert (out / "path_concave.csv").exists()


def test_path_empty_horizon(cfg, tmp_path):
    code, _ = run("path", cfg, "--out-dir", str(tmp_path), "--set", "path.t_max=0")
    assert code == 0
    for regime in ("benchmark", "full", "concave"):
        lines = (tmp_path / f"path_{regime}.csv").read_text().splitlines()
        assert len(lines) == 1 and lines[0].startswith("t,h,psi")


def test_output_dir_precedence(cfg, tmp_path, monkeypatch):
    monkeypatch.setenv(ENV_OUTPUT_DIR, str(tmp_path / "env"))
    assert load_config(cfg).output_dir == str(tmp_path / "env")
    assert load_config(cfg, output_dir="flag").output_dir == "flag"
    monkeypatch.delenv(ENV_OUTPUT_DIR)
    assert load_config(cfg, ["run.output_dir=ini"]).output_dir == "ini"
    assert load_config(cfg).output_dir == "output"


def test_env_output_dir_used_by_path(cfg, tmp_path, monkeypatch):
    monkeypatch.setenv(ENV_OUTPUT_DIR, str(tmp_path))
    assert run("path", cfg, "--regime", "benchmark", "--set", "path.t_max=1")[0] == 0
    assert (tmp_path / "path_benchmark.csv").exists()


def test_sweep(cfg, tmp_path):
    code, text = run("sweep", cfg, "--out-dir", str(tmp_path), "--set", "sweep.axis=beta",
                     "--set", "sweep.values=0.1,0.2", "--set", "sweep.regimes=concave,zero")
    assert code == 0 and "wrote" in text
    with open(tmp_path / "table_sweep.csv") as fh:
        assert len(list(csv.DictReader(fh))) == 4
    assert run("sweep", cfg, "--out-dir", str(tmp_path))[0] == 2


def test_reproduce(tmp_path):
    code, text = run("reproduce", "T1", "t4", "--out-dir", str(tmp_path))
    assert code == 0 and text.count("PASS") == 2
    assert (tmp_path / "table_T1.csv").exists() and (tmp_path / "table_T4.csv").exists()
    assert run("reproduce", "T9", "--out-dir", str(tmp_path))[0] == 2


@pytest.mark.slow
def test_verify(cfg):
    code, text = run("verify", cfg, "--seed", "7", "--draws", "50")
    assert code == 0
    assert text.rstrip().endswith("verify: PASS")
    assert "[INFO]" in text


def test_console_script_entry_point(cfg):
    proc = subprocess.run([sys.executable, "-m", "aquifer_control.cli", "validate", cfg, "--regime", "benchmark"],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr

import csv
from pathlib import Path

import pytest

from tumblekin.cli import main
from tumblekin.config import ConfigError, parse_config

MINIMAL = """
[model]
lambda0_bar = 2.0
chi = 0.0

[mesh]
G = 1.0
I = 400
J = 400
"""


def test_minimal_config_defaults():
    cfg = parse_config(MINIMAL)
    assert cfg.command == "solve"
    assert (cfg.G, cfg.I, cfg.J) == (1.0, 400, 400)
    assert cfg.dt is None and cfg.tol == 1e-10 and cfg.cadence == 100


def test_j_defaults_to_i():
    assert parse_config("[mesh]\nI = 7\n").J == 7


@pytest.mark.parametrize("text,msg", [
    ("[model]\nchi = 1.2\n", r"chi must lie in \[0,1\)"),
    ("[mesh]\nI = 300\nJ = 400\n", "J mod I != 0"),
    ("[mesh]\nI = 4\nJJ = 4\n", r"unknown key 'JJ' in \[mesh\] \(line 3\)"),
    ("[meshes]\nI = 4\n", r"unknown section \[meshes\] \(line 1\)"),
    ("[mesh]\nI = four\n", r"I \(line 2\): cannot read"),
    ("I = 4\n", "parse error"),
    ("[mesh]\nI = 4\nI = 5\n", "parse error"),
    ("[solver]\ndt = -1\n", "dt must be positive"),
    ("[run]\ncommand = plot\n", "command must be one of"),
    ("[run]\ncommand = sweep\nG_list = 0.5, 0.1\n", "sorted"),
    ("[run]\ncommand = convergence\nI_list = 300\nI_ref = 1600\n", "does not divide"),
])
def test_config_errors(text, msg):
    with pytest.raises(ConfigError, match=msg):
        parse_config(text)


def _write(tmp_path, body):
    p = tmp_path / "run.ini"
    p.write_text(body)
    return p


def _read(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_solve_outputs(tmp_path):
    out = tmp_path / "out"
    cfg = _write(tmp_path, MINIMAL + f"\n[run]\ncommand = solve\noutput_dir = {out}\n")
    assert main([str(cfg), "--I", "12"]) == 0
    rows = _read(out / "q0.csv")
    n_nodes = 25 * 25
    assert len(rows) == n_nodes + 2 * 25
    assert sum(r["side"] == "L" for r in rows) == 25 and sum(r["side"] == "R" for r in rows) == 25
    mom = _read(out / "moments.csv")
    assert list(mom[0]) == ["y", "avgQ", "avgVQ", "flux_residual"] and len(mom) == 25
    # 17 significant digits round-trip doubles
    assert any(len(r["Q"].replace("-", "").replace(".", "").split("e")[0]) == 17 for r in rows)
    report = (out / "report.txt").read_text()
    assert "converged = true" in report and "equilibrium.steps_taken" in report


def test_outputs_are_reproducible(tmp_path):
    blobs = []
    out = tmp_path / "o"
    cfg = _write(tmp_path, MINIMAL + f"\n[run]\ncommand = coefficients\noutput_dir = {out}\n")
    for _ in range(2):
        assert main([str(cfg), "--I", "10"]) == 0
        blobs.append({p.name: p.read_bytes() for p in out.iterdir()})
    assert blobs[0] == blobs[1]
    row = _read(out / "coefficients.csv")[0]
    assert float(row["D02"]) > 0 and row["converged"] == "true"


def test_validation_failure_writes_nothing(tmp_path):
    out = tmp_path / "never"
    cfg = _write(tmp_path, f"[model]\nchi = 1.2\n[run]\noutput_dir = {out}\n")
    assert main([str(cfg)]) == 2
    assert not out.exists()
    cfg = _write(tmp_path, MINIMAL + f"\n[run]\noutput_dir = {out}\n")
    assert main([str(cfg), "--J", "300", "--I", "400"]) == 2
    assert not out.exists()


def test_missing_file_is_config_error(tmp_path):
    assert main([str(tmp_path / "absent.ini")]) == 2


def test_non_convergence_exit_code(tmp_path):
    out = tmp_path / "out"
    cfg = _write(tmp_path, MINIMAL + f"[solver]\ncadence = 10\nmax_steps = 20\n[run]\noutput_dir = {out}\n")
    assert main([str(cfg), "--I", "8"]) == 3
    assert "converged = false" in (out / "report.txt").read_text()


def test_numeric_failure_exit_code(tmp_path, monkeypatch):
    import tumblekin.cli as cli
    from tumblekin.equilibrium import NumericalFailure

    def boom(*a, **k):
        raise NumericalFailure("blown up")

    monkeypatch.setattr(cli, "solve_equilibrium", boom)
    out = tmp_path / "out"
    cfg = _write(tmp_path, MINIMAL + f"[run]\noutput_dir = {out}\n")
    assert main([str(cfg), "--I", "4"]) == 4
    assert not out.exists()


def test_sweep_and_convergence_commands(tmp_path):
    out = tmp_path / "s"
    cfg = _write(tmp_path, f"[model]\nlambda0_bar = 1.0\n[mesh]\nI = 10\n"
                           f"[run]\ncommand = sweep\nG_list = 0.1, 0.2, 1\noutput_dir = {out}\n")
    assert main([str(cfg)]) == 0
    rows = _read(out / "sweep.csv")
    assert [float(r["G"]) for r in rows] == [0.1, 0.2, 1.0]
    out = tmp_path / "c"
    cfg = _write(tmp_path, f"[model]\nlambda0_bar = 2.0\n"
                           f"[run]\ncommand = convergence\nI_list = 10, 20\nI_ref = 40\noutput_dir = {out}\n")
    assert main([str(cfg)]) == 0
    assert len(_read(out / "convergence.csv")) == 2


def test_verify_command(tmp_path, capsys):
    out = tmp_path / "v"
    cfg = _write(tmp_path, f"[model]\nlambda0_bar = 2.0\n[mesh]\nI = 12\n[run]\ncommand = verify\noutput_dir = {out}\n")
    assert main([str(cfg)]) == 0
    printed = capsys.readouterr().out
    assert "PASS reflection_symmetry" in printed and "FAIL" not in printed
    assert all(r["passed"] == "true" for r in _read(out / "verify.csv"))


def test_corrector_command(tmp_path):
    out = tmp_path / "h"
    cfg = _write(tmp_path, f"[model]\nchi = 0.5\n[mesh]\nI = 8\n[run]\ncommand = corrector\noutput_dir = {out}\n")
    assert main([str(cfg)]) == 0
    assert {"q0.csv", "h_drift.csv", "h_diffusion.csv", "report.txt", "moments.csv"} <= {p.name for p in out.iterdir()}

import json
import subprocess
import sys

import pytest

from dilab.cli import main


def _write(tmp_path, text):
    p = tmp_path / "c.toml"
    p.write_text(text, encoding="utf-8")
    return p


SMALL = """
experiment = "finite_T_identity"

[grid]
mode = "cartesian"
n = 1
L = 40.0
N = 256

[potential]
family = "inverse_power"
c = 1.0

[multiplier]
family = "japanese_bracket"

[data]
family = "gaussian"
sigma = 2.0
tilt = 0.3

[sweep]
T = [2.0]
N = [256, 512, 1024]
cfl = 0.5

[tolerances]
residual = 1e-3
order = 0.3
order_target = 2.0
"""


def test_list_experiments(capsys):
    assert main(["list-experiments"]) == 0
    out = capsys.readouterr().out
    for name in ("finite_T_identity", "morawetz_study", "bilinear_survey"):
        assert name in out


def test_validate(configs, capsys):
    assert main(["validate", str(configs / "rage.toml")]) == 0


def test_run_writes_reports(tmp_path, capsys):
    cfg = _write(tmp_path, SMALL)
    out = tmp_path / "out"
    assert main(["run", str(cfg), "--out", str(out)]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["passed"] and "residual" in rep["scalars"] and "order_fit" in rep["scalars"]
    assert rep["config"]["grid"]["N"] == 256
    assert (out / "identity_residual_vs_N.csv").exists() and (out / "timing.json").exists()
    lines = capsys.readouterr().out.splitlines()
    assert any(l.startswith("[PASS] finite-T identity residual") for l in lines)


def test_overrides_are_echoed(tmp_path):
    cfg = _write(tmp_path, SMALL)
    out = tmp_path / "o"
    assert main(["run", str(cfg), "--set", "sweep.N=[256]", "--set", "sweep.T=[1.0]", "--out", str(out)]) == 0
    assert json.loads((out / "report.json").read_text())["config"]["sweep"]["T"] == [1.0]


def test_unknown_key_exits_2(tmp_path, capsys):
    cfg = _write(tmp_path, SMALL.replace("[potential]", "[potental]"))
    assert main(["run", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert not (tmp_path / "o").exists()
    assert "config error" in capsys.readouterr().err


def test_tail_breach_exits_3_with_partial_report(tmp_path, capsys):
    cfg = _write(tmp_path, SMALL.replace("L = 40.0", "L = 10.0").replace("T = [2.0]", "T = [8.0]"))
    out = tmp_path / "o"
    assert main(["run", str(cfg), "--out", str(out)]) == 3
    assert "tail-mass" in capsys.readouterr().err
    rep = json.loads((out / "report.json").read_text())
    assert rep["error"].startswith("tail-mass breach")


def test_convergence_over_N(tmp_path, capsys):
    cfg = _write(tmp_path, SMALL)
    assert main(["convergence", str(cfg), "--axis", "N", "--out", str(tmp_path)]) == 0
    fit = json.loads((tmp_path / "convergence_N.json").read_text())
    assert abs(fit["order"] - 2.0) <= 0.3 and fit["r2"] > 0.99


def test_convergence_floor_flag_for_exact_unitarity(tmp_path):
    text = """
experiment = "conservation_study"
[grid]
mode = "cartesian"
n = 1
L = 30.0
N = 128
[potential]
family = "inverse_power"
c = 1.0
[data]
family = "gaussian"
sigma = 2.0
[sweep]
steps = 100
time_step = 0.01
N = [128, 256]
[tolerances]
unitarity_exact = 1e-12
unitarity_split = 1e-10
energy = 1e-10
"""
    cfg = _write(tmp_path, text)
    assert main(["convergence", str(cfg), "--axis", "N", "--out", str(tmp_path)]) == 0
    fit = json.loads((tmp_path / "convergence_N.json").read_text())
    assert "floor" in fit["flags"]


def test_convergence_needs_a_ladder(tmp_path):
    cfg = _write(tmp_path, SMALL)
    assert main(["convergence", str(cfg), "--axis", "eps"]) == 2


def test_console_script_entry_point():
    res = subprocess.run([sys.executable, "-m", "dilab.cli", "list-experiments"], capture_output=True, text=True)
    assert res.returncode == 0 and "rage_study" in res.stdout

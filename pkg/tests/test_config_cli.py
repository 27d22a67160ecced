import csv
import io
import subprocess
import sys

import pytest

from iotmon import config
from iotmon.cli import main, parse_axis_values
from iotmon.errors import ConfigError, ConfigParseError
from iotmon.experiments import COLUMNS

BASELINE_MEE = """\
# oblivious baseline, default frame and energy parameters
M = 10
policy = MEE
rho = 0
k_w = 5
k_t = 1
f_c = 60
tau_ms = 0.25
w_a_mw = 50
total_slots = 630000
"""


@pytest.fixture
def baseline_cfg(tmp_path):
    p = tmp_path / "mee.cfg"
    p.write_text(BASELINE_MEE)
    return p


def test_parse_text_and_defaults():
    vals = config.parse_text(BASELINE_MEE)
    assert vals["m"] == 10 and vals["policy"] == "MEE" and vals["tau_ms"] == 0.25
    cfg = config.to_sim_config(config.parse_overrides(["M=3", "policy=sbd", "b=12", "k_rp=15"]))
    assert cfg.policy == "SBD" and cfg.sbd.b == 12 and cfg.frame.f_sbd == 200
    assert cfg.energy.w_a == pytest.approx(0.05) and cfg.frame.tau == pytest.approx(0.25e-3)


def test_missing_m_names_key():
    with pytest.raises(ConfigParseError, match="'M'") as ei:
        config.to_sim_config({"policy": "MEE"})
    assert ei.value.key == "M"


def test_unknown_policy_lists_valid():
    with pytest.raises(ConfigParseError, match="MEE, MWA, SBD, GENIE") as ei:
        config.parse_text("M = 4\npolicy = RANDOM\n")
    assert ei.value.line == 2 and ei.value.key == "policy"


@pytest.mark.parametrize("text,line", [("M = 4\nfoo = 1\n", 2), ("M = x\n", 1), ("\n\nM 4\n", 3), ("k_rp = 2.5", 1)])
def test_parse_errors_carry_line(text, line):
    with pytest.raises(ConfigParseError, match=f"line {line}"):
        config.parse_text(text)


def test_invalid_values_are_config_errors():
    with pytest.raises(ConfigError):
        config.to_sim_config({"m": 0, "policy": "MEE"})
    with pytest.raises(ConfigError):
        config.to_sim_config({"m": 4, "policy": "SBD", "omega": 0.0})


def test_axis_values():
    assert parse_axis_values("b", "5:20:5") == [5.0, 10.0, 15.0, 20.0]
    assert parse_axis_values("k_rp", "15,25,35") == [15, 25, 35]
    assert parse_axis_values("rho", "0:0.3:0.1") == [0.0, 0.1, 0.2, 0.3]
    assert parse_axis_values("b", "") == []


def test_run_prints_and_appends(baseline_cfg, tmp_path, capsys):
    out = tmp_path / "runs.csv"
    assert main(["run", "--config", str(baseline_cfg), "--out", str(out)]) == 0
    assert "energy_mj: 131.25" in capsys.readouterr().out
    assert main(["run", "--config", str(baseline_cfg), "--set", "seed=1", "--out", str(out)]) == 0
    rows = list(csv.reader(out.open()))
    assert tuple(rows[0]) == COLUMNS
    assert len(rows) == 3
    assert rows[1][COLUMNS.index("energy_mj")] == "131.25"
    assert rows[2][COLUMNS.index("seed")] == "1"


def test_exit_codes(baseline_cfg, tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("policy = MEE\n")
    assert main(["run", "--config", str(bad)]) == 1
    assert "'M'" in capsys.readouterr().err
    assert main(["run", "--config", str(baseline_cfg), "--set", "policy=FOO"]) == 1
    assert main(["run", "--config", str(tmp_path / "missing.cfg")]) == 1
    assert main(["sweep", "--config", str(baseline_cfg), "--axis", "b="]) == 1
    # all grid points above budget: runtime/infeasibility error
    assert main(["optimize", "--set", "M=5", "--set", "policy=SBD", "--set", "total_slots=6000",
                 "--seeds", "1", "--b-grid", "1", "--krp-grid", "15", "--e-ref-mj", "0"]) == 2


def _sweep(args, capsys):
    assert main(args) == 0
    return capsys.readouterr().out


def test_sweep_csv_deterministic_and_order_independent(capsys):
    base = ["sweep", "--set", "M=8", "--set", "policy=SBD", "--set", "total_slots=12000", "--seeds", "2"]
    a = _sweep(base + ["--axis", "b=2,4", "--axis", "k_rp=15,25"], capsys)
    b = _sweep(base + ["--axis", "k_rp=25,15", "--axis", "b=4,2"], capsys)
    c = _sweep(base + ["--axis", "b=2,4", "--axis", "k_rp=15,25", "--parallel", "2"], capsys)
    assert a == b == c
    rows = list(csv.DictReader(io.StringIO(a)))
    assert len(rows) == 4 * 3
    assert [r["seed"] for r in rows[:3]] == ["0", "1", "mean"]
    assert all(r["policy"] == "SBD" and r["M"] == "8" for r in rows)


def test_sweep_invalid_point_becomes_error_row(capsys):
    out = _sweep(["sweep", "--set", "M=4", "--set", "policy=SBD", "--set", "total_slots=2000", "--seeds", "1",
                  "--axis", "k_rp=5,10"], capsys)
    rows = list(csv.DictReader(io.StringIO(out)))
    by_krp = {r["k_rp"]: r for r in rows if r["seed"] == "0"}
    assert by_krp["10"]["normalized_mse"] == "error"   # 2000 % 150 != 0
    assert by_krp["5"]["normalized_mse"] != "error"


def test_compare_single_point(capsys):
    out = _sweep(["compare", "--set", "M=5", "--set", "total_slots=6000", "--seeds", "1", "--policies", "MEE"],
                 capsys)
    rows = list(csv.reader(io.StringIO(out)))
    assert tuple(rows[0]) == COLUMNS
    data = [r for r in rows[1:] if r[COLUMNS.index("seed")] != "mean"]
    assert len(data) == 1


def test_console_script_entry_point(baseline_cfg):
    cmd = [sys.executable, "-m", "iotmon.cli", "run", "--config", str(baseline_cfg), "--set", "M=0"]
    proc = subprocess.run(cmd, capture_output=True, text=True)
    assert proc.returncode == 1
    assert "config error" in proc.stderr

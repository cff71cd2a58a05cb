import csv

import pytest

from pulsejet.calibrate import CALIBRATED
from pulsejet.cli import main, parse_grid
from pulsejet.config import RunConfig, load_config, parse_config
from pulsejet.errors import ConfigurationError


def test_defaults_build_calibrated_model():
    cfg = RunConfig().validate()
    p = cfg.params()
    assert p.geometry.V_tot == pytest.approx(CALIBRATED["V_tot"], rel=1e-12)
    assert p.hydro.c_suction == CALIBRATED["c_suction"]
    assert cfg.schedule().t_refill == 0.55


def test_text_round_trip():
    cfg = RunConfig()
    cfg.set("schedule", "t_glide", 1.1)
    cfg.set("schedule", "valves", False)
    again = parse_config(cfg.to_text())
    assert again.values == cfg.values
    assert again.schedule().t_refill == 1.10


def test_explicit_table():
    cfg = parse_config("[hydro]\ncda_table_cm2 = 0:50, 0.75:20\n")
    assert cfg.hydro().cda_table == ((0.0, 50e-4), (0.75, 20e-4))


@pytest.mark.parametrize("text", [
    "[nope]\nx = 1\n", "[geometry]\nbogus = 1\n", "[schedule]\nvalves = maybe\n",
    "[geometry]\nV_tot_mL = -5\n", "[targets]\ntransit = 25:0.5\n", "no section\n",
])
def test_bad_config(text):
    with pytest.raises(ConfigurationError):
        parse_config(text)


def test_parse_grid():
    assert parse_grid("0,25,50,75") == [0, 25, 50, 75]
    assert parse_grid("0:1:0.25") == [0, 0.25, 0.5, 0.75, 1.0]


def run(tmp_path, *argv):
    return main([*argv, "--out", str(tmp_path)])


def test_simulate_writes_outputs_and_echoes_config(tmp_path, capsys):
    cfg = tmp_path / "default.cfg"
    RunConfig().write(cfg)
    out = tmp_path / "o"
    assert run(out, "simulate", "--config", str(cfg), "--evr", "75", "--glide", "1.10",
               "--cycles", "1") == 0
    assert (out / "trajectory.csv").exists() and (out / "ledger.txt").exists()
    echoed = load_config(out / "config.cfg")
    assert echoed["schedule"]["t_glide"] == 1.10
    assert "COT=" in capsys.readouterr().out


def test_gpf_flag_sets_glide(tmp_path):
    assert run(tmp_path, "simulate", "--gpf", "50") == 0
    assert load_config(tmp_path / "config.cfg")["schedule"]["t_glide"] == pytest.approx(1.10)


def test_no_valves_flag_restores_default_refill(tmp_path):
    assert run(tmp_path, "simulate", "--no-valves") == 0
    assert load_config(tmp_path / "config.cfg").schedule().t_refill == 1.10


def test_sweep_four_rows(tmp_path):
    assert run(tmp_path, "sweep", "--var", "gpf", "--grid", "0,25,50,75") == 0
    with open(tmp_path / "sweep.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 4 and all(r["status"] == "ok" for r in rows)


def test_outputs_are_byte_identical(tmp_path):
    for d in ("a", "b"):
        assert run(tmp_path / d, "simulate", "--glide", "0.37", "--cycles", "2") == 0
    for name in ("trajectory.csv", "ledger.txt", "config.cfg"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_analyze_and_compare(tmp_path):
    assert run(tmp_path, "simulate", "--cycles", "2") == 0
    sim = str(tmp_path / "trajectory.csv")
    assert run(tmp_path / "an", "analyze", sim, "--phases", "--distance", "0.2") == 0
    text = (tmp_path / "an" / "metrics.txt").read_text()
    assert "time_to_distance=" in text and "phase_delta.0=Expulsion" in text
    assert run(tmp_path / "cmp", "compare", sim, sim) == 0
    assert "rmse_x=0.0" in (tmp_path / "cmp" / "comparison.txt").read_text()


def test_fall_table(tmp_path):
    assert run(tmp_path, "fall", "--evr", "0", "--evr", "75") == 0
    with open(tmp_path / "fall_table.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 2 and all(abs(float(r["rel_error"])) < 0.005 for r in rows)


@pytest.mark.parametrize("argv,code", [
    (["simulate", "--evr", "90"], 1),
    (["simulate", "--bogus"], 1),
    (["frobnicate"], 1),
    (["sweep", "--var", "gpf", "--grid", "x"], 1),
    (["analyze", "/nonexistent/trace.csv"], 2),
    (["simulate", "--config", "/nonexistent.cfg"], 2),
])
def test_exit_codes(tmp_path, argv, code, capsys):
    assert run(tmp_path, *argv) == code
    assert capsys.readouterr().err


def test_bad_config_file_exit_code(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("[geometry]\nV_tot_mL = abc\n")
    assert run(tmp_path, "simulate", "--config", str(bad)) == 1


def test_scenarios_frozen(tmp_path, capsys):
    code = run(tmp_path, "scenarios", "--paper", "--frozen")
    lines = (tmp_path / "scenarios.txt").read_text().splitlines()
    assert len(lines) == 10 and all(l.startswith("[PASS]") for l in lines)
    assert code == 0

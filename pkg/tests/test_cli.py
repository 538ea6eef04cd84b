import numpy as np
import pytest

import targetq as tq
from targetq.cli import main
from targetq.config import (
    load_schedule_file,
    parse_run_config,
    parse_schedule_spec,
    parse_step_spec,
    parse_sweep_config,
    resolve_schedule,
)
from targetq.errors import DomainError


RUN_CFG = """
[run]
env = gridworld
gamma = 0.7
seed = 3
budget = 2000
schedule = fixed 200
step_size = theory
bias = true
eval_horizon = 7
"""

SWEEP_CFG = """
[sweep]
env = gridworld
gamma = 0.7
seeds = 0 1 2
budget = 2500
bias = true
eval_horizon = 7

[arm fixed-200]
schedule = fixed 200
step_size = theory

[arm geo-100]
schedule = geometric 100
step_size = theory
"""


def test_oracle_prints_reference_start_values(capsys):
    assert main(["oracle", "--env", "gridworld", "--gamma", "0.7"]) == 0
    out = capsys.readouterr().out
    assert "Q*(start, right) = 0.0735" in out
    assert "Q*(start, down) = 0.0735" in out
    assert "52 active pairs" in out


def test_oracle_missing_gamma_fails(capsys):
    assert main(["oracle", "--env", "gridworld"]) == 1
    assert "error" in capsys.readouterr().err


def test_unknown_flag_exits_2(capsys):
    assert main(["oracle", "--bogus"]) == 2
    assert main(["frobnicate"]) == 2


def test_design_prints_and_emits_schedule(tmp_path, capsys):
    out_path = tmp_path / "sched.txt"
    rc = main([
        "design", "--gamma", "0.7", "--eps", "0.1", "--schedule", "growing",
        "--out", str(out_path),
    ])
    assert rc == 0
    out = capsys.readouterr().out
    assert "cycles: 26" in out
    assert "periods:" in out
    assert "predicted cost:" in out
    bound = float(out.split("predicted error bound:")[1].split()[0])
    assert bound <= 0.1
    sched = load_schedule_file(out_path)
    assert sched.label == "designed-growing"
    assert sched.n_cycles == 26


def test_design_degenerate_note(capsys):
    with pytest.warns(Warning):
        rc = main(["design", "--gamma", "0.7", "--eps", "50", "--e0", "3"])
    assert rc == 0
    assert "degenerate design" in capsys.readouterr().out


def test_run_subcommand_writes_csv(tmp_path, capsys):
    cfg = tmp_path / "run.ini"
    cfg.write_text(RUN_CFG)
    out_csv = tmp_path / "run.csv"
    assert main(["run", "--config", str(cfg), "--out", str(out_csv)]) == 0
    rows = tq.read_csv_rows(out_csv)
    assert len(rows) == 11  # initial record + 10 cycles of 200 within 2000
    assert rows[0]["bias_median"] == "3"


def test_run_seed_override_changes_trace(tmp_path, capsys):
    cfg = tmp_path / "run.ini"
    cfg.write_text(RUN_CFG)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["run", "--config", str(cfg), "--out", str(a)]) == 0
    assert main(["run", "--config", str(cfg), "--seed", "4", "--out", str(b)]) == 0
    assert a.read_bytes() != b.read_bytes()


def test_run_malformed_config_fails(tmp_path, capsys):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[run]\nenv = gridworld\n")  # no gamma, budget, schedule
    assert main(["run", "--config", str(cfg)]) == 1
    assert "error" in capsys.readouterr().err
    missing = tmp_path / "nope.ini"
    assert main(["run", "--config", str(missing)]) == 1


def test_sweep_csv_byte_identical(tmp_path, capsys):
    cfg = tmp_path / "sweep.ini"
    cfg.write_text(SWEEP_CFG)
    p1, p2 = tmp_path / "s1.csv", tmp_path / "s2.csv"
    assert main(["sweep", "--config", str(cfg), "--out", str(p1)]) == 0
    assert main(["sweep", "--config", str(cfg), "--out", str(p2)]) == 0
    assert p1.read_bytes() == p2.read_bytes()
    rows = tq.read_csv_rows(p1)
    assert {r["arm"] for r in rows} == {"fixed-200", "geo-100"}


def test_gridworld_emit_and_reload(tmp_path, capsys):
    out = tmp_path / "grid.ini"
    assert main(["gridworld", "--gamma", "0.9", "--out", str(out)]) == 0
    spec = tq.load_grid_spec(out.read_text())
    assert spec.gamma == 0.9
    mdp = tq.build_grid_mdp(spec)
    assert mdp.num_active_pairs == 52
    assert main(["gridworld"]) == 0
    assert "[grid]" in capsys.readouterr().out


def test_version_flag():
    assert main(["--version"]) == 0


# ---------------------------------------------------------------------------
# Config parsing units


def test_parse_schedule_specs(grid07):
    assert parse_schedule_spec("fixed 1000") == tq.FixedPeriod(1000)
    geo = resolve_schedule(parse_schedule_spec("geometric 500"), grid07)
    assert geo == tq.GeometricPeriod(500, 0.7)
    geo2 = resolve_schedule(parse_schedule_spec("geometric 500 0.9"), grid07)
    assert geo2.gamma == 0.9
    custom = parse_schedule_spec("custom 3 5 8")
    assert custom.ks == (3, 5, 8)
    adaptive = parse_schedule_spec("adaptive 100 1000")
    assert (adaptive.k_min, adaptive.k_max) == (100, 1000)
    for bad in ("", "fixed", "fixed x", "mystery 3"):
        with pytest.raises(DomainError):
            parse_schedule_spec(bad)


def test_parse_step_specs(grid07):
    theory = parse_step_spec("theory", grid07)
    assert theory.alpha(0) == 1.0 and theory.xi == pytest.approx(1 / 52)
    explicit = parse_step_spec("theory 0.25", grid07)
    assert explicit.xi == 0.25
    const = parse_step_spec("constant 0.1", grid07)
    assert const.alpha(9) == 0.1
    with pytest.raises(DomainError):
        parse_step_spec("constant", grid07)


def test_parse_run_and_sweep_configs(tmp_path):
    run_path = tmp_path / "run.ini"
    run_path.write_text(RUN_CFG)
    cfg = parse_run_config(run_path, seed_override=9)
    assert cfg.seed == 9
    assert cfg.sample_budget == 2000
    assert isinstance(cfg.schedule, tq.FixedPeriod)

    sweep_path = tmp_path / "sweep.ini"
    sweep_path.write_text(SWEEP_CFG)
    sweep = parse_sweep_config(sweep_path)
    assert [arm.label for arm in sweep.arms] == ["fixed-200", "geo-100"]
    assert sweep.seeds == (0, 1, 2)
    assert sweep.arms[1].schedule.gamma == 0.7


def test_parse_sweep_range_seeds(tmp_path):
    text = SWEEP_CFG.replace("seeds = 0 1 2", "seeds = range 5")
    path = tmp_path / "sweep.ini"
    path.write_text(text)
    assert parse_sweep_config(path).seeds == (0, 1, 2, 3, 4)


def test_schedule_file_roundtrip(tmp_path, grid07, oracle07):
    c = tq.compute_constants(grid07, 1 / 52, oracle07)
    design = tq.design_growing_period(0.5, 3.0, c)
    from targetq.config import dump_schedule_file

    path = tmp_path / "sched.ini"
    path.write_text(dump_schedule_file(design.periods, {"family": design.family}))
    sched = load_schedule_file(path)
    assert sched.ks == design.periods
    parsed = parse_schedule_spec(f"file {path}")
    assert parsed.ks == design.periods

import csv
import json
import subprocess
import sys
from pathlib import Path

import pytest
import yaml

from sweeping.cli import build_run, load_config, main
from sweeping.errors import ConfigError

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def write_config(tmp_path, data, name="run.yaml"):
    data = dict(data)
    data.setdefault("output", {})["directory"] = str(tmp_path / "out")
    path = tmp_path / name
    path.write_text(yaml.safe_dump(data))
    return path


def rows(path):
    with open(path) as fh:
        return list(csv.reader(fh))


@pytest.fixture(autouse=True)
def no_env_override(monkeypatch):
    monkeypatch.delenv("SWEEP_OUTPUT_DIR", raising=False)


PLAY = {"scenario": {"name": "play_1d", "params": {"speed": 1.0, "half_width": 1.0, "T": 2.0}},
        "solver": {"step": 0.001}}


def test_solve_play(tmp_path):
    assert main(["solve", str(write_config(tmp_path, PLAY))]) == 0
    out = tmp_path / "out"
    traj = rows(out / "trajectory.csv")
    assert traj[0] == ["t", "x_1"]
    assert float(traj[-1][0]) == 2.0 and abs(float(traj[-1][1]) - 1.0) <= 2e-3
    assert rows(out / "bounds.csv")[0] == ["t", "eps", "r", "q"]
    report = json.loads((out / "report.json").read_text())
    assert report["converged"] is True and report["oracle_sup_error"] <= 2e-3
    assert report["report"]["bound_check"]["passed"] is True


def test_solve_is_deterministic(tmp_path):
    cfg = {"scenario": {"name": "unconstrained_volterra"}, "solver": {"step": 0.01}}
    texts = []
    for i in range(2):
        d = tmp_path / f"run{i}"
        d.mkdir()
        assert main(["solve", str(write_config(d, cfg))]) == 0
        texts.append([(d / "out" / f).read_bytes() for f in ("trajectory.csv", "bounds.csv", "report.json")])
    assert texts[0] == texts[1]


def test_gain_too_large(tmp_path, capsys):
    cfg = {"scenario": {"name": "tanh_state", "params": {"gain": 1.2}}, "solver": {"step": 0.01}}
    assert main(["solve", str(write_config(tmp_path, cfg))]) == 1
    assert "state gain must be < 1" in capsys.readouterr().err


def test_forced_nonconvergence(tmp_path):
    cfg = {"scenario": {"name": "unconstrained_volterra"}, "solver": {"step": 0.01, "picard_max_iters": 1}}
    assert main(["solve", str(write_config(tmp_path, cfg))]) == 2
    out = tmp_path / "out"
    report = json.loads((out / "report.json").read_text())
    assert report["converged"] is False and report["report"]["converged"] is False
    assert not (out / "trajectory.csv").exists()


def test_outer_nonconvergence(tmp_path):
    cfg = {"scenario": {"name": "tanh_state"}, "solver": {"step": 0.01, "state_outer_max_iters": 1}}
    assert main(["solve", str(write_config(tmp_path, cfg))]) == 2
    assert json.loads((tmp_path / "out" / "report.json").read_text())["converged"] is False


def test_study_play_and_threshold(tmp_path):
    cfg = dict(PLAY, study={"steps": [0.1, 0.05, 0.025]})
    assert main(["study", str(write_config(tmp_path, cfg))]) == 0
    table = rows(tmp_path / "out" / "study.csv")
    assert table[0] == ["h", "sup_error", "ratio"] and len(table) == 4 and table[-1][2] == ""
    cosh = {"scenario": {"name": "unconstrained_volterra"}, "solver": {"step": 0.1},
            "study": {"steps": [0.1, 0.05, 0.025], "threshold": 3.9}}
    assert main(["study", str(write_config(tmp_path, cosh, "cosh.yaml"))]) == 2


def test_study_stationary_reports_inf(tmp_path):
    cfg = {"scenario": {"name": "stationary"}, "solver": {"step": 0.1},
           "study": {"steps": [0.1, 0.05, 0.025]}}
    assert main(["study", str(write_config(tmp_path, cfg))]) == 0
    table = rows(tmp_path / "out" / "study.csv")
    assert [r[1] for r in table[1:]] == ["0", "0", "0"]
    assert [r[2] for r in table[1:]] == ["inf", "inf", ""]


def test_study_needs_three_steps(tmp_path):
    cfg = dict(PLAY, study={"steps": [0.1, 0.05]})
    assert main(["study", str(write_config(tmp_path, cfg))]) == 1


@pytest.mark.parametrize("name", ["play_1d", "stationary", "unconstrained_volterra", "nonconvex_ring",
                                  "tanh_state"])
def test_validate_builtins(tmp_path, name):
    cfg = {"scenario": {"name": name}, "solver": {"step": 0.01}}
    assert main(["validate", str(write_config(tmp_path, cfg))]) == 0
    report = json.loads((tmp_path / "out" / "validate.json").read_text())
    assert report["passed"] is True
    assert report["checks"]["prox_regularity"]["hypomonotonicity"]["passed"] is True


def test_validate_misdeclared_inline(tmp_path):
    data = yaml.safe_load((CONFIGS / "inline_misdeclared.yaml").read_text())
    assert main(["validate", str(write_config(tmp_path, data))]) == 2
    report = json.loads((tmp_path / "out" / "validate.json").read_text())
    assert report["checks"]["history_constant"]["passed"] is False


def test_inline_problem_solves(tmp_path):
    cfg = {"problem": {"x0": [0.0], "horizon": 2.0, "set": {"type": "box", "lower": [-1.0], "upper": [1.0]},
                       "forcing": {"constant": [1.0]}},
           "solver": {"step": 0.01}}
    assert main(["solve", str(write_config(tmp_path, cfg))]) == 0
    last = rows(tmp_path / "out" / "trajectory.csv")[-1]
    assert abs(float(last[1]) - 1.0) <= 0.02


def test_unknown_key_and_bad_yaml(tmp_path, capsys):
    cfg = dict(PLAY, solver={"step": 0.01, "stepp": 1})
    assert main(["solve", str(write_config(tmp_path, cfg))]) == 1
    assert "stepp" in capsys.readouterr().err
    bad = tmp_path / "bad.yaml"
    bad.write_text("scenario:\n  name: [play_1d\n")
    assert main(["solve", str(bad)]) == 1
    assert "line" in capsys.readouterr().err
    with pytest.raises(ConfigError):
        build_run(load_config(write_config(tmp_path, {"scenario": {"name": "nope"}}, "x.yaml")))


def test_step_must_divide_horizon(tmp_path):
    cfg = dict(PLAY, solver={"step": 0.3})
    assert main(["solve", str(write_config(tmp_path, cfg))]) == 1


def test_env_overrides_output(tmp_path, monkeypatch):
    target = tmp_path / "elsewhere"
    monkeypatch.setenv("SWEEP_OUTPUT_DIR", str(target))
    assert main(["solve", str(write_config(tmp_path, PLAY))]) == 0
    assert (target / "trajectory.csv").exists() and not (tmp_path / "out").exists()


def test_viscoelastic_solve(tmp_path):
    cfg = {"scenario": {"name": "viscoelastic_scalar"}, "solver": {"step": 0.001}}
    assert main(["solve", str(write_config(tmp_path, cfg))]) == 0
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    assert report["inversion_residual"] <= 1e-8 and report["oracle_sup_error"] <= 2e-3
    assert rows(tmp_path / "out" / "displacement.csv")[0] == ["t", "x_1"]


def test_shipped_configs_parse():
    for path in sorted(CONFIGS.glob("*.yaml")):
        run = build_run(load_config(path))
        assert run.problem.horizon > 0


def test_scenario_list_and_module_entry(capsys):
    assert main(["scenario", "list"]) == 0
    assert "play_1d" in capsys.readouterr().out
    done = subprocess.run([sys.executable, "-m", "sweeping", "scenario", "list"], capture_output=True, text=True)
    assert done.returncode == 0 and "viscoelastic" in done.stdout

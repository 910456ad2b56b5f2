"""Command-line front end.

    sweeping solve <config.yaml>
    sweeping study <config.yaml>
    sweeping validate <config.yaml>
    sweeping scenario list

Exit codes: 0 success, 1 configuration error, 2 non-convergence or a failed
check.  ``SWEEP_OUTPUT_DIR`` overrides the configured output directory.
The configuration schema is documented in ``docs/config.md``.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Optional

import numpy as np
import yaml

from .errors import ConfigError, InvalidGain, NonConvergence, SweepingError
from .geometry import MovingSetDescriptor, StateDependentSetDescriptor, set_from_dict, static
from .history import PerturbationSpec, Trajectory, VolterraKernel
from .scenarios import (
    REGISTRY,
    Scenario,
    audit_problem,
    get_scenario,
    inversion_residual,
    list_scenarios,
    recover_displacement,
)
from .solver import ProblemSpec, SolverConfig, convergence_study, solve

OUTPUT_ENV = "SWEEP_OUTPUT_DIR"
EXIT_OK, EXIT_CONFIG, EXIT_FAILED = 0, 1, 2

log = logging.getLogger("sweeping")

_TOP_KEYS = {"scenario", "problem", "solver", "output", "study", "validate"}
_SCENARIO_KEYS = {"name", "params"}
_PROBLEM_KEYS = {"x0", "horizon", "set", "velocity", "forcing", "kernel", "state"}
_FORCING_KEYS = {"matrix", "constant", "alpha", "beta", "lipschitz"}
_KERNEL_KEYS = {"weight", "form", "lipschitz", "growth"}
_STATE_KEYS = {"gain", "shift"}
_OUTPUT_KEYS = {"directory", "emit"}
_EMIT_KEYS = {"trajectory", "bounds", "report", "study"}
_STUDY_KEYS = {"steps", "threshold", "reference", "reference_factor"}
_VALIDATE_KEYS = {"seed", "samples"}
_SOLVER_KEYS = {f.name for f in fields(SolverConfig)}
_SHIFTS = {"tanh": np.tanh, "identity": lambda x: np.asarray(x, float), "sin": np.sin}


# -- configuration -------------------------------------------------------------

@dataclass
class RunConfig:
    problem: ProblemSpec
    solver: SolverConfig
    output_dir: Path
    emit: dict
    name: str
    oracle: Any = None
    scenario: Optional[Scenario] = None
    study: dict = field(default_factory=dict)
    validate: dict = field(default_factory=dict)


def _section(data, name: str, allowed: set) -> dict:
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"{name}: expected a mapping, got {type(data).__name__}")
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ConfigError(f"{name}: unknown key(s) {', '.join(unknown)}")
    return data


def _number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}: expected a number, got {value!r}")
    return float(value)


def _vector(value, where: str) -> np.ndarray:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        value = [value]
    if not isinstance(value, list) or not value:
        raise ConfigError(f"{where}: expected a list of numbers")
    return np.array([_number(v, f"{where}[{i}]") for i, v in enumerate(value)])


def load_config(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ConfigError(f"{path}: parse error{where}: {getattr(exc, 'problem', exc)}") from exc
    if data is None:
        data = {}
    return _section(data, "config", _TOP_KEYS)


def _solver_config(data: dict) -> SolverConfig:
    data = dict(_section(data, "solver", _SOLVER_KEYS))
    if "step" not in data and "nodes" not in data:
        data["step"] = 1e-3
    try:
        return SolverConfig(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"solver: {exc}") from exc


def _inline_problem(data: dict) -> ProblemSpec:
    data = _section(data, "problem", _PROBLEM_KEYS)
    for key in ("x0", "horizon", "set"):
        if key not in data:
            raise ConfigError(f"problem: missing key {key}")
    x0 = _vector(data["x0"], "problem.x0")
    horizon = _number(data["horizon"], "problem.horizon")
    try:
        base = set_from_dict(data["set"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"problem.set: {exc}") from exc
    if base.dim != x0.size:
        raise ConfigError("problem.set: dimension does not match x0")
    if "velocity" in data:
        vel = _vector(data["velocity"], "problem.velocity")
        if vel.size != x0.size:
            raise ConfigError("problem.velocity: dimension does not match x0")
        speed = float(np.linalg.norm(vel))
        sets = MovingSetDescriptor(base, translation=lambda t: vel * t,
                                   variation=lambda t: speed * t, variation_rate=lambda t: speed)
    else:
        sets = static(base)

    perturbation = None
    if "forcing" in data:
        fd = _section(data["forcing"], "problem.forcing", _FORCING_KEYS)
        mat = np.zeros((x0.size, x0.size))
        if "matrix" in fd:
            try:
                mat = np.array(fd["matrix"], dtype=float).reshape(x0.size, x0.size)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"problem.forcing.matrix: {exc}") from exc
        const = _vector(fd["constant"], "problem.forcing.constant") if "constant" in fd else np.zeros(x0.size)
        if const.size != x0.size:
            raise ConfigError("problem.forcing.constant: dimension does not match x0")
        mn = float(np.linalg.norm(mat, 2))
        perturbation = PerturbationSpec(
            lambda t, x: x @ mat.T + const,
            alpha=_number(fd.get("alpha", mn), "problem.forcing.alpha"),
            beta=_number(fd.get("beta", float(np.linalg.norm(const))), "problem.forcing.beta"),
            lipschitz=_number(fd.get("lipschitz", mn), "problem.forcing.lipschitz"),
            vectorized=True,
        )

    kernel = None
    if "kernel" in data:
        kd = _section(data["kernel"], "problem.kernel", _KERNEL_KEYS)
        c = _number(kd.get("weight", 1.0), "problem.kernel.weight")
        form = kd.get("form", "identity")
        if form == "identity":
            g = lambda t, s, x: c * x  # noqa: E731
            honest = abs(c)
        elif form == "lag":
            g = lambda t, s, x: c * (t - s)[:, None] * x  # noqa: E731
            honest = abs(c) * horizon
        else:
            raise ConfigError(f"problem.kernel.form: unknown form {form!r} (identity, lag)")
        mu = _number(kd.get("lipschitz", honest), "problem.kernel.lipschitz")
        growth = _number(kd["growth"], "problem.kernel.growth") if "growth" in kd else mu
        kernel = VolterraKernel(g, x0.size, mu, growth)

    if "state" in data:
        sd = _section(data["state"], "problem.state", _STATE_KEYS)
        gain = _number(sd.get("gain", 0.0), "problem.state.gain")
        shift = sd.get("shift", "tanh")
        if shift not in _SHIFTS:
            raise ConfigError(f"problem.state.shift: unknown shift {shift!r} ({', '.join(_SHIFTS)})")
        sets = StateDependentSetDescriptor(sets, _SHIFTS[shift], gain)

    try:
        return ProblemSpec(x0, sets, horizon, perturbation=perturbation, kernel=kernel)
    except ValueError as exc:
        raise ConfigError(f"problem: {exc}") from exc


def build_run(data: dict) -> RunConfig:
    if ("scenario" in data) == ("problem" in data):
        raise ConfigError("config: give exactly one of 'scenario' or 'problem'")
    solver = _solver_config(data.get("solver"))
    scenario = None
    oracle = None
    if "scenario" in data:
        sd = _section(data["scenario"], "scenario", _SCENARIO_KEYS)
        name = sd.get("name")
        if name not in REGISTRY:
            raise ConfigError(f"scenario.name: unknown scenario {name!r}; known: {', '.join(sorted(REGISTRY))}")
        params = _section(sd.get("params"), "scenario.params", set(_factory_params(name)))
        if name.startswith("viscoelastic") and solver.step is not None:
            params = {"step": solver.step, **params}
        scenario = get_scenario(name, **params)
        problem = scenario.problem
        oracle = scenario.oracle
    else:
        problem = _inline_problem(data["problem"])
        name = "inline"
    try:
        solver.grid(problem.horizon)
    except ValueError as exc:
        raise ConfigError(f"solver: {exc}") from exc

    out = _section(data.get("output"), "output", _OUTPUT_KEYS)
    emit = {k: True for k in _EMIT_KEYS}
    emit.update(_section(out.get("emit"), "output.emit", _EMIT_KEYS))
    directory = os.environ.get(OUTPUT_ENV) or out.get("directory", "out")
    study = _section(data.get("study"), "study", _STUDY_KEYS)
    validate = _section(data.get("validate"), "validate", _VALIDATE_KEYS)
    return RunConfig(problem, solver, Path(directory), emit, name, oracle, scenario, dict(study), dict(validate))


def _factory_params(name: str) -> list[str]:
    import inspect

    return list(inspect.signature(REGISTRY[name]).parameters)


def _prepare_output(path: Path) -> Path:
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"output.directory: cannot create {path}: {exc}") from exc
    if not os.access(path, os.W_OK):
        raise ConfigError(f"output.directory: {path} is not writable")
    return path


# -- serialization -------------------------------------------------------------

def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n")


def _fmt(v) -> str:
    if v is None:
        return ""
    v = float(v)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return format(v, ".17g")


# -- commands ------------------------------------------------------------------

def _oracle_error(run: RunConfig, x: Trajectory) -> Optional[float]:
    if not callable(run.oracle):
        return None
    ref = np.array([np.atleast_1d(run.oracle(t)) for t in x.grid.nodes])
    return float(np.max(np.linalg.norm(x.values - ref, axis=1)))


def cmd_solve(config_path) -> int:
    run = build_run(load_config(config_path))
    out = _prepare_output(run.output_dir)
    payload = {"command": "solve", "scenario": run.name}
    try:
        x, report, bounds = solve(run.problem, run.solver)
    except NonConvergence as exc:
        payload.update(converged=False, message=str(exc),
                       report=exc.report.to_dict() if exc.report is not None else None)
        if run.emit["report"]:
            write_json(out / "report.json", payload)
        log.error("%s", exc)
        return EXIT_FAILED
    if run.emit["trajectory"]:
        x.to_csv(out / "trajectory.csv")
    if run.emit["bounds"]:
        bounds.to_csv(out / "bounds.csv")
    payload.update(converged=report.converged, report=report.to_dict())
    err = _oracle_error(run, x)
    if err is not None:
        payload["oracle_sup_error"] = err
    if run.scenario is not None and run.scenario.model is not None:
        u = recover_displacement(x, run.scenario.model)
        payload["inversion_residual"] = inversion_residual(x, u, run.scenario.model)
        if run.emit["trajectory"]:
            u.to_csv(out / "displacement.csv")
    if run.emit["report"]:
        write_json(out / "report.json", payload)
    return EXIT_OK if report.converged else EXIT_FAILED


def cmd_study(config_path) -> int:
    run = build_run(load_config(config_path))
    out = _prepare_output(run.output_dir)
    steps = run.study.get("steps")
    if not isinstance(steps, list) or len(steps) < 3:
        raise ConfigError("study.steps: list at least three step sizes")
    steps = [_number(h, f"study.steps[{i}]") for i, h in enumerate(steps)]
    for h in steps:
        try:
            replace(run.solver, step=h, nodes=None).grid(run.problem.horizon)
        except ValueError as exc:
            raise ConfigError(f"study.steps: {exc}") from exc
    threshold = _number(run.study.get("threshold", 1.8), "study.threshold")
    reference = run.study.get("reference", "oracle")
    if reference == "oracle":
        ref = run.oracle if run.oracle is not None else "finest"
    elif reference == "finest":
        ref = "finest"
    else:
        raise ConfigError(f"study.reference: expected 'oracle' or 'finest', got {reference!r}")
    factor = int(_number(run.study.get("reference_factor", 100), "study.reference_factor"))
    try:
        rows = convergence_study(run.problem, steps, ref, run.solver, reference_factor=factor)
    except NonConvergence as exc:
        write_json(out / "report.json", {"command": "study", "scenario": run.name, "converged": False,
                                         "message": str(exc)})
        log.error("%s", exc)
        return EXIT_FAILED
    if run.emit["study"]:
        with open(out / "study.csv", "w", newline="") as fh:
            fh.write("h,sup_error,ratio\n")
            for r in rows:
                fh.write(f"{_fmt(r.step)},{_fmt(r.sup_error)},{_fmt(r.ratio)}\n")
    ratios = [r.ratio for r in rows if r.ratio is not None]
    passed = all(q >= threshold for q in ratios)
    if run.emit["report"]:
        write_json(out / "report.json", {
            "command": "study", "scenario": run.name, "threshold": threshold, "passed": passed,
            "rows": [{"h": r.step, "sup_error": r.sup_error, "ratio": r.ratio} for r in rows],
        })
    return EXIT_OK if passed else EXIT_FAILED


def cmd_validate(config_path) -> int:
    run = build_run(load_config(config_path))
    out = _prepare_output(run.output_dir)
    seed = int(_number(run.validate.get("seed", 0), "validate.seed"))
    samples = int(_number(run.validate.get("samples", 200), "validate.samples"))
    audit = audit_problem(run.problem, run.solver.grid(run.problem.horizon), seed=seed, samples=samples)
    write_json(out / "validate.json", {"command": "validate", "scenario": run.name, "checks": audit,
                                       "passed": audit["passed"]})
    return EXIT_OK if audit["passed"] else EXIT_FAILED


def cmd_scenario_list() -> int:
    for name, doc in list_scenarios():
        print(f"{name:24s} {doc}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sweeping", description=__doc__.splitlines()[0] if __doc__ else None)
    p.add_argument("-v", "--verbose", action="store_true", help="log solver progress")
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("solve", "study", "validate"):
        sp = sub.add_parser(name)
        sp.add_argument("config")
    sc = sub.add_parser("scenario")
    sc.add_argument("action", choices=["list"])
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    commands = {"solve": cmd_solve, "study": cmd_study, "validate": cmd_validate}
    try:
        if args.command == "scenario":
            return cmd_scenario_list()
        return commands[args.command](args.config)
    except (ConfigError, InvalidGain) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (TypeError, ValueError, KeyError) as exc:
        print(f"error: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SweepingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())

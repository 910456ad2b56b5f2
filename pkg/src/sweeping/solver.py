"""Catching-up integration and the fixed-point loops built on it.

The history-dependent problem is solved by Picard iteration on whole
trajectories: each sweep freezes the forcing ``f(t, y(t)) + R(y)(t)`` at the
previous iterate and integrates the resulting sweeping process with the
explicit catching-up scheme ``x_{k+1} = proj_{C(t_{k+1})}(x_k + dt h(t_k))``.
State-dependent sets add an outer substitution loop on the set's state
argument.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Union

import numpy as np

from .bounds import BoundCheck, BoundsReport, certificate_thm41, certificate_thm51, verify_solution_bounds
from .errors import AmbiguousProjection, NonConvergence, OutsideProxNeighborhood, StepTooLarge
from .geometry import MovingSetDescriptor, StateDependentSetDescriptor
from .history import (
    HistoryOperator,
    PerturbationSpec,
    TimeGrid,
    Trajectory,
    VolterraHistory,
    VolterraKernel,
    sample,
    volterra_to_history,
    zero_history,
)

log = logging.getLogger(__name__)

_RADIUS_ITERS = 50


@dataclass(frozen=True)
class SolverConfig:
    step: Optional[float] = None
    nodes: Optional[int] = None
    picard_tol: float = 1e-10
    picard_max_iters: int = 200
    weighted_norm_rate: Optional[float] = None
    truncation: bool = True
    state_outer_tol: float = 1e-10
    state_outer_max_iters: int = 100
    damping: float = 1.0
    step_halving_max: int = 20
    prox_fraction: float = 0.5
    bound_tol: Optional[float] = None
    psi_limits: str = "printed"
    zero_response_reading: str = "t"

    def __post_init__(self):
        if (self.step is None) == (self.nodes is None):
            raise ValueError("give exactly one of step or nodes")
        if self.step is not None and not self.step > 0:
            raise ValueError("step must be positive")
        if self.nodes is not None and self.nodes < 1:
            raise ValueError("nodes must be >= 1")
        if not (self.picard_tol > 0 and self.state_outer_tol > 0):
            raise ValueError("tolerances must be positive")
        if not 0.0 < self.damping <= 1.0:
            raise ValueError("damping must lie in (0, 1]")

    def grid(self, horizon: float) -> TimeGrid:
        if self.step is not None:
            return TimeGrid.from_step(horizon, self.step)
        return TimeGrid.regular(horizon, self.nodes)

    def certificate_tol(self, grid: TimeGrid) -> float:
        if self.bound_tol is not None:
            return self.bound_tol
        return 1e-6 + 10.0 * float(np.max(grid.steps))


@dataclass(frozen=True)
class ProblemSpec:
    """``x' in -N_C(x) + f(t, x) + R(x)(t)``, ``x(0) = x0``.

    ``sets`` is a :class:`MovingSetDescriptor` or a
    :class:`StateDependentSetDescriptor`.  A Volterra ``kernel`` may stand in
    for ``history``.
    """

    x0: np.ndarray
    sets: Union[MovingSetDescriptor, StateDependentSetDescriptor]
    horizon: float
    perturbation: Optional[PerturbationSpec] = None
    history: Optional[HistoryOperator] = None
    kernel: Optional[VolterraKernel] = None
    kernel_subsample: int = 1

    def __post_init__(self):
        object.__setattr__(self, "x0", np.atleast_1d(np.asarray(self.x0, dtype=float)))
        if self.history is not None and self.kernel is not None:
            raise ValueError("give a history operator or a Volterra kernel, not both")
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")

    @property
    def dim(self) -> int:
        return self.x0.size

    @property
    def state_dependent(self) -> bool:
        return isinstance(self.sets, StateDependentSetDescriptor)

    def forcing(self) -> PerturbationSpec:
        if self.perturbation is not None:
            return self.perturbation
        zero = np.zeros(self.dim)
        return PerturbationSpec(lambda t, x: zero)

    def history_operator(self) -> HistoryOperator:
        return self.history if self.history is not None else zero_history(self.dim)


@dataclass
class SolveReport:
    picard_residuals: list[float] = field(default_factory=list)
    outer_residuals: list[float] = field(default_factory=list)
    constraint_violation: float = 0.0
    bound_check: Optional[BoundCheck] = None
    step_halvings: int = 0
    converged: bool = False
    kappa: float = 0.0
    weighted_norm_rate: float = 0.0

    def to_dict(self) -> dict:
        return {
            "converged": self.converged,
            "picard_residuals": list(map(float, self.picard_residuals)),
            "outer_residuals": list(map(float, self.outer_residuals)),
            "constraint_violation": float(self.constraint_violation),
            "bound_check": self.bound_check.to_dict() if self.bound_check else None,
            "step_halvings": self.step_halvings,
            "kappa": float(self.kappa),
            "weighted_norm_rate": float(self.weighted_norm_rate),
        }


# -- catching-up ---------------------------------------------------------------

class _Stepper:
    def __init__(self, sets: MovingSetDescriptor, prox_fraction: float, max_halvings: int):
        self.sets = sets
        self.limit = prox_fraction * sets.prox_constant
        self.check_drift = math.isfinite(self.limit)
        self.max_halvings = max_halvings
        self.halvings = 0

    def advance(self, x, h, t0, t1, depth=0):
        dt = t1 - t0
        if self.check_drift:
            drift = self.sets.variation_between(t0, t1) + dt * float(np.linalg.norm(h))
            if drift >= self.limit:
                return self._split(x, h, t0, t1, depth, StepTooLarge(
                    f"per-step drift {drift:.3g} exceeds {self.limit:.3g} on [{t0}, {t1}]"))
        try:
            return self.sets.at(t1).project(x + dt * h)
        except (AmbiguousProjection, OutsideProxNeighborhood) as exc:
            return self._split(x, h, t0, t1, depth, exc)

    def _split(self, x, h, t0, t1, depth, exc):
        if depth >= self.max_halvings:
            if isinstance(exc, AmbiguousProjection):
                raise exc
            raise StepTooLarge(f"step halving budget exhausted on [{t0}, {t1}]: {exc}") from exc
        self.halvings += 1
        mid = 0.5 * (t0 + t1)
        x = self.advance(x, h, t0, mid, depth + 1)
        return self.advance(x, h, mid, t1, depth + 1)


def _catching_up(sets, forcing, x0, grid, prox_fraction=0.5, step_halving_max=20):
    nodes = grid.nodes
    forcing = np.asarray(forcing, dtype=float).reshape(-1, np.size(x0))
    if forcing.shape[0] < grid.size - 1:
        raise ValueError("one forcing sample per grid interval required")
    stepper = _Stepper(sets, prox_fraction, step_halving_max)
    out = np.empty((grid.size, np.size(x0)))
    out[0] = x0
    x = np.asarray(x0, dtype=float)
    for k in range(grid.size - 1):
        x = stepper.advance(x, forcing[k], nodes[k], nodes[k + 1])
        out[k + 1] = x
    return Trajectory(grid, out), stepper.halvings


def catching_up(sets: MovingSetDescriptor, forcing, x0, grid: TimeGrid,
                prox_fraction: float = 0.5, step_halving_max: int = 20) -> Trajectory:
    """Moreau catching-up for ``x' in -N_{C(t)}(x) + h(t)`` with left-endpoint forcing samples."""
    return _catching_up(sets, forcing, x0, grid, prox_fraction, step_halving_max)[0]


# -- history-dependent problems ------------------------------------------------

def _check_feasible(set_, x0):
    d = set_.distance(x0)
    if d > set_.tol:
        raise ValueError(f"initial condition is not in C(0) (distance {d:.3g})")


def _forcing_samples(f: PerturbationSpec, history: HistoryOperator, y: Trajectory) -> np.ndarray:
    nodes = y.grid.nodes
    if getattr(f, "vectorized", False):
        fv = np.asarray(f.f(nodes, y.values), dtype=float)
    else:
        fv = np.array([f(t, v) for t, v in zip(nodes, y.values)])
    return fv + history.evaluate_nodes(y)


def _truncate(y: Trajectory, radius: np.ndarray) -> Trajectory:
    norms = y.norms()
    with np.errstate(divide="ignore", invalid="ignore"):
        factor = np.where(norms > radius, radius / norms, 1.0)
    if np.all(factor == 1.0):
        return y
    return Trajectory(y.grid, y.values * factor[:, None])


def _certificate(problem: ProblemSpec, sets: MovingSetDescriptor, history: HistoryOperator,
                 grid: TimeGrid, cfg: SolverConfig) -> BoundsReport:
    f = problem.forcing()
    return certificate_thm41(
        float(np.linalg.norm(problem.x0)),
        sample(f.alpha, grid),
        sample(f.beta, grid),
        history.kappa,
        np.linalg.norm(history.zero_response(grid), axis=1),
        np.array([sets.v_dot(t) for t in grid.nodes]),
        grid,
        zero_response_reading=cfg.zero_response_reading,
    )


def _initial(grid, x0, initial):
    if initial is None:
        return Trajectory.constant(grid, x0)
    if isinstance(initial, Trajectory):
        return initial
    return Trajectory.constant(grid, initial)


def solve_history_sweeping(problem: ProblemSpec, cfg: SolverConfig, initial=None):
    """Picard iteration for the history-dependent sweeping process.

    Returns ``(trajectory, SolveReport, BoundsReport)``.  ``initial`` sets the
    first iterate (a constant vector or a trajectory; default ``x0``).
    Raises :class:`NonConvergence` carrying the report when the iteration
    budget runs out.
    """
    return _solve_history(problem, cfg, initial, True)


def _solve_history(problem: ProblemSpec, cfg: SolverConfig, initial, final_checks: bool):
    if problem.state_dependent:
        raise TypeError("use solve_state_dependent for state-dependent sets")
    if problem.kernel is not None:
        return solve_volterra(problem, cfg, initial)
    grid = cfg.grid(problem.horizon)
    sets = problem.sets
    _check_feasible(sets.at(0.0), problem.x0)
    f = problem.forcing()
    history = problem.history_operator()
    bounds = _certificate(problem, sets, history, grid, cfg)
    radius = bounds.radius
    kf = f.kappa(radius)
    alpha = sample(f.alpha, grid)
    rate = cfg.weighted_norm_rate
    if rate is None:
        rate = 2.0 * (float(np.max(alpha)) + history.kappa) + kf
    weights = np.exp(-rate * grid.nodes)

    report = SolveReport(kappa=history.kappa, weighted_norm_rate=rate)
    y = _initial(grid, problem.x0, initial)
    x = y
    for it in range(cfg.picard_max_iters):
        yt = _truncate(y, bounds.r) if cfg.truncation else y
        forcing = _forcing_samples(f, history, yt)
        x, halvings = _catching_up(sets, forcing, problem.x0, grid,
                                   cfg.prox_fraction, cfg.step_halving_max)
        report.step_halvings += halvings
        res = float(np.max(weights * np.linalg.norm(x.values - y.values, axis=1)))
        report.picard_residuals.append(res)
        log.debug("picard iteration %d residual %.3e", it + 1, res)
        y = x
        if res <= cfg.picard_tol:
            report.converged = True
            break

    if final_checks:
        report.constraint_violation = max(sets.at(t).distance(v) for t, v in zip(grid.nodes, x.values))
        report.bound_check = verify_solution_bounds(x, bounds, cfg.certificate_tol(grid))
    if not report.converged:
        raise NonConvergence(
            f"Picard iteration did not reach {cfg.picard_tol:g} in {cfg.picard_max_iters} iterations",
            report, x, bounds)
    return x, report, bounds


# -- state-dependent problems --------------------------------------------------

def solve_state_dependent(problem: ProblemSpec, cfg: SolverConfig, initial=None):
    """Successive substitution on the state argument of ``C(t, x)``.

    Each outer step solves the history-dependent problem over the frozen
    moving set ``t -> C(t, y(t))``.  Existence of a solution does not imply
    that this loop converges; exhaustion raises :class:`NonConvergence`.
    """
    if not problem.state_dependent:
        raise TypeError("problem does not have a state-dependent set")
    if problem.kernel is not None:
        return solve_state_volterra(problem, cfg, initial)
    sdesc: StateDependentSetDescriptor = problem.sets
    _check_feasible(sdesc.at(0.0, problem.x0), problem.x0)
    grid = cfg.grid(problem.horizon)
    history = problem.history_operator()
    alpha = sample(problem.forcing().alpha, grid)

    def inner(moving, start=initial, checks=False):
        # the outer loop verifies feasibility against C(t, x) itself
        return _solve_history(replace(problem, sets=moving), cfg, start, checks)

    base41 = _certificate(problem, sdesc.base, history, grid, cfg)
    bounds = certificate_thm51(base41, sdesc.gain, alpha, history.kappa, grid, cfg.psi_limits)

    if sdesc.gain == 0.0:
        # the set does not depend on the state: one inner solve is the fixed point
        x, report, _ = inner(sdesc.base, checks=True)
        report.outer_residuals.append(0.0)
        report.bound_check = verify_solution_bounds(x, bounds, cfg.certificate_tol(grid))
        return x, report, bounds

    y = Trajectory.constant(grid, problem.x0)
    outer: list[float] = []
    picard: list[float] = []
    halvings = 0
    converged = False
    report = None
    x = y
    for it in range(cfg.state_outer_max_iters):
        # later inner solves start from the previous outer iterate
        x, report, _ = inner(sdesc.frozen(y), initial if it == 0 else x)
        picard.extend(report.picard_residuals)
        halvings += report.step_halvings
        res = y.sup_distance(x)
        outer.append(res)
        log.debug("outer iteration %d residual %.3e", it + 1, res)
        if res <= cfg.state_outer_tol:
            converged = True
            break
        if cfg.damping == 1.0:
            y = x
        else:
            y = Trajectory(grid, y.values + cfg.damping * (x.values - y.values))

    final = SolveReport(picard, outer, kappa=history.kappa,
                        weighted_norm_rate=report.weighted_norm_rate if report else 0.0)
    final.step_halvings = halvings
    final.converged = converged
    final.constraint_violation = max(
        sdesc.at(t, v).distance(v) for t, v in zip(grid.nodes, x.values))
    final.bound_check = verify_solution_bounds(x, bounds, cfg.certificate_tol(grid))
    if not converged:
        raise NonConvergence(
            f"outer iteration did not reach {cfg.state_outer_tol:g} in {cfg.state_outer_max_iters} iterations",
            final, x, bounds)
    return x, final, bounds


# -- Volterra front-ends -------------------------------------------------------

def wrap_kernel(problem: ProblemSpec, cfg: SolverConfig) -> VolterraHistory:
    """Wrap the problem's kernel with ``kappa = sup_t mu_R(t)`` at the working radius ``R``.

    ``R`` depends on ``kappa`` through the norm certificate, so the pair is
    iterated to a fixed point; kernels with a constant profile need one pass.
    """
    grid = cfg.grid(problem.horizon)
    kernel = problem.kernel
    sets = problem.sets.base if problem.state_dependent else problem.sets
    radius = float(np.linalg.norm(problem.x0))
    op = volterra_to_history(kernel, grid, radius, problem.kernel_subsample)
    for _ in range(_RADIUS_ITERS):
        bounds = _certificate(problem, sets, op, grid, cfg)
        if problem.state_dependent:
            bounds = certificate_thm51(bounds, problem.sets.gain, sample(problem.forcing().alpha, grid),
                                       op.kappa, grid, cfg.psi_limits)
        radius = bounds.radius
        if not math.isfinite(radius):
            raise ValueError("working radius is unbounded; kernel Lipschitz profile grows too fast")
        nxt = volterra_to_history(kernel, grid, radius, problem.kernel_subsample)
        if abs(nxt.kappa - op.kappa) <= 1e-12 * max(1.0, op.kappa):
            return op
        op = nxt
    raise ValueError("kernel constant did not stabilize on the working radius")


def solve_volterra(problem: ProblemSpec, cfg: SolverConfig, initial=None):
    """``x' in -N_{C(t)}(x) + f(t, x) + int_0^t g(t, s, x(s)) ds``."""
    op = wrap_kernel(problem, cfg)
    return solve_history_sweeping(replace(problem, kernel=None, history=op), cfg, initial)


def solve_state_volterra(problem: ProblemSpec, cfg: SolverConfig, initial=None):
    op = wrap_kernel(problem, cfg)
    return solve_state_dependent(replace(problem, kernel=None, history=op), cfg, initial)


def solve(problem: ProblemSpec, cfg: SolverConfig, initial=None):
    """Dispatch on set type and on kernel-vs-operator memory."""
    if problem.state_dependent:
        return solve_state_dependent(problem, cfg, initial)
    return solve_history_sweeping(problem, cfg, initial)


# -- convergence study ---------------------------------------------------------

@dataclass
class StudyRow:
    step: float
    sup_error: float
    ratio: Optional[float]


def _ratio(coarse: float, fine: float) -> float:
    if fine == 0.0:
        return math.inf
    return coarse / fine


def convergence_study(problem: ProblemSpec, steps: Sequence[float], reference, cfg: SolverConfig,
                      reference_factor: int = 100, resolution: float = 1e-12) -> list[StudyRow]:
    """Sup-node error against a reference for each step size.

    ``reference`` is a callable oracle ``x(t)`` or the string ``"finest"``,
    which solves once more with the smallest step divided by
    ``reference_factor`` and interpolates it.  ``ratio`` on a row is
    ``error(h) / error(next h)``; it is ``inf`` when the next error is exactly
    zero and None on the last row.  Errors at or below ``resolution`` are
    round-off and are reported as exactly zero.
    """
    steps = list(steps)
    if len(steps) < 3:
        raise ValueError("a convergence study needs at least three step sizes")
    if isinstance(reference, str):
        if reference != "finest":
            raise ValueError(f"unknown reference {reference!r}")
        ref_cfg = replace(cfg, step=min(steps) / reference_factor, nodes=None)
        ref_traj = solve(problem, ref_cfg)[0]
        reference = ref_traj
    errors = []
    for h in steps:
        traj = solve(problem, replace(cfg, step=h, nodes=None))[0]
        ref_vals = np.array([np.atleast_1d(reference(t)) for t in traj.grid.nodes])
        err = float(np.max(np.linalg.norm(traj.values - ref_vals, axis=1)))
        errors.append(0.0 if err <= resolution else err)
    rows = []
    for i, (h, e) in enumerate(zip(steps, errors)):
        ratio = _ratio(e, errors[i + 1]) if i + 1 < len(errors) else None
        rows.append(StudyRow(h, e, ratio))
    return rows

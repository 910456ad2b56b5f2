"""Time grids, piecewise-linear trajectories and history-dependent operators."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .errors import KernelEvaluationFailure, OutOfRange
from .geometry import CheckReport

Scalar = Union[float, Callable[[float], float]]

_RATIO_FLOOR = 1e-14
_RATIO_SLACK = 1e-6


@dataclass(frozen=True, eq=False)
class TimeGrid:
    nodes: np.ndarray
    uniform: bool = False

    def __post_init__(self):
        t = np.array(self.nodes, dtype=float).reshape(-1)
        if t.size < 2:
            raise ValueError("a time grid needs at least two nodes")
        if t[0] != 0.0:
            raise ValueError("time grids start at 0")
        if np.any(np.diff(t) <= 0):
            raise ValueError("grid nodes must be strictly increasing")
        t.flags.writeable = False
        object.__setattr__(self, "nodes", t)

    @classmethod
    def regular(cls, horizon: float, n: int) -> "TimeGrid":
        """``n`` equal steps, ``n + 1`` nodes."""
        return cls(np.linspace(0.0, horizon, n + 1), uniform=True)

    @classmethod
    def from_step(cls, horizon: float, step: float) -> "TimeGrid":
        n = int(round(horizon / step))
        if n < 1 or abs(n * step - horizon) > 1e-9 * max(1.0, horizon):
            raise ValueError(f"step {step} does not divide horizon {horizon}")
        return cls.regular(horizon, n)

    @property
    def horizon(self) -> float:
        return float(self.nodes[-1])

    @property
    def size(self) -> int:
        return self.nodes.size

    @property
    def steps(self) -> np.ndarray:
        return np.diff(self.nodes)

    def index_at_or_before(self, t: float) -> int:
        if t < 0.0 or t > self.horizon:
            raise OutOfRange(f"t={t} outside [0, {self.horizon}]")
        return int(np.searchsorted(self.nodes, t, side="right")) - 1

    def truncated(self, t: float) -> "TimeGrid":
        k = self.index_at_or_before(t)
        if self.nodes[k] == t:
            if k == 0:
                raise OutOfRange("cannot truncate a grid at t=0")
            return TimeGrid(self.nodes[: k + 1], self.uniform)
        return TimeGrid(np.append(self.nodes[: k + 1], t))

    def integrate(self, samples) -> np.ndarray:
        """Cumulative trapezoid integral of node samples, starting at 0."""
        return cumulative_trapezoid(np.asarray(samples, dtype=float), self.nodes, axis=0, initial=0.0)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Node values on a grid, interpolated piecewise-linearly."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.shape[0] != self.grid.size:
            raise ValueError("one value per grid node required")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @classmethod
    def constant(cls, grid: TimeGrid, value) -> "Trajectory":
        value = np.atleast_1d(np.asarray(value, dtype=float))
        return cls(grid, np.tile(value, (grid.size, 1)))

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def times(self) -> np.ndarray:
        return self.grid.nodes

    def __call__(self, t: float) -> np.ndarray:
        return interpolate(self, t)

    def derivative(self, t: float) -> np.ndarray:
        """Slope of the segment starting at ``t`` (the last segment at ``T``)."""
        k = min(self.grid.index_at_or_before(t), self.grid.size - 2)
        dt = self.grid.nodes[k + 1] - self.grid.nodes[k]
        return (self.values[k + 1] - self.values[k]) / dt

    def truncated(self, t: float) -> "Trajectory":
        g = self.grid.truncated(t)
        vals = self.values[: g.size - 1]
        return Trajectory(g, np.vstack([vals, interpolate(self, t)]))

    def sup_distance(self, other: "Trajectory") -> float:
        return float(np.max(np.linalg.norm(self.values - other.values, axis=1)))

    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.values, axis=1)

    def to_csv(self, path) -> None:
        header = ["t"] + [f"x_{i + 1}" for i in range(self.dim)]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for t, row in zip(self.grid.nodes, self.values):
                w.writerow([format(t, ".17g")] + [format(v, ".17g") for v in row])

    @classmethod
    def from_csv(cls, path) -> "Trajectory":
        data = np.loadtxt(Path(path), delimiter=",", skiprows=1, ndmin=2)
        return cls(TimeGrid(data[:, 0]), data[:, 1:])


def interpolate(x: Trajectory, t: float) -> np.ndarray:
    nodes = x.grid.nodes
    k = x.grid.index_at_or_before(t)
    if nodes[k] == t:
        return x.values[k].copy()
    w = (t - nodes[k]) / (nodes[k + 1] - nodes[k])
    return (1.0 - w) * x.values[k] + w * x.values[k + 1]


def _as_function(value: Scalar) -> Callable[[float], float]:
    if callable(value):
        return value
    c = float(value)
    return lambda t: c


def sample(value: Scalar, grid: TimeGrid) -> np.ndarray:
    """Samples of a scalar-or-callable function on the grid nodes."""
    if callable(value):
        return np.array([float(value(t)) for t in grid.nodes])
    return np.full(grid.size, float(value))


class HistoryOperator:
    """Contract for ``R : C(I; H) -> C(I; H)`` with
    ``|R(x)(t) - R(y)(t)| <= kappa * int_0^t |x - y| ds``.

    Subclasses implement :meth:`evaluate_nodes`, which must be causal: the
    value at node ``k`` may only read ``x.values[:k + 1]``.
    """

    kappa: float = 0.0
    dim: int = 1

    def evaluate_nodes(self, x: Trajectory) -> np.ndarray:
        raise NotImplementedError

    def evaluate(self, x: Trajectory, t: float) -> np.ndarray:
        if t == 0.0:
            return self.evaluate_nodes(Trajectory.constant(TimeGrid([0.0, 1.0]), x.values[0]))[0]
        return self.evaluate_nodes(x.truncated(t))[-1]

    def zero_response(self, grid: TimeGrid) -> np.ndarray:
        """``R(0)`` at the nodes of ``grid``; the last result is cached."""
        cached = getattr(self, "_zero_cache", None)
        if cached is not None and np.array_equal(cached[0], grid.nodes):
            return cached[1].copy()
        out = self.evaluate_nodes(Trajectory(grid, np.zeros((grid.size, self.dim))))
        self._zero_cache = (grid.nodes.copy(), out.copy())
        return out


class ZeroHistory(HistoryOperator):
    def __init__(self, dim: int):
        if dim < 1:
            raise ValueError("dimension must be positive")
        self.dim = dim
        self.kappa = 0.0

    def evaluate_nodes(self, x):
        return np.zeros((x.grid.size, self.dim))


def zero_history(dim: int) -> ZeroHistory:
    return ZeroHistory(dim)


@dataclass(frozen=True, eq=False)
class VolterraKernel:
    """Integrand ``g(t, s, x)`` of ``int_0^t g(t, s, x(s)) ds``.

    ``g`` is called with a scalar ``t``, an array ``s`` of shape ``(m,)`` and
    states ``x`` of shape ``(m, d)`` and returns ``(m, d)``; set
    ``vectorized=False`` to have it called one node at a time instead.
    ``lipschitz`` is ``mu_r(t)`` (a constant or ``f(r, t)``) and ``growth``
    is ``sigma(t, s)`` (a constant, ``f(t, s)`` or None when undeclared).
    """

    g: Callable
    dim: int
    lipschitz: Union[float, Callable[[float, float], float]]
    growth: Union[None, float, Callable[[float, float], float]] = None
    vectorized: bool = True

    def mu(self, r: float, t: float) -> float:
        if callable(self.lipschitz):
            return float(self.lipschitz(r, t))
        return float(self.lipschitz)

    def sigma(self, t: float, s: float) -> Optional[float]:
        if self.growth is None:
            return None
        if callable(self.growth):
            return float(self.growth(t, s))
        return float(self.growth)

    def __call__(self, t: float, s: np.ndarray, x: np.ndarray) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        x = np.asarray(x, dtype=float).reshape(s.size, self.dim)
        try:
            if self.vectorized:
                out = np.asarray(self.g(t, s, x), dtype=float)
                out = np.broadcast_to(out, x.shape)
            else:
                out = np.array([np.asarray(self.g(t, si, xi), dtype=float) for si, xi in zip(s, x)])
                out = out.reshape(x.shape)
        except (KernelEvaluationFailure, OutOfRange):
            raise
        except Exception as exc:  # noqa: BLE001 - user callbacks may raise anything
            raise KernelEvaluationFailure(f"kernel failed at t={t}: {exc}") from exc
        if not np.all(np.isfinite(out)):
            raise KernelEvaluationFailure(f"kernel returned non-finite values at t={t}")
        return out


def _trapezoid_weights(s: np.ndarray) -> np.ndarray:
    w = np.zeros_like(s)
    if s.size > 1:
        h = np.diff(s)
        w[:-1] += 0.5 * h
        w[1:] += 0.5 * h
    return w


class VolterraHistory(HistoryOperator):
    """Trapezoid discretization of ``int_0^t g(t, s, x(s)) ds`` on the trajectory grid.

    With ``subsample = m > 1`` each grid interval is split into ``m`` pieces
    and ``x`` is interpolated on the finer nodes.
    """

    def __init__(self, kernel: VolterraKernel, kappa: float, subsample: int = 1):
        if subsample < 1:
            raise ValueError("subsample must be >= 1")
        self.kernel = kernel
        self.dim = kernel.dim
        self.kappa = float(kappa)
        self.subsample = subsample

    def _fine(self, x: Trajectory):
        m = self.subsample
        nodes = x.grid.nodes
        if m == 1:
            return nodes, x.values
        frac = np.arange(m) / m
        fine = (nodes[:-1, None] + np.diff(nodes)[:, None] * frac).reshape(-1)
        fine = np.append(fine, nodes[-1])
        vals = np.column_stack([np.interp(fine, nodes, x.values[:, i]) for i in range(x.dim)])
        return fine, vals

    def evaluate_nodes(self, x):
        s_all, x_all = self._fine(x)
        m = self.subsample
        # interior trapezoid weights of the full grid; only the last weight of
        # each prefix differs (half a step instead of a full one)
        full = _trapezoid_weights(s_all)
        out = np.zeros((x.grid.size, self.dim))
        for j, t in enumerate(x.grid.nodes):
            if j == 0:
                continue
            stop = j * m + 1
            s = s_all[:stop]
            vals = self.kernel(t, s, x_all[:stop])
            out[j] = full[: stop - 1] @ vals[:-1] + 0.5 * (s[-1] - s[-2]) * vals[-1]
        return out


def volterra_to_history(kernel: VolterraKernel, grid: TimeGrid, radius: float = math.inf,
                        subsample: int = 1) -> VolterraHistory:
    """Wrap a kernel as a history operator with ``kappa = sup_t mu_radius(t)`` over the grid."""
    kappa = max(kernel.mu(radius, t) for t in grid.nodes)
    if not math.isfinite(kappa):
        raise ValueError("kernel Lipschitz profile is unbounded on the working radius")
    return VolterraHistory(kernel, kappa, subsample)


@dataclass
class HistoryCheckReport:
    max_ratio: float
    kappa: float

    @property
    def passed(self) -> bool:
        return self.max_ratio <= self.kappa * (1.0 + _RATIO_SLACK)

    def to_dict(self):
        return {"max_ratio": self.max_ratio, "kappa": self.kappa, "passed": self.passed}


def verify_history_constant(op: HistoryOperator, pairs: Sequence[tuple[Trajectory, Trajectory]],
                            grid: Optional[TimeGrid] = None) -> HistoryCheckReport:
    """Empirical ratio ``|R(x)(t) - R(y)(t)| / (int_0^t |x - y| ds + floor)``."""
    worst = 0.0
    for x, y in pairs:
        g = grid if grid is not None else x.grid
        if x.grid.size != g.size or y.grid.size != g.size:
            raise ValueError("trajectory pairs must share the grid")
        diff = np.linalg.norm(op.evaluate_nodes(x) - op.evaluate_nodes(y), axis=1)
        denom = g.integrate(np.linalg.norm(x.values - y.values, axis=1)) + _RATIO_FLOOR
        worst = max(worst, float(np.max(diff / denom)))
    return HistoryCheckReport(worst, op.kappa)


def random_trajectory_pairs(grid: TimeGrid, dim: int, n: int, radius: float = 1.0,
                            seed: int = 0) -> list[tuple[Trajectory, Trajectory]]:
    """Smooth random trajectories (a few sinusoids) bounded by ``radius``."""
    rng = np.random.default_rng(seed)
    t = grid.nodes[:, None]

    def one():
        amp = rng.uniform(-1, 1, size=(3, dim))
        freq = rng.uniform(0.2, 3.0, size=(3, dim))
        phase = rng.uniform(0, 2 * np.pi, size=(3, dim))
        vals = sum(amp[i] * np.sin(freq[i] * t + phase[i]) for i in range(3))
        peak = np.max(np.linalg.norm(vals, axis=1))
        return Trajectory(grid, radius * vals / max(peak, 1e-12))

    return [(one(), one()) for _ in range(n)]


@dataclass(frozen=True, eq=False)
class PerturbationSpec:
    """Single-valued forcing ``f(t, x)`` with declared growth and Lipschitz data.

    ``alpha``/``beta`` give ``|f(t,x)| <= alpha(t)|x| + beta(t)``;
    ``lipschitz`` is ``kappa_f^r`` as a constant or a function of ``r``.
    With ``vectorized=True`` the solver may also call ``f`` on all nodes at
    once, ``f(times, states) -> (N, d)``; single-point calls must still work.
    """

    f: Callable[[float, np.ndarray], np.ndarray]
    alpha: Scalar = 0.0
    beta: Scalar = 0.0
    lipschitz: Union[float, Callable[[float], float]] = 0.0
    vectorized: bool = False

    def __call__(self, t, x):
        return np.asarray(self.f(t, np.asarray(x, dtype=float)), dtype=float)

    def kappa(self, r: float) -> float:
        return float(self.lipschitz(r)) if callable(self.lipschitz) else float(self.lipschitz)

    def alpha_at(self, t: float) -> float:
        return float(_as_function(self.alpha)(t))

    def beta_at(self, t: float) -> float:
        return float(_as_function(self.beta)(t))


def zero_perturbation(dim: int) -> PerturbationSpec:
    zero = np.zeros(dim)
    return PerturbationSpec(lambda t, x: zero)


def growth_check(p: PerturbationSpec, samples: Sequence[tuple[float, np.ndarray]],
                 tol: float = 1e-9) -> CheckReport:
    """Max of ``|f(t,x)| - alpha(t)|x| - beta(t)`` over ``(t, x)`` samples."""
    worst = -math.inf
    for t, x in samples:
        worst = max(worst, float(np.linalg.norm(p(t, x))) - p.alpha_at(t) * float(np.linalg.norm(x)) - p.beta_at(t))
    return CheckReport(worst, len(samples), tol)


def lipschitz_check(p: PerturbationSpec, r: float, samples: Sequence[tuple[float, np.ndarray, np.ndarray]],
                    tol: float = 1e-9) -> CheckReport:
    """Max of ``|f(t,x) - f(t,y)| - kappa_f^r |x - y|`` over samples in ``r B``."""
    worst = -math.inf
    k = p.kappa(r)
    for t, x, y in samples:
        lhs = float(np.linalg.norm(p(t, x) - p(t, y)))
        worst = max(worst, lhs - k * float(np.linalg.norm(np.subtract(x, y))))
    return CheckReport(worst, len(samples), tol)


def kernel_lipschitz_check(k: VolterraKernel, r: float, samples, tol: float = 1e-9) -> CheckReport:
    """Max of ``|g(t,s,x) - g(t,s,y)| - mu_r(t)|x - y|`` over ``(t, s, x, y)`` samples with s <= t."""
    worst = -math.inf
    for t, s, x, y in samples:
        gx = k(t, np.array([s]), np.atleast_2d(x))[0]
        gy = k(t, np.array([s]), np.atleast_2d(y))[0]
        worst = max(worst, float(np.linalg.norm(gx - gy)) - k.mu(r, t) * float(np.linalg.norm(np.subtract(x, y))))
    return CheckReport(worst, len(samples), tol)


def kernel_growth_check(k: VolterraKernel, samples, tol: float = 1e-9) -> CheckReport:
    """Spot check of ``|g(t,s,x)| <= sigma(t,s)(1 + |x|)``; skipped when sigma is undeclared."""
    worst = -math.inf
    for t, s, x in samples:
        sig = k.sigma(t, s)
        if sig is None:
            return CheckReport(-math.inf, 0, tol)
        gx = k(t, np.array([s]), np.atleast_2d(x))[0]
        worst = max(worst, float(np.linalg.norm(gx)) - sig * (1.0 + float(np.linalg.norm(x))))
    return CheckReport(worst, len(samples), tol)

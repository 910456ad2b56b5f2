"""A-priori bound evaluators.

Every integral is a composite trapezoid on the working grid.  Integrals of
the form ``int_0^t e(s) exp(G(t) - G(s)) ds`` are evaluated as
``exp(G(t)) * int_0^t e(s) exp(-G(s)) ds``, which is the same trapezoid sum.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np
from scipy.integrate import trapezoid

from .errors import InvalidGain
from .history import TimeGrid, Trajectory, sample

Samples = Union[float, Callable[[float], float], np.ndarray]


def _samples(value: Samples, grid: TimeGrid) -> np.ndarray:
    if isinstance(value, np.ndarray) or isinstance(value, (list, tuple)):
        arr = np.asarray(value, dtype=float).reshape(-1)
        if arr.size != grid.size:
            raise ValueError(f"expected {grid.size} samples, got {arr.size}")
        return arr
    return sample(value, grid)


def _weighted_accumulation(eps: np.ndarray, expo: np.ndarray, grid: TimeGrid) -> np.ndarray:
    """``int_0^t eps(s) exp(expo(t) - expo(s)) ds`` at every node."""
    return np.exp(expo) * grid.integrate(eps * np.exp(-expo))


def enhanced_gronwall(rho0: float, eps: Samples, k1: Samples, k2: Samples,
                      k3: Union[float, Callable[[float, np.ndarray], np.ndarray]],
                      grid: TimeGrid) -> np.ndarray:
    """Bound ``rho0 exp(int gamma) + int eps(s) exp(int_s^t gamma) ds`` with
    ``gamma(t) = K1(t) + K2(t) int_0^t K3(t, s) ds``.

    ``k3`` is a constant or a callable ``k3(t, s_array)``.
    """
    t = grid.nodes
    eps = _samples(eps, grid)
    k1 = _samples(k1, grid)
    k2 = _samples(k2, grid)
    if callable(k3):
        inner = np.zeros(grid.size)
        for j in range(1, grid.size):
            vals = np.broadcast_to(np.asarray(k3(t[j], t[: j + 1]), dtype=float), (j + 1,))
            inner[j] = trapezoid(vals, t[: j + 1])
    else:
        inner = float(k3) * t
    gamma = k1 + k2 * inner
    big_gamma = grid.integrate(gamma)
    return rho0 * np.exp(big_gamma) + _weighted_accumulation(eps, big_gamma, grid)


def classical_gronwall(rho0: float, eps: Samples, k1: Samples, grid: TimeGrid) -> np.ndarray:
    return enhanced_gronwall(rho0, eps, k1, 0.0, 0.0, grid)


def cancellation_bound(alpha: Samples, beta: Samples, grid: TimeGrid) -> np.ndarray:
    """``int_0^t exp(int_s^t beta) alpha(s) ds`` at every node."""
    return _weighted_accumulation(_samples(alpha, grid), grid.integrate(_samples(beta, grid)), grid)


@dataclass
class BoundsReport:
    t: np.ndarray
    eps: np.ndarray
    r: np.ndarray
    q: np.ndarray
    psi: Optional[np.ndarray] = None
    nu: Optional[np.ndarray] = None
    r0: Optional[np.ndarray] = None
    q0: Optional[np.ndarray] = None
    kappa: float = 0.0

    @property
    def state_dependent(self) -> bool:
        return self.psi is not None

    @property
    def radius(self) -> float:
        """Working radius: ``sup r`` (or ``sup r0`` for state-dependent reports)."""
        return float(np.max(self.r0 if self.r0 is not None else self.r))

    @property
    def norm_bound(self) -> np.ndarray:
        return self.r0 if self.r0 is not None else self.r

    @property
    def speed_bound(self) -> np.ndarray:
        return self.psi if self.psi is not None else self.q

    def columns(self) -> dict[str, np.ndarray]:
        cols = {"t": self.t, "eps": self.eps, "r": self.r, "q": self.q}
        if self.state_dependent:
            cols.update(psi=self.psi, nu=self.nu, r0=self.r0, q0=self.q0)
        return cols

    def to_csv(self, path) -> None:
        cols = self.columns()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(list(cols))
            for row in zip(*cols.values()):
                w.writerow([format(float(v), ".17g") for v in row])


def certificate_thm41(x0_norm: float, alpha: Samples, beta: Samples, kappa: float,
                      zero_response_norm: Samples, v_dot: Samples, grid: TimeGrid,
                      zero_response_reading: str = "t") -> BoundsReport:
    """Norm and speed certificates ``r``, ``q`` of the history-dependent problem.

    ``zero_response_reading="sup"`` replaces ``|R(0)(t)|`` inside ``q`` by
    ``sup_{s <= t} |R(0)(s)|``.
    """
    alpha = _samples(alpha, grid)
    beta = _samples(beta, grid)
    r0n = _samples(zero_response_norm, grid)
    vd = np.abs(_samples(v_dot, grid))
    eps = vd + 2.0 * r0n + 2.0 * beta
    expo = 2.0 * grid.integrate(alpha + kappa)
    r = x0_norm * np.exp(expo) + _weighted_accumulation(eps, expo, grid)
    if zero_response_reading == "t":
        r0_term = r0n
    elif zero_response_reading == "sup":
        r0_term = np.maximum.accumulate(r0n)
    else:
        raise ValueError(f"unknown zero_response_reading {zero_response_reading!r}")
    q = vd + 2.0 * alpha * r + 2.0 * beta + 2.0 * kappa * grid.integrate(r) + 2.0 * r0_term
    return BoundsReport(grid.nodes.copy(), eps, r, q, kappa=float(kappa))


def certificate_thm51(report: BoundsReport, gain: float, alpha: Samples, kappa: float,
                      grid: TimeGrid, psi_limits: str = "printed") -> BoundsReport:
    """Extend a history-dependent report with ``psi``, ``nu``, ``r0``, ``q0``.

    ``psi_limits="printed"`` integrates the inner exponent from ``t`` to ``s``;
    ``"swapped"`` from ``s`` to ``t``.
    """
    if not 0.0 <= gain < 1.0:
        raise InvalidGain(f"state gain must be < 1 (got {gain})")
    alpha = _samples(alpha, grid)
    rate = alpha + kappa
    a = grid.integrate(rate)
    if psi_limits == "printed":
        # int_0^t exp(2 (A(s) - A(t))) ds
        tail = np.exp(-2.0 * a) * grid.integrate(np.exp(2.0 * a))
    elif psi_limits == "swapped":
        tail = _weighted_accumulation(np.ones(grid.size), 2.0 * a, grid)
    else:
        raise ValueError(f"unknown psi_limits {psi_limits!r}")
    psi = report.q / (1.0 - gain) + (2.0 * gain / (1.0 - gain)) * rate * tail
    growth = np.exp(2.0 * a)
    nu = grid.integrate(psi * growth)
    r0 = report.r + gain * _weighted_accumulation(psi, 2.0 * a, grid)
    q0 = (report.q + gain * psi + 2.0 * alpha * gain * growth * nu
          + 2.0 * kappa * gain * growth * grid.integrate(nu))
    return BoundsReport(report.t, report.eps, report.r, report.q, psi, nu, r0, q0, kappa=report.kappa)


@dataclass
class BoundCheck:
    norm_violation: float
    increment_violation: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.norm_violation <= self.tol and self.increment_violation <= self.tol

    def to_dict(self):
        return {"norm_violation": self.norm_violation,
                "increment_violation": self.increment_violation,
                "tol": self.tol, "passed": self.passed}


def verify_solution_bounds(x: Trajectory, report: BoundsReport, tol: float) -> BoundCheck:
    """Compare ``|x(t_k)|`` with the norm bound and each increment with the integrated speed bound."""
    if x.grid.size != report.t.size:
        raise ValueError("trajectory and report must share the grid")
    norm_v = float(np.max(x.norms() - report.norm_bound))
    inc = np.linalg.norm(np.diff(x.values, axis=0), axis=1)
    allowed = np.diff(x.grid.integrate(report.speed_bound))
    inc_v = float(np.max(inc - allowed)) if inc.size else -np.inf
    return BoundCheck(norm_v, inc_v, tol)

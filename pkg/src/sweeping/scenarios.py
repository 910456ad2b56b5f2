"""Built-in problems with analytic or self-reference oracles.

Each factory returns a :class:`Scenario`: a ready :class:`ProblemSpec`, an
oracle (a callable ``x(t)`` or the string ``"finest"``) and the declared
hypothesis constants.  :func:`audit_scenario` samples those declarations
before anything is solved.

The viscoelastic model is an ``n``-degree-of-freedom reduction of a
long-memory contact problem.  With ``A = P^2`` (symmetric square root),
``Q = P^{-1}`` and the change of variables ``w = G(u)``,
``G(u)(t) = P u(t) + Q int_0^t B(t - s) u(s) ds``, the displacement problem
becomes a sweeping process in ``w`` over ``C(t) = Q (f(t) - dj(0))``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .errors import InversionNonConvergence, SingularFactor
from .geometry import (
    AffineBox,
    Ball,
    Box,
    MovingSetDescriptor,
    Sphere,
    StateDependentSetDescriptor,
    boundary_normals,
    hypomonotonicity_check,
    modulus_check,
    proximal_normal_inequality_check,
    shift_lipschitz_check,
    state_modulus_check,
    static,
)
from .history import (
    HistoryOperator,
    PerturbationSpec,
    TimeGrid,
    Trajectory,
    VolterraKernel,
    growth_check,
    kernel_growth_check,
    kernel_lipschitz_check,
    lipschitz_check,
    random_trajectory_pairs,
    verify_history_constant,
    volterra_to_history,
)
from .solver import ProblemSpec, SolverConfig

_INVERSION_MAX_ITERS = 200
_INVERSION_TOL = 1e-14
_ROUND_TRIP_TOL = 1e-8
_SPD_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class Scenario:
    name: str
    problem: ProblemSpec
    oracle: Union[Callable[[float], np.ndarray], str]
    constants: dict = field(default_factory=dict)
    description: str = ""
    model: Optional["ViscoelasticModel"] = None

    @property
    def horizon(self) -> float:
        return self.problem.horizon


def _const_forcing(value) -> PerturbationSpec:
    v = np.atleast_1d(np.asarray(value, dtype=float))
    return PerturbationSpec(lambda t, x: v, alpha=0.0, beta=float(np.linalg.norm(v)))


# -- elementary scenarios ------------------------------------------------------

def scenario_play_1d(speed: float = 1.0, half_width: float = 1.0, T: float = 2.0,
                     x0: float = 0.0) -> Scenario:
    """Interval ``[speed t - w, speed t + w]`` dragging a particle at rest."""
    if speed < 0 or not half_width > 0 or not T > 0:
        raise ValueError("play scenario needs speed >= 0 and positive half-width and horizon")
    if abs(x0) > half_width:
        raise ValueError("x0 must start inside the interval")
    sets = MovingSetDescriptor(
        Box([-half_width], [half_width]),
        translation=lambda t: np.array([speed * t]),
        variation=lambda t: speed * t,
        variation_rate=lambda t: speed,
    )
    problem = ProblemSpec(np.array([x0]), sets, T)

    def oracle(t):
        return np.array([min(max(x0, speed * t - half_width), speed * t + half_width)])

    return Scenario("play_1d", problem, oracle,
                    {"alpha": 0.0, "beta": 0.0, "kappa_f": 0.0, "kappa_R": 0.0,
                     "v_dot": speed, "rho": math.inf, "L": 0.0},
                    "play operator: interval of fixed width moving at constant speed")


def scenario_stationary(T: float = 1.0, x0: float = 0.25) -> Scenario:
    """Static interval with no forcing; the state stays at ``x0``."""
    sets = static(Box([-1.0], [1.0]))
    problem = ProblemSpec(np.array([x0]), sets, T)
    value = np.array([x0])
    return Scenario("stationary", problem, lambda t: value,
                    {"alpha": 0.0, "beta": 0.0, "kappa_f": 0.0, "kappa_R": 0.0,
                     "v_dot": 0.0, "rho": math.inf, "L": 0.0},
                    "static interval, no forcing: the state never moves")


def _cosh(t):
    return np.array([math.cosh(t)])


def _lag_oracle(t):
    # x''' = x with x(0)=1, x'(0)=x''(0)=0
    return np.array([(math.exp(t) + 2.0 * math.exp(-t / 2) * math.cos(math.sqrt(3.0) * t / 2)) / 3.0])


_KERNELS = {
    "identity": (lambda t, s, x: x, 1.0, _cosh),
    "lag": (lambda t, s, x: (t - s)[:, None] * x, None, _lag_oracle),
    "zero": (lambda t, s, x: np.zeros_like(x), 0.0, lambda t: np.array([1.0])),
}


def scenario_unconstrained_volterra(kernel: str = "identity", T: float = 2.0,
                                    x0: float = 1.0) -> Scenario:
    """``x' = int_0^t g(t, s, x(s)) ds`` inside a ball that never binds.

    Oracles: ``cosh`` for ``g = x``; ``(e^t + 2 e^{-t/2} cos(sqrt(3) t / 2)) / 3``
    for ``g = (t - s) x``; the constant ``x0`` for ``g = 0``.  The oracles
    assume ``x0 = 1`` and are scaled linearly otherwise.
    """
    if kernel not in _KERNELS:
        raise ValueError(f"unknown kernel {kernel!r}; choose from {sorted(_KERNELS)}")
    g, mu, base_oracle = _KERNELS[kernel]
    lipschitz = mu if mu is not None else (lambda r, t: t)
    growth = mu if mu is not None else (lambda t, s: t - s)
    k = VolterraKernel(g, 1, lipschitz, growth)
    ts = np.linspace(0.0, T, 2001)
    peak = abs(x0) * max(float(abs(base_oracle(t)[0])) for t in ts)
    radius = max(2.0 * peak, 1.0)
    sets = static(Ball([0.0], radius))
    problem = ProblemSpec(np.array([x0]), sets, T, kernel=k)

    def oracle(t):
        return x0 * base_oracle(t)

    kappa = max(k.mu(radius, t) for t in (0.0, T))
    return Scenario(f"volterra_{kernel}", problem, oracle,
                    {"alpha": 0.0, "beta": 0.0, "kappa_f": 0.0, "kappa_R": kappa,
                     "v_dot": 0.0, "rho": math.inf, "L": 0.0, "ball_radius": radius},
                    f"inactive ball constraint, Volterra kernel '{kernel}'")


def scenario_nonconvex_ring(T: float = 1.0, x0=(1.0, 0.0)) -> Scenario:
    """Unit circle (not disc) whose center moves along the first axis at unit speed."""
    x0 = np.asarray(x0, dtype=float)
    if abs(np.linalg.norm(x0) - 1.0) > 1e-12:
        raise ValueError("x0 must lie on the unit circle")
    sets = MovingSetDescriptor(
        Sphere([0.0, 0.0], 1.0),
        translation=lambda t: np.array([t, 0.0]),
        variation=lambda t: t,
        variation_rate=lambda t: 1.0,
    )
    problem = ProblemSpec(x0, sets, T)
    return Scenario("nonconvex_ring", problem, "finest",
                    {"alpha": 0.0, "beta": 0.0, "kappa_f": 0.0, "kappa_R": 0.0,
                     "v_dot": 1.0, "rho": 1.0, "L": 0.0},
                    "unit circle translated at unit speed (prox constant 1)")


def scenario_tanh_state(gain: float = 0.3, kernel_weight: float = 0.0, T: float = 2.0,
                        x0: float = 0.0, forcing: float = 1.0) -> Scenario:
    """``C(t, x) = [gain tanh(x) - 1, gain tanh(x) + 1]`` under constant forcing.

    With ``kernel_weight = c > 0`` the memory term ``int_0^t c x(s) ds`` is added.
    """
    if kernel_weight < 0:
        raise ValueError("kernel_weight must be nonnegative")
    sets = StateDependentSetDescriptor(static(Box([-1.0], [1.0])), np.tanh, gain)
    kernel = None
    if kernel_weight > 0:
        c = float(kernel_weight)
        kernel = VolterraKernel(lambda t, s, x: c * x, 1, c, c)
    problem = ProblemSpec(np.array([x0]), sets, T, perturbation=_const_forcing([forcing]),
                          kernel=kernel)
    return Scenario("tanh_state", problem, "finest",
                    {"alpha": 0.0, "beta": abs(forcing), "kappa_f": 0.0,
                     "kappa_R": float(kernel_weight), "v_dot": 0.0, "rho": math.inf, "L": gain},
                    "interval shifted by gain * tanh(state) under constant forcing")


# -- viscoelastic reduction ----------------------------------------------------

@dataclass(frozen=True, eq=False)
class RelaxationProfile:
    """Scalar profile ``phi`` with ``B(t) = phi(t) B0`` and its analytic derivative.

    ``phi_sup`` / ``dphi_sup`` bound ``|phi|`` and ``|phi'|`` on ``[0, T]``.
    """

    name: str
    phi: Callable[[np.ndarray], np.ndarray]
    dphi: Callable[[np.ndarray], np.ndarray]
    phi_sup: Callable[[float], float]
    dphi_sup: Callable[[float], float]


def exponential_profile(rate: float = 1.0) -> RelaxationProfile:
    if rate < 0:
        raise ValueError("relaxation rate must be nonnegative")
    a = float(rate)
    return RelaxationProfile(
        "exponential",
        lambda t: np.exp(-a * np.asarray(t, float)),
        lambda t: -a * np.exp(-a * np.asarray(t, float)),
        lambda T: 1.0,
        lambda T: a,
    )


def constant_profile() -> RelaxationProfile:
    return RelaxationProfile(
        "constant",
        lambda t: np.ones_like(np.asarray(t, float)),
        lambda t: np.zeros_like(np.asarray(t, float)),
        lambda T: 1.0,
        lambda T: 0.0,
    )


def no_memory() -> RelaxationProfile:
    return RelaxationProfile(
        "none",
        lambda t: np.zeros_like(np.asarray(t, float)),
        lambda t: np.zeros_like(np.asarray(t, float)),
        lambda T: 0.0,
        lambda T: 0.0,
    )


PROFILES = {"exponential": exponential_profile, "constant": constant_profile, "none": no_memory}


def _rate(fn: Callable[[float], np.ndarray], t: float, step: float = 1e-6) -> np.ndarray:
    lo = max(t - step, 0.0)
    return (np.asarray(fn(t + step), float) - np.asarray(fn(lo), float)) / (t + step - lo)


def _trapezoid_weights(nodes: np.ndarray) -> np.ndarray:
    w = np.zeros_like(nodes)
    if nodes.size > 1:
        h = np.diff(nodes)
        w[:-1] += 0.5 * h
        w[1:] += 0.5 * h
    return w


@dataclass(frozen=True, eq=False)
class ViscoelasticModel:
    """Reduced model data.

    ``stiffness`` is ``A`` (symmetric positive definite), ``relaxation`` the
    matrix ``B0`` of the separable kernel ``B(t) = profile.phi(t) B0``.
    ``load(t)`` is the force vector, ``friction(t)`` the nonnegative bounds
    ``f3`` on the ``contact`` coordinates (``f3(0) = 0``).
    """

    stiffness: np.ndarray
    relaxation: np.ndarray
    profile: RelaxationProfile
    load: Callable[[float], np.ndarray]
    friction: Callable[[float], np.ndarray]
    contact: tuple
    load_rate: Optional[Callable[[float], np.ndarray]] = None
    friction_rate: Optional[Callable[[float], np.ndarray]] = None

    def __post_init__(self):
        a = np.array(self.stiffness, dtype=float)
        n = a.shape[0]
        if a.shape != (n, n):
            raise ValueError("stiffness must be square")
        if not np.allclose(a, a.T, rtol=0.0, atol=_SPD_TOL * max(1.0, np.abs(a).max())):
            raise ValueError("stiffness must be symmetric")
        lam, vec = np.linalg.eigh(0.5 * (a + a.T))
        if lam.min() <= _SPD_TOL:
            raise SingularFactor(f"stiffness is not positive definite (min eigenvalue {lam.min():.3g})")
        b = np.array(self.relaxation, dtype=float)
        if b.shape != (n, n) or not np.allclose(b, b.T, atol=_SPD_TOL * max(1.0, np.abs(b).max())):
            raise ValueError("relaxation matrix must be symmetric and match the stiffness")
        if np.linalg.eigvalsh(b).min() < -_SPD_TOL * max(1.0, np.abs(b).max()):
            raise ValueError("relaxation matrix must be positive semidefinite")
        contact = tuple(int(i) for i in self.contact)
        if not contact or len(set(contact)) != len(contact) or min(contact) < 0 or max(contact) >= n:
            raise ValueError("contact indices must be distinct and within the model")
        f3 = np.atleast_1d(np.asarray(self.friction(0.0), float))
        if f3.shape != (len(contact),):
            raise ValueError("friction bounds must have one entry per contact coordinate")
        if np.any(np.abs(f3) > 1e-12):
            raise ValueError("friction bounds must vanish at t = 0")
        if np.atleast_1d(self.load(0.0)).shape != (n,):
            raise ValueError("load must return an n-vector")
        p = (vec * np.sqrt(lam)) @ vec.T
        q = (vec / np.sqrt(lam)) @ vec.T
        k = q @ b @ q
        object.__setattr__(self, "stiffness", a)
        object.__setattr__(self, "relaxation", b)
        object.__setattr__(self, "contact", contact)
        object.__setattr__(self, "P", p)
        object.__setattr__(self, "Q", q)
        object.__setattr__(self, "K", 0.5 * (k + k.T))
        object.__setattr__(self, "min_eigenvalue", float(lam.min()))

    @property
    def dim(self) -> int:
        return self.stiffness.shape[0]

    def relaxation_at(self, t: float) -> np.ndarray:
        return float(self.profile.phi(t)) * self.relaxation

    def _load_rate(self, t):
        if self.load_rate is not None:
            return np.asarray(self.load_rate(t), float)
        return _rate(self.load, t)

    def _friction_rate(self, t):
        if self.friction_rate is not None:
            return np.asarray(self.friction_rate(t), float)
        return _rate(self.friction, t)

    # -- transformed set
    def constraint_at(self, t: float) -> AffineBox:
        """``Q (f(t) - dj(0))`` with ``dj(0)`` the box ``[-f3, f3]`` on contact coordinates."""
        f3 = np.atleast_1d(np.asarray(self.friction(t), float))
        if np.any(f3 < 0):
            raise ValueError(f"friction bound negative at t={t}")
        origin = self.Q @ np.asarray(self.load(t), float)
        template = self.__dict__.get("_template")
        if template is None:
            template = AffineBox(origin, self.Q[:, list(self.contact)], -f3, f3)
            object.__setattr__(self, "_template", template)
            return template
        return template.with_data(origin, -f3, f3)

    def constraint_rate(self, t: float) -> float:
        qn = float(np.linalg.norm(self.Q, 2))
        return qn * (float(np.linalg.norm(self._load_rate(t))) + float(np.linalg.norm(self._friction_rate(t))))

    # -- the change of variables
    def _convolve(self, kernel, nodes, k, values):
        """Trapezoid ``int_0^{t_k} kernel(t_k - s) values(s) ds`` using nodes 0..k."""
        if k == 0:
            return np.zeros(values.shape[1])
        wts = _trapezoid_weights(nodes[: k + 1]) * kernel(nodes[k] - nodes[: k + 1])
        return wts @ values[: k + 1]

    def forward(self, u: Trajectory) -> np.ndarray:
        """``G(u)`` at the nodes of ``u``."""
        nodes = u.grid.nodes
        out = u.values @ self.P.T
        qb = self.Q @ self.relaxation
        for k in range(1, nodes.size):
            out[k] += qb @ self._convolve(self.profile.phi, nodes, k, u.values)
        return out

    def memory_response(self, u: Trajectory) -> np.ndarray:
        """``R(u)(t) = B(0) u(t) + int_0^t B'(t - s) u(s) ds`` at the nodes."""
        nodes = u.grid.nodes
        out = float(self.profile.phi(0.0)) * (u.values @ self.relaxation.T)
        for k in range(1, nodes.size):
            out[k] += self.relaxation @ self._convolve(self.profile.dphi, nodes, k, u.values)
        return out

    def invert_energy(self, w: Trajectory) -> np.ndarray:
        """``P u`` for ``u = G^{-1}(w)``, solved causally node by node.

        In these coordinates ``G`` reads ``w = v + K int_0^t phi(t-s) v(s) ds``
        with ``K = Q B0 Q``; the implicit trapezoid weight at the current node
        is resolved by fixed-point iteration.
        """
        nodes = w.grid.nodes
        v = np.zeros_like(w.values)
        v[0] = w.values[0]
        phi0 = float(self.profile.phi(0.0))
        kmat = self.K
        for k in range(1, nodes.size):
            wts = _trapezoid_weights(nodes[: k + 1]) * self.profile.phi(nodes[k] - nodes[: k + 1])
            known = wts[:k] @ v[:k]
            c = 0.5 * (nodes[k] - nodes[k - 1]) * phi0
            target = w.values[k] - kmat @ known
            cur = v[k - 1]
            for _ in range(_INVERSION_MAX_ITERS):
                nxt = target - c * (kmat @ cur)
                done = np.linalg.norm(nxt - cur) <= _INVERSION_TOL * (1.0 + np.linalg.norm(nxt))
                cur = nxt
                if done:
                    break
            else:
                raise InversionNonConvergence(f"per-step inversion did not converge at t={nodes[k]}")
            v[k] = cur
        return v

    def invert(self, w: Trajectory) -> Trajectory:
        return Trajectory(w.grid, self.invert_energy(w) @ self.Q.T)

    def history_kappa(self, horizon: float) -> float:
        kn = float(np.linalg.norm(self.K, 2))
        phi_sup = self.profile.phi_sup(horizon)
        dphi_sup = self.profile.dphi_sup(horizon)
        phi0 = abs(float(self.profile.phi(0.0)))
        c = kn * phi_sup
        return (phi0 * kn * kn * phi_sup + kn * dphi_sup) * math.exp(c * horizon)


class ViscoelasticHistory(HistoryOperator):
    """Memory part of ``Q R(G^{-1}(w))`` once the instantaneous ``phi(0) K w`` is split off.

    In energy coordinates ``v = P u`` it equals
    ``phi(0) K (v - w) + K int_0^t phi'(t - s) v(s) ds``.
    """

    def __init__(self, model: ViscoelasticModel, kappa: float):
        self.model = model
        self.dim = model.dim
        self.kappa = float(kappa)

    def evaluate_nodes(self, w):
        m = self.model
        v = m.invert_energy(w)
        phi0 = float(m.profile.phi(0.0))
        out = phi0 * ((v - w.values) @ m.K.T)
        nodes = w.grid.nodes
        for k in range(1, nodes.size):
            out[k] += m.K @ m._convolve(m.profile.dphi, nodes, k, v)
        return out


def rod_model(n: int = 8, stiffness: float = None, memory: float = 0.5,
              profile: Union[str, RelaxationProfile] = "exponential", rate: float = 1.0,
              load_amplitude: float = 1.0, friction_slope: float = 0.5) -> ViscoelasticModel:
    """Rod of ``n`` elements, clamped on the left, loaded and rubbing at the right end.

    ``A`` is ``k * tridiag(-1, 2, -1)`` with the last diagonal entry ``k``;
    ``B0 = memory * A``.  The end load is ``t + 0.5 sin(2 pi t)`` times
    ``load_amplitude`` and the friction bound grows like ``friction_slope * t``.
    """
    if n < 1:
        raise ValueError("n must be positive")
    k = float(n) if stiffness is None else float(stiffness)
    a = k * (2.0 * np.eye(n) - np.eye(n, k=1) - np.eye(n, k=-1))
    a[-1, -1] = k
    if isinstance(profile, str):
        prof = exponential_profile(rate) if profile == "exponential" else PROFILES[profile]()
    else:
        prof = profile
    e = np.zeros(n)
    e[-1] = 1.0
    amp = float(load_amplitude)
    slope = float(friction_slope)
    return ViscoelasticModel(
        a, memory * a, prof,
        load=lambda t: amp * (t + 0.5 * math.sin(2 * math.pi * t)) * e,
        friction=lambda t: np.array([slope * t]),
        contact=(n - 1,),
        load_rate=lambda t: amp * (1.0 + math.pi * math.cos(2 * math.pi * t)) * e,
        friction_rate=lambda t: np.array([slope]),
    )


def scalar_model(profile: Union[str, RelaxationProfile] = "none", load_slope: float = 4.0,
                 stiffness: float = 4.0) -> ViscoelasticModel:
    """One degree of freedom, ``A = stiffness``, ``B0 = 1``, load ``load_slope * t``, no friction."""
    prof = PROFILES[profile]() if isinstance(profile, str) else profile
    s = float(load_slope)
    return ViscoelasticModel(
        np.array([[stiffness]]), np.array([[1.0]]), prof,
        load=lambda t: np.array([s * t]),
        friction=lambda t: np.array([0.0]),
        contact=(0,),
        load_rate=lambda t: np.array([s]),
        friction_rate=lambda t: np.array([0.0]),
    )


def viscoelastic_sets(m: ViscoelasticModel) -> MovingSetDescriptor:
    return MovingSetDescriptor(m.constraint_at(0.0), variation_rate=m.constraint_rate,
                               family=m.constraint_at)


def build_viscoelastic_problem(m: ViscoelasticModel, grid: TimeGrid) -> ProblemSpec:
    """Sweeping process for ``w = G(u)`` starting at ``Q f(0)``."""
    kmat = float(m.profile.phi(0.0)) * m.K
    kn = float(np.linalg.norm(kmat, 2))
    perturbation = PerturbationSpec(lambda t, x: x @ kmat.T, alpha=kn, beta=0.0,
                                    lipschitz=kn, vectorized=True)
    history = ViscoelasticHistory(m, m.history_kappa(grid.horizon))
    x0 = m.Q @ np.asarray(m.load(0.0), float)
    return ProblemSpec(x0, viscoelastic_sets(m), grid.horizon, perturbation=perturbation,
                       history=history)


def recover_displacement(w: Trajectory, m: ViscoelasticModel) -> Trajectory:
    """``u = G^{-1}(w)``; raises when the forward map misses ``w`` by more than 1e-8."""
    u = m.invert(w)
    residual = float(np.max(np.linalg.norm(m.forward(u) - w.values, axis=1)))
    if residual > _ROUND_TRIP_TOL * max(1.0, float(np.max(np.abs(w.values)))):
        raise InversionNonConvergence(f"inversion residual {residual:.3g} exceeds tolerance")
    return u


def inversion_residual(w: Trajectory, u: Trajectory, m: ViscoelasticModel) -> float:
    return float(np.max(np.linalg.norm(m.forward(u) - w.values, axis=1)))


def scenario_viscoelastic(n: int = 8, T: float = 1.0, step: float = 1e-3, profile: str = "exponential",
                          memory: float = 0.5, rate: float = 1.0) -> Scenario:
    """Viscoelastic rod with friction at the loaded end, solved for ``w = G(u)``."""
    m = rod_model(n, memory=memory, profile=profile, rate=rate)
    problem = build_viscoelastic_problem(m, TimeGrid.from_step(T, step))
    hist = problem.history
    return Scenario("viscoelastic", problem, "finest",
                    {"alpha": problem.perturbation.alpha, "beta": 0.0,
                     "kappa_f": problem.perturbation.lipschitz, "kappa_R": hist.kappa,
                     "v_dot": "Q-norm times load and friction rates", "rho": math.inf, "L": 0.0},
                    f"{n}-element viscoelastic rod with '{profile}' relaxation", model=m)


def scenario_viscoelastic_scalar(T: float = 1.0, step: float = 1e-3, profile: str = "none") -> Scenario:
    """Scalar viscoelastic model ``A = 4``, load ``4t``, no friction; ``u(t) = t`` without memory."""
    m = scalar_model(profile)
    problem = build_viscoelastic_problem(m, TimeGrid.from_step(T, step))
    oracle = (lambda t: np.array([2.0 * t])) if profile == "none" else "finest"
    return Scenario("viscoelastic_scalar", problem, oracle,
                    {"alpha": problem.perturbation.alpha, "beta": 0.0,
                     "kappa_f": problem.perturbation.lipschitz, "kappa_R": problem.history.kappa,
                     "v_dot": 2.0, "rho": math.inf, "L": 0.0},
                    "one-degree-of-freedom model with the singleton constraint {Q f(t)}", model=m)


# -- registry ------------------------------------------------------------------

REGISTRY: dict[str, Callable[..., Scenario]] = {
    "play_1d": scenario_play_1d,
    "stationary": scenario_stationary,
    "unconstrained_volterra": scenario_unconstrained_volterra,
    "nonconvex_ring": scenario_nonconvex_ring,
    "tanh_state": scenario_tanh_state,
    "viscoelastic": scenario_viscoelastic,
    "viscoelastic_scalar": scenario_viscoelastic_scalar,
}


def get_scenario(name: str, **params) -> Scenario:
    try:
        factory = REGISTRY[name]
    except KeyError:
        raise KeyError(f"unknown scenario {name!r}; known: {', '.join(sorted(REGISTRY))}") from None
    return factory(**params)


def list_scenarios() -> list[tuple[str, str]]:
    out = []
    for name in sorted(REGISTRY):
        doc = (REGISTRY[name].__doc__ or "").strip().splitlines()
        out.append((name, doc[0].replace("``", "") if doc else ""))
    return out


# -- self-audit ----------------------------------------------------------------

def _history_for_audit(problem: ProblemSpec, grid: TimeGrid, radius: float) -> Optional[HistoryOperator]:
    if problem.kernel is not None:
        return volterra_to_history(problem.kernel, grid, radius, problem.kernel_subsample)
    return problem.history


def _working_radius(problem: ProblemSpec, grid: TimeGrid) -> float:
    # a cheap probe radius: enough to cover the initial state and the sets' probe regions
    center, rad = problem.sets.base.at(0.0).probe_region() if problem.state_dependent else \
        problem.sets.at(0.0).probe_region()
    return max(1.0, float(np.linalg.norm(problem.x0)), float(np.linalg.norm(center)) + rad)


def audit_problem(problem: ProblemSpec, grid: TimeGrid, seed: int = 0, samples: int = 200) -> dict:
    """Sample every declared hypothesis of ``problem`` on ``grid``.

    Returns ``{section: {..., "passed": bool}}``; the overall flag is under
    ``"passed"``.
    """
    rng = np.random.default_rng(seed)
    radius = _working_radius(problem, grid)
    out: dict = {}

    hist = _history_for_audit(problem, grid, radius)
    if hist is not None:
        pairs = random_trajectory_pairs(grid, problem.dim, 3, radius, seed)
        out["history_constant"] = verify_history_constant(hist, pairs).to_dict()
    if problem.kernel is not None:
        ts = rng.uniform(0.0, problem.horizon, size=samples)
        ss = ts * rng.uniform(0.0, 1.0, size=samples)
        xs = rng.uniform(-radius, radius, size=(samples, 2, problem.dim))
        out["kernel_lipschitz"] = kernel_lipschitz_check(
            problem.kernel, radius, [(t, s, x[0], x[1]) for t, s, x in zip(ts, ss, xs)]).to_dict()
        out["kernel_growth"] = kernel_growth_check(
            problem.kernel, [(t, s, x[0]) for t, s, x in zip(ts, ss, xs)]).to_dict()

    f = problem.forcing()
    ts = rng.uniform(0.0, problem.horizon, size=samples)
    xs = rng.uniform(-radius, radius, size=(samples, 2, problem.dim))
    out["perturbation_growth"] = growth_check(f, [(t, x[0]) for t, x in zip(ts, xs)]).to_dict()
    out["perturbation_lipschitz"] = lipschitz_check(
        f, radius, [(t, x[0], x[1]) for t, x in zip(ts, xs)]).to_dict()

    times = [tuple(sorted(p)) for p in rng.uniform(0.0, problem.horizon, size=(20, 2))]
    if problem.state_dependent:
        sets = problem.sets
        base = sets.base
        out["set_modulus"] = modulus_check(base, times, seed=seed).to_dict()
        pts = rng.uniform(-radius, radius, size=(50, problem.dim))
        out["shift_lipschitz"] = shift_lipschitz_check(sets.shift, pts).to_dict()
        quads = [(t, s, rng.uniform(-radius, radius, problem.dim), rng.uniform(-radius, radius, problem.dim))
                 for t, s in times]
        out["state_modulus"] = state_modulus_check(sets, quads, seed=seed).to_dict()
        probe_set = base.at(0.0)
    else:
        out["set_modulus"] = modulus_check(problem.sets, times, seed=seed).to_dict()
        probe_set = problem.sets.at(0.0)

    out["prox_regularity"] = _prox_audit(probe_set, samples, seed)
    init = problem.sets.at(0.0, problem.x0) if problem.state_dependent else problem.sets.at(0.0)
    dist = init.distance(problem.x0)
    out["initial_feasibility"] = {"distance": dist, "passed": dist <= 1e-9}
    out["passed"] = all(v["passed"] for v in out.values() if isinstance(v, dict))
    return out


def _prox_audit(set_, samples: int, seed: int) -> dict:
    pairs = boundary_normals(set_, min(samples, 100), seed)
    hypo = hypomonotonicity_check(set_, pairs)
    rng = np.random.default_rng(seed + 1)
    probes = set_.sample(rng, 50)
    checks = [proximal_normal_inequality_check(set_, x, z, probes) for x, z in pairs[:20]]
    prox = max(c.max_violation for c in checks)
    return {"hypomonotonicity": hypo.to_dict(), "proximal_normal_max_violation": prox,
            "passed": hypo.passed and all(c.passed for c in checks)}


def audit_scenario(s: Scenario, cfg: SolverConfig) -> dict:
    return audit_problem(s.problem, cfg.grid(s.horizon))

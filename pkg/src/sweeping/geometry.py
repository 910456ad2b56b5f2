"""Closed (uniformly prox-regular) sets with exact projection oracles.

Every primitive is an immutable dataclass exposing ``project``, ``distance``,
``contains`` and a proximal-normal generator.  Convex primitives carry
``prox_constant = inf``; the two nonconvex ones (sphere, union of two
separated balls) carry their standard finite constant.

Moving and state-dependent sets wrap a base primitive with a translation
path, an optional scaling path and a variation modulus ``v``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate, linalg, optimize

from .errors import (
    AmbiguousProjection,
    NonConvergence,
    NormalGenerationFailure,
    OutsideProxNeighborhood,
)

DEFAULT_TOL = 1e-10
_DYKSTRA_TOL = 1e-12
_DYKSTRA_MAX_SWEEPS = 10_000


def _vec(x) -> np.ndarray:
    a = np.array(x, dtype=float).reshape(-1)
    if not np.all(np.isfinite(a)):
        raise ValueError(f"vector has non-finite entries: {a}")
    a.flags.writeable = False
    return a


def _set(obj, name, value):
    object.__setattr__(obj, name, value)


def _trusted(cls, **fields):
    """Build an instance from already-validated fields, skipping ``__post_init__``.

    Used by ``translate`` on hot paths, where the inputs are a valid set
    shifted by a finite vector.
    """
    obj = object.__new__(cls)
    for name, value in fields.items():
        if isinstance(value, np.ndarray):
            value = np.asarray(value, dtype=float)
            value.flags.writeable = False
        object.__setattr__(obj, name, value)
    return obj


def _shift_vec(shift) -> np.ndarray:
    a = np.asarray(shift, dtype=float).reshape(-1)
    if not np.all(np.isfinite(a)):
        raise ValueError(f"shift has non-finite entries: {a}")
    return a


class SetDescriptor:
    """Common surface of all primitives.

    Subclasses implement ``project``, ``distance``, ``on_boundary``,
    ``normal``, ``translate`` and ``to_dict``.
    """

    tol: float

    @property
    def prox_constant(self) -> float:
        return math.inf

    @property
    def convex(self) -> bool:
        return math.isinf(self.prox_constant)

    @property
    def dim(self) -> int:
        raise NotImplementedError

    def contains(self, p) -> bool:
        return self.distance(p) <= self.tol

    def scale(self, factor: float) -> "SetDescriptor":
        raise NotImplementedError(f"{type(self).__name__} does not support scaling")

    def extent(self) -> float:
        """Hausdorff growth per unit of scale factor (0 if unscalable)."""
        return 0.0

    def probe_region(self) -> tuple[np.ndarray, float]:
        """A (center, radius) ball that covers the interesting part of the set."""
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Points of the set (not necessarily uniform)."""
        center, radius = self.probe_region()
        pts = center + radius * rng.uniform(-1.0, 1.0, size=(n, self.dim))
        out = []
        for p in pts:
            out.append(self._member_near(p, rng))
        return np.array(out)

    def _member_near(self, p, rng):
        return self.project(p)


def _check_prox(set_: SetDescriptor, d: float) -> None:
    if d >= set_.prox_constant:
        raise OutsideProxNeighborhood(
            f"distance {d:.6g} is not below prox constant {set_.prox_constant:.6g}"
        )


@dataclass(frozen=True, eq=False)
class Ball(SetDescriptor):
    center: np.ndarray
    radius: float
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        _set(self, "center", _vec(self.center))
        if not self.radius > 0:
            raise ValueError("ball radius must be positive")

    @property
    def dim(self):
        return self.center.size

    def project(self, p):
        p = np.asarray(p, dtype=float)
        diff = p - self.center
        n = np.linalg.norm(diff)
        if n <= self.radius:
            return p.copy()
        return self.center + (self.radius / n) * diff

    def distance(self, p):
        return max(0.0, float(np.linalg.norm(np.asarray(p, float) - self.center)) - self.radius)

    def on_boundary(self, x):
        return abs(np.linalg.norm(np.asarray(x, float) - self.center) - self.radius) <= self.tol

    def normal(self, x):
        if not self.on_boundary(x):
            raise NormalGenerationFailure(f"{x} is not on the ball boundary")
        return (np.asarray(x, float) - self.center) / self.radius

    def translate(self, shift):
        return _trusted(Ball, center=self.center + _shift_vec(shift), radius=self.radius, tol=self.tol)

    def scale(self, factor):
        return Ball(self.center, self.radius * factor, self.tol)

    def extent(self):
        return self.radius

    def probe_region(self):
        return self.center, 2.0 * self.radius

    def to_dict(self):
        return {"type": "ball", "center": self.center.tolist(), "radius": self.radius}


@dataclass(frozen=True, eq=False)
class Box(SetDescriptor):
    lower: np.ndarray
    upper: np.ndarray
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        _set(self, "lower", _vec(self.lower))
        _set(self, "upper", _vec(self.upper))
        if self.lower.shape != self.upper.shape:
            raise ValueError("box bounds differ in dimension")
        if np.any(self.lower > self.upper):
            raise ValueError("box requires lower <= upper componentwise")

    @property
    def dim(self):
        return self.lower.size

    def project(self, p):
        return np.clip(np.asarray(p, dtype=float), self.lower, self.upper)

    def distance(self, p):
        p = np.asarray(p, dtype=float)
        return float(np.linalg.norm(p - self.project(p)))

    def _active(self, x):
        x = np.asarray(x, float)
        lo = np.abs(x - self.lower) <= self.tol
        hi = np.abs(x - self.upper) <= self.tol
        return lo, hi

    def on_boundary(self, x):
        if not self.contains(x):
            return False
        lo, hi = self._active(x)
        return bool(np.any(lo | hi))

    def normal(self, x):
        if not self.on_boundary(x):
            raise NormalGenerationFailure(f"{x} is not on the box boundary")
        lo, hi = self._active(x)
        z = hi.astype(float) - lo.astype(float)
        # degenerate coordinates (lower == upper) are both; pick +1
        z[lo & hi] = 1.0
        return z / np.linalg.norm(z)

    def translate(self, shift):
        d = _shift_vec(shift)
        return _trusted(Box, lower=self.lower + d, upper=self.upper + d, tol=self.tol)

    def scale(self, factor):
        mid = 0.5 * (self.lower + self.upper)
        half = 0.5 * (self.upper - self.lower) * factor
        return Box(mid - half, mid + half, self.tol)

    def extent(self):
        return float(np.linalg.norm(0.5 * (self.upper - self.lower)))

    def probe_region(self):
        mid = 0.5 * (self.lower + self.upper)
        return mid, max(1.0, 2.0 * float(np.max(self.upper - self.lower)))

    def to_dict(self):
        return {"type": "box", "lower": self.lower.tolist(), "upper": self.upper.tolist()}


@dataclass(frozen=True, eq=False)
class HalfSpace(SetDescriptor):
    """``{x : <normal, x> <= offset}``."""

    normal_vector: np.ndarray
    offset: float
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        _set(self, "normal_vector", _vec(self.normal_vector))
        if not np.any(self.normal_vector):
            raise ValueError("half-space normal must be nonzero")

    @property
    def dim(self):
        return self.normal_vector.size

    def _excess(self, p):
        n = self.normal_vector
        return (float(n @ p) - self.offset) / float(n @ n)

    def project(self, p):
        p = np.asarray(p, dtype=float)
        s = self._excess(p)
        if s <= 0.0:
            return p.copy()
        return p - s * self.normal_vector

    def distance(self, p):
        p = np.asarray(p, dtype=float)
        return max(0.0, self._excess(p)) * float(np.linalg.norm(self.normal_vector))

    def on_boundary(self, x):
        x = np.asarray(x, float)
        return abs(self._excess(x)) * float(np.linalg.norm(self.normal_vector)) <= self.tol

    def normal(self, x):
        if not self.on_boundary(x):
            raise NormalGenerationFailure(f"{x} is not on the half-space boundary")
        return self.normal_vector / np.linalg.norm(self.normal_vector)

    def translate(self, shift):
        return HalfSpace(self.normal_vector, self.offset + float(self.normal_vector @ shift), self.tol)

    def probe_region(self):
        n = self.normal_vector
        return n * (self.offset / float(n @ n)), 4.0

    def to_dict(self):
        return {"type": "half_space", "normal": self.normal_vector.tolist(), "offset": self.offset}


@dataclass(frozen=True, eq=False)
class Hyperplane(SetDescriptor):
    """``{x : <normal, x> = offset}``."""

    normal_vector: np.ndarray
    offset: float
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        _set(self, "normal_vector", _vec(self.normal_vector))
        if not np.any(self.normal_vector):
            raise ValueError("hyperplane normal must be nonzero")

    @property
    def dim(self):
        return self.normal_vector.size

    def project(self, p):
        p = np.asarray(p, dtype=float)
        n = self.normal_vector
        return p - ((float(n @ p) - self.offset) / float(n @ n)) * n

    def distance(self, p):
        n = self.normal_vector
        return abs(float(n @ np.asarray(p, float)) - self.offset) / float(np.linalg.norm(n))

    def on_boundary(self, x):
        return self.contains(x)

    def normal(self, x):
        if not self.on_boundary(x):
            raise NormalGenerationFailure(f"{x} is not on the hyperplane")
        return self.normal_vector / np.linalg.norm(self.normal_vector)

    def translate(self, shift):
        return Hyperplane(self.normal_vector, self.offset + float(self.normal_vector @ shift), self.tol)

    def probe_region(self):
        n = self.normal_vector
        return n * (self.offset / float(n @ n)), 4.0

    def to_dict(self):
        return {"type": "hyperplane", "normal": self.normal_vector.tolist(), "offset": self.offset}


@dataclass(frozen=True, eq=False)
class Singleton(SetDescriptor):
    point: np.ndarray
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        _set(self, "point", _vec(self.point))

    @property
    def dim(self):
        return self.point.size

    def project(self, p):
        return self.point.copy()

    def distance(self, p):
        return float(np.linalg.norm(np.asarray(p, float) - self.point))

    def on_boundary(self, x):
        return self.contains(x)

    def normal(self, x):
        # the normal cone is the whole space; any unit vector qualifies
        if not self.on_boundary(x):
            raise NormalGenerationFailure(f"{x} is not the singleton point")
        e = np.zeros(self.dim)
        e[0] = 1.0
        return e

    def translate(self, shift):
        return Singleton(self.point + shift, self.tol)

    def probe_region(self):
        return self.point, 1.0

    def to_dict(self):
        return {"type": "singleton", "point": self.point.tolist()}


@dataclass(frozen=True, eq=False)
class Sphere(SetDescriptor):
    """The boundary of a ball; prox-regular with constant ``radius``."""

    center: np.ndarray
    radius: float
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        _set(self, "center", _vec(self.center))
        if not self.radius > 0:
            raise ValueError("sphere radius must be positive")

    @property
    def prox_constant(self):
        return self.radius

    @property
    def dim(self):
        return self.center.size

    def project(self, p):
        p = np.asarray(p, dtype=float)
        diff = p - self.center
        n = float(np.linalg.norm(diff))
        if n <= self.tol:
            raise AmbiguousProjection("every point of the sphere is nearest to its center")
        _check_prox(self, abs(n - self.radius))
        return self.center + (self.radius / n) * diff

    def distance(self, p):
        return abs(float(np.linalg.norm(np.asarray(p, float) - self.center)) - self.radius)

    def on_boundary(self, x):
        return self.contains(x)

    def normal(self, x):
        """Outward unit normal; its negative is an equally valid proximal normal."""
        if not self.on_boundary(x):
            raise NormalGenerationFailure(f"{x} is not on the sphere")
        return (np.asarray(x, float) - self.center) / self.radius

    def translate(self, shift):
        return _trusted(Sphere, center=self.center + _shift_vec(shift), radius=self.radius, tol=self.tol)

    def scale(self, factor):
        return Sphere(self.center, self.radius * factor, self.tol)

    def extent(self):
        return self.radius

    def probe_region(self):
        return self.center, 2.0 * self.radius

    def sample(self, rng, n):
        u = rng.normal(size=(n, self.dim))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        return self.center + self.radius * u

    def to_dict(self):
        return {"type": "sphere", "center": self.center.tolist(), "radius": self.radius}


@dataclass(frozen=True, eq=False)
class TwoBallUnion(SetDescriptor):
    """Union of two balls with disjoint closures; prox constant is half the gap."""

    first: Ball
    second: Ball
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        if self.first.dim != self.second.dim:
            raise ValueError("balls differ in dimension")
        if self.gap <= 0:
            raise ValueError("union-of-two-balls requires disjoint closures")

    @property
    def gap(self) -> float:
        d = float(np.linalg.norm(self.first.center - self.second.center))
        return d - self.first.radius - self.second.radius

    @property
    def prox_constant(self):
        return 0.5 * self.gap

    @property
    def dim(self):
        return self.first.dim

    def project(self, p):
        d1 = self.first.distance(p)
        d2 = self.second.distance(p)
        if abs(d1 - d2) <= self.tol:
            raise AmbiguousProjection("point is equidistant from both balls")
        _check_prox(self, min(d1, d2))
        return self.first.project(p) if d1 < d2 else self.second.project(p)

    def distance(self, p):
        return min(self.first.distance(p), self.second.distance(p))

    def on_boundary(self, x):
        return self.first.on_boundary(x) or self.second.on_boundary(x)

    def normal(self, x):
        if self.first.on_boundary(x):
            return self.first.normal(x)
        if self.second.on_boundary(x):
            return self.second.normal(x)
        raise NormalGenerationFailure(f"{x} is not on the boundary of either ball")

    def translate(self, shift):
        return TwoBallUnion(self.first.translate(shift), self.second.translate(shift), self.tol)

    def probe_region(self):
        mid = 0.5 * (self.first.center + self.second.center)
        half = 0.5 * float(np.linalg.norm(self.first.center - self.second.center))
        return mid, half + 2.0 * max(self.first.radius, self.second.radius)

    def _member_near(self, p, rng):
        ball = self.first if rng.random() < 0.5 else self.second
        return ball.project(p)

    def to_dict(self):
        return {"type": "two_ball_union", "first": self.first.to_dict(), "second": self.second.to_dict()}


@dataclass(frozen=True, eq=False)
class Polyhedron(SetDescriptor):
    """Finite intersection of half-spaces ``normals @ x <= offsets``.

    Projection runs Dykstra's cyclic algorithm to a sweep-to-sweep change of
    1e-12 (at most 10**4 sweeps).
    """

    normals: np.ndarray
    offsets: np.ndarray
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        a = np.array(self.normals, dtype=float)
        if a.ndim != 2:
            raise ValueError("normals must be a 2-D array")
        if np.any(np.linalg.norm(a, axis=1) == 0):
            raise ValueError("half-space normals must be nonzero")
        b = np.array(self.offsets, dtype=float).reshape(-1)
        if b.size != a.shape[0]:
            raise ValueError("one offset per normal required")
        a.flags.writeable = False
        b.flags.writeable = False
        _set(self, "normals", a)
        _set(self, "offsets", b)

    @property
    def dim(self):
        return self.normals.shape[1]

    def _violations(self, p):
        return self.normals @ p - self.offsets

    def project(self, p):
        x = np.array(p, dtype=float)
        if np.all(self._violations(x) <= 0.0):
            return x
        a, b = self.normals, self.offsets
        sq = np.einsum("ij,ij->i", a, a)
        incr = np.zeros_like(a)
        for _ in range(_DYKSTRA_MAX_SWEEPS):
            prev = x.copy()
            for i in range(a.shape[0]):
                y = x + incr[i]
                s = (a[i] @ y - b[i]) / sq[i]
                x = y - s * a[i] if s > 0 else y
                incr[i] = y - x
            if np.linalg.norm(x - prev) <= _DYKSTRA_TOL:
                scale = 1.0 + float(np.max(np.abs(b)))
                if np.max(self._violations(x) / np.sqrt(sq)) > 1e-9 * scale:
                    raise NonConvergence("Dykstra iterates stalled outside the polyhedron (empty intersection?)")
                return x
        raise NonConvergence("Dykstra projection did not converge in 10^4 sweeps")

    def distance(self, p):
        p = np.asarray(p, dtype=float)
        return float(np.linalg.norm(p - self.project(p)))

    def _active(self, x):
        norms = np.linalg.norm(self.normals, axis=1)
        return np.abs(self._violations(np.asarray(x, float))) / norms <= self.tol

    def on_boundary(self, x):
        return self.contains(x) and bool(np.any(self._active(x)))

    def normal(self, x):
        if not self.on_boundary(x):
            raise NormalGenerationFailure(f"{x} is not on the polyhedron boundary")
        act = self._active(x)
        units = self.normals[act] / np.linalg.norm(self.normals[act], axis=1, keepdims=True)
        z = units.sum(axis=0)
        return z / np.linalg.norm(z)

    def translate(self, shift):
        return Polyhedron(self.normals, self.offsets + self.normals @ shift, self.tol)

    def probe_region(self):
        # least-norm point of the active system is a reasonable anchor
        anchor = self.project(np.zeros(self.dim))
        return anchor, 4.0

    def to_dict(self):
        return {"type": "polyhedron", "normals": self.normals.tolist(), "offsets": self.offsets.tolist()}


@dataclass(frozen=True, eq=False)
class AffineBox(SetDescriptor):
    """Image ``{origin + G z : lower <= z <= upper}`` of a box under a full-column-rank map.

    Coordinates with ``lower == upper`` are folded into the origin; the rest
    are solved as a bounded least-squares problem.
    """

    origin: np.ndarray
    generators: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        _set(self, "origin", _vec(self.origin))
        g = np.array(self.generators, dtype=float).reshape(self.origin.size, -1)
        g.flags.writeable = False
        _set(self, "generators", g)
        _set(self, "lower", _vec(self.lower))
        _set(self, "upper", _vec(self.upper))
        if np.any(self.lower > self.upper):
            raise ValueError("affine box requires lower <= upper")
        if np.linalg.matrix_rank(g) < g.shape[1]:
            raise ValueError("generators must have full column rank")

    @property
    def dim(self):
        return self.origin.size

    def _split(self):
        free = self.upper > self.lower
        base = self.origin + self.generators[:, ~free] @ self.lower[~free]
        return free, base

    def coefficients(self, p) -> np.ndarray:
        """Box coordinates ``z`` of the projection of ``p``."""
        p = np.asarray(p, dtype=float)
        free, base = self._split()
        z = self.lower.copy()
        if not np.any(free):
            return z
        g = self.generators[:, free]
        rhs = p - base
        if g.shape[1] == 1:
            col = g[:, 0]
            val = float(col @ rhs) / float(col @ col)
            z[free] = np.clip(val, self.lower[free], self.upper[free])
        else:
            res = optimize.lsq_linear(g, rhs, bounds=(self.lower[free], self.upper[free]),
                                      method="bvls", tol=1e-14)
            z[free] = res.x
        return z

    def project(self, p):
        return self.origin + self.generators @ self.coefficients(p)

    def distance(self, p):
        p = np.asarray(p, dtype=float)
        return float(np.linalg.norm(p - self.project(p)))

    def on_boundary(self, x):
        if not self.contains(x):
            return False
        n, m = self.generators.shape
        if m < n:
            return True
        z = self.coefficients(x)
        return bool(np.any((np.abs(z - self.lower) <= self.tol) | (np.abs(z - self.upper) <= self.tol)))

    def normal(self, x):
        if not self.on_boundary(x):
            raise NormalGenerationFailure(f"{x} is not on the affine box boundary")
        n, m = self.generators.shape
        if m < n:
            null = linalg.null_space(self.generators.T)
            return null[:, 0] / np.linalg.norm(null[:, 0])
        z = self.coefficients(x)
        inv = np.linalg.inv(self.generators)
        i = int(np.argmin(np.minimum(np.abs(z - self.lower), np.abs(z - self.upper))))
        sign = 1.0 if abs(z[i] - self.upper[i]) <= abs(z[i] - self.lower[i]) else -1.0
        row = sign * inv[i]
        return row / np.linalg.norm(row)

    def translate(self, shift):
        return _trusted(AffineBox, origin=self.origin + _shift_vec(shift), generators=self.generators,
                        lower=self.lower, upper=self.upper, tol=self.tol)

    def with_data(self, origin, lower, upper) -> "AffineBox":
        """Same generators, new origin and bounds (generators are not re-checked)."""
        origin = _vec(origin)
        lower, upper = _vec(lower), _vec(upper)
        if origin.shape != self.origin.shape or lower.shape != self.lower.shape or upper.shape != self.upper.shape:
            raise ValueError("affine box data do not match the generators")
        if np.any(lower > upper):
            raise ValueError("affine box requires lower <= upper")
        return _trusted(AffineBox, origin=origin, generators=self.generators,
                        lower=lower, upper=upper, tol=self.tol)

    def probe_region(self):
        mid = self.origin + self.generators @ (0.5 * (self.lower + self.upper))
        spread = float(np.linalg.norm(self.generators @ (0.5 * (self.upper - self.lower))))
        return mid, max(1.0, 2.0 * spread)

    def to_dict(self):
        return {
            "type": "affine_box",
            "origin": self.origin.tolist(),
            "generators": self.generators.tolist(),
            "lower": self.lower.tolist(),
            "upper": self.upper.tolist(),
        }


def set_from_dict(d: dict) -> SetDescriptor:
    kind = d.get("type")
    tol = float(d.get("tol", DEFAULT_TOL))
    if kind == "ball":
        return Ball(d["center"], float(d["radius"]), tol)
    if kind == "box":
        return Box(d["lower"], d["upper"], tol)
    if kind == "half_space":
        return HalfSpace(d["normal"], float(d["offset"]), tol)
    if kind == "hyperplane":
        return Hyperplane(d["normal"], float(d["offset"]), tol)
    if kind == "singleton":
        return Singleton(d["point"], tol)
    if kind == "sphere":
        return Sphere(d["center"], float(d["radius"]), tol)
    if kind == "two_ball_union":
        return TwoBallUnion(set_from_dict(d["first"]), set_from_dict(d["second"]), tol)
    if kind == "polyhedron":
        return Polyhedron(d["normals"], d["offsets"], tol)
    if kind == "affine_box":
        return AffineBox(d["origin"], d["generators"], d["lower"], d["upper"], tol)
    raise ValueError(f"unknown set type {kind!r}")


# -- free-function surface ---------------------------------------------------

def project(set_: SetDescriptor, p) -> np.ndarray:
    return set_.project(p)


def distance(set_: SetDescriptor, p) -> float:
    return set_.distance(p)


def hausdorff_estimate(a: SetDescriptor, b: SetDescriptor, probes) -> float:
    """Max of ``|d_A(x) - d_B(x)|`` over probe points; a lower bound on Haus(A, B)."""
    probes = np.atleast_2d(np.asarray(probes, dtype=float))
    return max(abs(a.distance(x) - b.distance(x)) for x in probes)


def excess_estimate(a_points, b: SetDescriptor) -> float:
    """``exc(A; B)`` approximated by ``max d_B`` over points sampled from A."""
    return max(b.distance(x) for x in np.atleast_2d(np.asarray(a_points, dtype=float)))


def default_probes(a: SetDescriptor, b: SetDescriptor, n: int = 200, seed: int = 0) -> np.ndarray:
    """Random probes in a region covering both sets, plus points on both sets."""
    rng = np.random.default_rng(seed)
    ca, ra = a.probe_region()
    cb, rb = b.probe_region()
    mid = 0.5 * (ca + cb)
    rad = 0.5 * float(np.linalg.norm(ca - cb)) + max(ra, rb)
    cloud = mid + rad * rng.uniform(-1.0, 1.0, size=(n, a.dim))
    return np.vstack([cloud, ca, cb, a.sample(rng, n // 4 + 1), b.sample(rng, n // 4 + 1)])


def boundary_normals(set_: SetDescriptor, n: int, seed: int = 0,
                     max_draws: int = 100_000) -> list[tuple[np.ndarray, np.ndarray]]:
    """Generate ``n`` pairs ``(x, zeta)`` with ``x`` on the boundary and
    ``zeta`` a proximal normal at ``x`` of norm at most one.

    Each pair comes from projecting a random exterior point ``p`` and taking
    ``zeta = s * (p - x) / |p - x|`` with a random scale ``s`` in (0, 1].
    For nonconvex sets ``p`` is kept inside the prox neighborhood.
    """
    rng = np.random.default_rng(seed)
    center, radius = set_.probe_region()
    reach = min(radius, 0.9 * set_.prox_constant)
    pairs: list[tuple[np.ndarray, np.ndarray]] = []
    draws = 0
    while len(pairs) < n:
        draws += 1
        if draws > max_draws:
            raise NormalGenerationFailure("could not generate enough boundary normals")
        anchor = set_.sample(rng, 1)[0]
        p = anchor + reach * rng.uniform(-1.0, 1.0, size=set_.dim)
        d = set_.distance(p)
        if d <= 10 * set_.tol or d >= 0.9 * set_.prox_constant:
            continue
        try:
            x = set_.project(p)
        except AmbiguousProjection:
            continue
        zeta = (p - x) / np.linalg.norm(p - x)
        pairs.append((x, rng.uniform(0.05, 1.0) * zeta))
    return pairs


@dataclass
class CheckReport:
    max_violation: float
    samples: int
    tol: float

    @property
    def passed(self) -> bool:
        return self.max_violation <= self.tol

    def to_dict(self):
        return {"max_violation": self.max_violation, "samples": self.samples,
                "tol": self.tol, "passed": self.passed}


def _inv_rho(set_: SetDescriptor) -> float:
    rho = set_.prox_constant
    return 0.0 if math.isinf(rho) else 1.0 / rho


def _magnitude(linear: float, quadratic: float, set_: SetDescriptor) -> float:
    # tolerances are relative to the size of the compared terms (never below 1)
    return max(1.0, float(linear) + _inv_rho(set_) * float(quadratic))


def hypomonotonicity_check(set_: SetDescriptor, samples: Sequence, tol: float = 1e-12) -> CheckReport:
    """Max over distinct sample pairs of ``-<z1 - z2, x1 - x2> - |x1 - x2|^2 / rho``.

    ``samples`` holds boundary points or ``(x, zeta)`` pairs; a bare point
    gets its normal from ``set_.normal``.  Points off the boundary raise
    :class:`NormalGenerationFailure`.
    """
    xs, zs = [], []
    for item in samples:
        if isinstance(item, tuple):
            x, z = (np.asarray(v, dtype=float) for v in item)
            if not set_.on_boundary(x):
                raise NormalGenerationFailure(f"{x} is not on the boundary")
        else:
            x = np.asarray(item, dtype=float)
            z = set_.normal(x)
        xs.append(x)
        zs.append(z)
    x = np.array(xs)
    z = np.array(zs)
    dx = x[:, None, :] - x[None, :, :]
    dz = z[:, None, :] - z[None, :, :]
    inner = np.einsum("ijk,ijk->ij", dz, dx)
    sq = np.einsum("ijk,ijk->ij", dx, dx)
    viol = -inner - _inv_rho(set_) * sq
    off = ~np.eye(len(xs), dtype=bool)
    if not off.any():
        return CheckReport(0.0, len(xs), tol)
    dxn, dzn = np.sqrt(sq.max()), float(np.sqrt(np.einsum("ijk,ijk->ij", dz, dz).max()))
    return CheckReport(float(viol[off].max()), len(xs), tol * _magnitude(dxn * dzn, sq.max(), set_))


def proximal_normal_inequality_check(set_: SetDescriptor, x, zeta, probes, tol: float = 1e-12) -> CheckReport:
    """Max over probes of ``<zeta, x' - x> - |zeta| |x' - x|^2 / (2 rho)``.

    ``tol`` is scaled by the magnitude of the two terms so that round-off on
    distant probes does not count as a violation.
    """
    x = np.asarray(x, dtype=float)
    zeta = np.asarray(zeta, dtype=float)
    probes = np.atleast_2d(np.asarray(probes, dtype=float))
    dx = probes - x
    sq = np.einsum("ij,ij->i", dx, dx)
    zn = float(np.linalg.norm(zeta))
    viol = dx @ zeta - 0.5 * _inv_rho(set_) * zn * sq
    scale = _magnitude(zn * math.sqrt(sq.max()), 0.5 * zn * sq.max(), set_)
    return CheckReport(float(viol.max()), len(probes), tol * scale)


def projection_lipschitz_check(set_: SetDescriptor, pairs, gamma: float = 0.5,
                               tol: float = 1e-9) -> CheckReport:
    """Max of ``|P(p) - P(q)| - |p - q| / (1 - gamma)`` over pairs in the gamma-neighborhood."""
    worst = -math.inf
    for p, q in pairs:
        lhs = np.linalg.norm(set_.project(p) - set_.project(q))
        worst = max(worst, lhs - np.linalg.norm(np.asarray(p) - np.asarray(q)) / (1.0 - gamma))
    return CheckReport(float(worst), len(pairs), tol)


# -- moving and state-dependent sets ------------------------------------------

_FD_STEP = 1e-6


def _derivative(fn: Callable[[float], np.ndarray], t: float) -> np.ndarray:
    lo = max(t - _FD_STEP, 0.0)
    hi = t + _FD_STEP
    return (np.asarray(fn(hi), float) - np.asarray(fn(lo), float)) / (hi - lo)


@dataclass(frozen=True, eq=False)
class MovingSetDescriptor:
    """``C(t) = scale(t) * (base - center) + center + translation(t)``.

    ``variation`` / ``variation_rate`` override the default modulus, which is
    the arc length of the translation plus the scale variation times the
    base's extent.  A ``family`` callable ``t -> SetDescriptor`` replaces the
    translate-and-scale construction entirely; it then needs an explicit
    ``variation_rate`` (or ``variation``).
    """

    base: SetDescriptor
    translation: Optional[Callable[[float], np.ndarray]] = None
    scale: Optional[Callable[[float], float]] = None
    variation: Optional[Callable[[float], float]] = None
    variation_rate: Optional[Callable[[float], float]] = None
    family: Optional[Callable[[float], SetDescriptor]] = None

    def __post_init__(self):
        if self.family is not None and self.variation is None and self.variation_rate is None:
            raise ValueError("a set family needs an explicit variation modulus")

    @property
    def prox_constant(self) -> float:
        return self.base.prox_constant

    @property
    def dim(self) -> int:
        return self.base.dim

    def at(self, t: float) -> SetDescriptor:
        if self.family is not None:
            return self.family(t)
        s = self.base
        if self.scale is not None:
            s = s.scale(float(self.scale(t)))
        if self.translation is not None:
            s = s.translate(np.asarray(self.translation(t), dtype=float))
        return s

    def prox_at(self, t: float) -> float:
        return self.at(t).prox_constant

    def v_dot(self, t: float) -> float:
        if self.variation_rate is not None:
            return float(self.variation_rate(t))
        rate = 0.0
        if self.translation is not None:
            rate += float(np.linalg.norm(_derivative(self.translation, t)))
        if self.scale is not None:
            rate += abs(float(_derivative(self.scale, t))) * self.base.extent()
        return rate

    def v(self, t: float) -> float:
        if self.variation is not None:
            return float(self.variation(t))
        if self.variation_rate is None and self.translation is None and self.scale is None:
            return 0.0
        return integrate.quad(self.v_dot, 0.0, t, limit=200)[0]

    def variation_between(self, t0: float, t1: float) -> float:
        """``|v(t1) - v(t0)|`` without integrating from 0 each time."""
        if self.variation is not None:
            return abs(float(self.variation(t1)) - float(self.variation(t0)))
        if self.variation_rate is None and self.translation is None and self.scale is None:
            return 0.0
        return abs(integrate.quad(self.v_dot, t0, t1, limit=50)[0])


def moving_set_at(m: MovingSetDescriptor, t: float) -> SetDescriptor:
    return m.at(t)


def static(base: SetDescriptor) -> MovingSetDescriptor:
    return MovingSetDescriptor(base, variation=lambda t: 0.0, variation_rate=lambda t: 0.0)


def modulus_check(m: MovingSetDescriptor, times: Sequence[tuple[float, float]],
                  n_probes: int = 100, seed: int = 0, tol: float = 1e-9) -> CheckReport:
    """Sampled check of ``Haus(C(t), C(s)) <= |v(t) - v(s)|``."""
    worst = -math.inf
    for i, (t, s) in enumerate(times):
        a, b = m.at(t), m.at(s)
        h = hausdorff_estimate(a, b, default_probes(a, b, n_probes, seed + i))
        worst = max(worst, h - abs(m.v(t) - m.v(s)))
    return CheckReport(float(worst), len(times), tol)


@dataclass(frozen=True, eq=False)
class StateDependentSetDescriptor:
    """``C(t, x) = gain * shift(x) + C(t)`` with ``shift`` 1-Lipschitz and ``gain < 1``."""

    base: MovingSetDescriptor
    shift: Callable[[np.ndarray], np.ndarray]
    gain: float

    def __post_init__(self):
        from .errors import InvalidGain

        if not 0.0 <= self.gain < 1.0:
            raise InvalidGain(f"state gain must be < 1 (got {self.gain})")

    @property
    def prox_constant(self) -> float:
        return self.base.prox_constant

    @property
    def dim(self) -> int:
        return self.base.dim

    def at(self, t: float, x) -> SetDescriptor:
        return self.base.at(t).translate(self.gain * np.asarray(self.shift(np.asarray(x, float)), float))

    def frozen(self, y) -> MovingSetDescriptor:
        """The moving set ``t -> C(t, y(t))`` for a trajectory ``y``.

        With zero gain the base descriptor itself is returned, so results are
        bit-identical to the state-independent problem.
        """
        if self.gain == 0.0:
            return self.base
        base = self.base
        gain = self.gain
        shift = self.shift

        def family(t):
            return base.at(t).translate(gain * np.asarray(shift(y(t)), float))

        def rate(t):
            return base.v_dot(t) + gain * float(np.linalg.norm(y.derivative(t)))

        return MovingSetDescriptor(base.base, variation_rate=rate, family=family)


def shift_lipschitz_check(shift: Callable, points, tol: float = 1e-12) -> CheckReport:
    """Max of ``|shift(x) - shift(y)| - |x - y|`` over all pairs of ``points``."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    vals = np.array([np.atleast_1d(shift(p)) for p in pts], dtype=float)
    dv = np.linalg.norm(vals[:, None] - vals[None, :], axis=-1)
    dp = np.linalg.norm(pts[:, None] - pts[None, :], axis=-1)
    return CheckReport(float((dv - dp).max()), len(pts), tol)


def state_modulus_check(c: StateDependentSetDescriptor, samples, n_probes: int = 100,
                        seed: int = 0, tol: float = 1e-9) -> CheckReport:
    """Sampled ``Haus(C(t,x), C(s,y)) <= |v(t)-v(s)| + L |x-y|`` over ``(t, s, x, y)``."""
    worst = -math.inf
    for i, (t, s, x, y) in enumerate(samples):
        a, b = c.at(t, x), c.at(s, y)
        h = hausdorff_estimate(a, b, default_probes(a, b, n_probes, seed + i))
        bound = abs(c.base.v(t) - c.base.v(s)) + c.gain * float(np.linalg.norm(np.subtract(x, y)))
        worst = max(worst, h - bound)
    return CheckReport(float(worst), len(samples), tol)

"""Closed-form geometry on the three supported manifolds.

Everything here is exact-formula work: the euclidean space R^n, the unit
sphere S^n embedded in R^(n+1), and the upper hyperboloid sheet H^n in
R^(n+1) carrying the Lorentz form <x,y> = -x0*y0 + sum_i xi*yi.  No
connection or transport machinery; exp, log, dist, and orthonormal
tangent bases are all the downstream modules need.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BasePointMismatch,
    BeyondInjectivityRadius,
    InvalidPoint,
    InvalidTangent,
    ManifoldMismatch,
)

# Sentinel for "no finite convexity radius" (euclidean and hyperboloid).
FLAT_RADIUS_SENTINEL = 1e18

# Embedding invariant tolerance for points and tangency tolerance for vectors.
POINT_TOL = 1e-12
TANGENT_TOL = 1e-10

# Sphere log is refused this close to the cut locus.
SPHERE_LOG_GUARD = 1e-9

# Gram-Schmidt candidates below this norm are discarded as degenerate.
BASIS_SKIP_TOL = 1e-8


class Kind(enum.Enum):
    EUCLIDEAN = "euclidean"
    SPHERE = "sphere"
    HYPERBOLOID = "hyperboloid"


@dataclass(frozen=True)
class ManifoldSpec:
    """Which manifold, and its intrinsic dimension."""

    kind: Kind
    dim: int
    ambient_dim: int = field(init=False)

    def __post_init__(self):
        if not isinstance(self.kind, Kind):
            raise ValueError(f"kind must be a Kind, got {self.kind!r}")
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")
        ambient = self.dim if self.kind is Kind.EUCLIDEAN else self.dim + 1
        object.__setattr__(self, "ambient_dim", ambient)

    @classmethod
    def from_name(cls, name: str, dim: int) -> "ManifoldSpec":
        try:
            kind = Kind(name.strip().lower())
        except ValueError:
            raise ValueError(
                f"unknown manifold {name!r}; expected euclidean, sphere, or hyperboloid"
            ) from None
        return cls(kind, dim)


def lorentz_inner(x: np.ndarray, y: np.ndarray) -> float:
    return float(-x[0] * y[0] + x[1:] @ y[1:])


def _embedding_residual(spec: ManifoldSpec, coords: np.ndarray) -> float:
    if spec.kind is Kind.EUCLIDEAN:
        return 0.0
    if spec.kind is Kind.SPHERE:
        return abs(float(coords @ coords) - 1.0)
    return abs(lorentz_inner(coords, coords) + 1.0)


@dataclass(frozen=True)
class Point:
    """A point on a manifold, stored in ambient coordinates."""

    manifold: ManifoldSpec
    coords: np.ndarray

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=float)
        if coords.shape != (self.manifold.ambient_dim,):
            raise InvalidPoint(
                f"expected {self.manifold.ambient_dim} coordinates, got shape {coords.shape}"
            )
        if not np.all(np.isfinite(coords)):
            raise InvalidPoint("coordinates must be finite")
        if _embedding_residual(self.manifold, coords) > POINT_TOL:
            raise InvalidPoint(
                f"coordinates violate the {self.manifold.kind.value} embedding invariant"
            )
        if self.manifold.kind is Kind.HYPERBOLOID and coords[0] <= 0.0:
            raise InvalidPoint("hyperboloid points must lie on the upper sheet (x0 > 0)")
        coords.setflags(write=False)
        object.__setattr__(self, "coords", coords)


@dataclass(frozen=True)
class TangentVector:
    """A tangent vector rooted at a base point, in ambient coordinates."""

    base: Point
    coords: np.ndarray

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=float)
        spec = self.base.manifold
        if coords.shape != (spec.ambient_dim,):
            raise InvalidTangent(
                f"expected {spec.ambient_dim} coordinates, got shape {coords.shape}"
            )
        if not np.all(np.isfinite(coords)):
            raise InvalidTangent("coordinates must be finite")
        p = self.base.coords
        if spec.kind is Kind.SPHERE:
            if abs(float(p @ coords)) > TANGENT_TOL:
                raise InvalidTangent("vector is not tangent to the sphere at its base")
        elif spec.kind is Kind.HYPERBOLOID:
            if abs(lorentz_inner(p, coords)) > TANGENT_TOL:
                raise InvalidTangent("vector is not Lorentz-orthogonal to its base")
        coords.setflags(write=False)
        object.__setattr__(self, "coords", coords)

    def scaled(self, s: float) -> "TangentVector":
        return TangentVector(self.base, self.coords * float(s))

    def plus(self, other: "TangentVector") -> "TangentVector":
        _require_same_base(self, other)
        return TangentVector(self.base, self.coords + other.coords)


@dataclass(frozen=True)
class Geodesic:
    """Curve t -> exp_base(t * velocity)."""

    base: Point
    velocity: TangentVector

    def __post_init__(self):
        if self.velocity.base is not self.base and not np.array_equal(
            self.velocity.base.coords, self.base.coords
        ):
            raise BasePointMismatch("geodesic velocity must be rooted at its base point")

    def at(self, t: float) -> Point:
        return exp_map(self.velocity.scaled(t))


def _require_same_spec(a: ManifoldSpec, b: ManifoldSpec):
    if a != b:
        raise ManifoldMismatch(f"operands live on {a.kind.value} vs {b.kind.value}")


def _require_same_base(u: TangentVector, v: TangentVector):
    if u.base.manifold != v.base.manifold:
        raise BasePointMismatch("tangent vectors live on different manifolds")
    if not np.allclose(u.base.coords, v.base.coords, rtol=0.0, atol=POINT_TOL):
        raise BasePointMismatch("tangent vectors are rooted at different points")


def metric_inner(u: TangentVector, v: TangentVector) -> float:
    """Riemannian inner product of two tangent vectors at the same base."""
    _require_same_base(u, v)
    if u.base.manifold.kind is Kind.HYPERBOLOID:
        return lorentz_inner(u.coords, v.coords)
    return float(u.coords @ v.coords)


def norm(v: TangentVector) -> float:
    """Metric norm; the Lorentz form is positive definite on tangent spaces."""
    if v.base.manifold.kind is Kind.HYPERBOLOID:
        return math.sqrt(max(lorentz_inner(v.coords, v.coords), 0.0))
    return float(np.linalg.norm(v.coords))


def exp_map(v: TangentVector) -> Point:
    """Geodesic exponential. Exact at v = 0; renormalizes onto the surface."""
    base = v.base
    spec = base.manifold
    n = norm(v)
    if n == 0.0:
        return base
    p = base.coords
    if spec.kind is Kind.EUCLIDEAN:
        return Point(spec, p + v.coords)
    if spec.kind is Kind.SPHERE:
        if n >= math.pi:
            raise BeyondInjectivityRadius(
                f"sphere exp needs |v| < pi, got {n:.6g}"
            )
        x = math.cos(n) * p + math.sin(n) * (v.coords / n)
        x = x / np.linalg.norm(x)
        return Point(spec, x)
    x = math.cosh(n) * p + math.sinh(n) * (v.coords / n)
    s = math.sqrt(max(-lorentz_inner(x, x), 0.0))
    return Point(spec, x / s)


def log_map(p: Point, q: Point) -> TangentVector:
    """Inverse of exp at p. log_map(p, p) is exactly zero."""
    spec = p.manifold
    _require_same_spec(spec, q.manifold)
    if spec.kind is Kind.EUCLIDEAN:
        return TangentVector(p, q.coords - p.coords)
    if spec.kind is Kind.SPHERE:
        c = min(1.0, max(-1.0, float(p.coords @ q.coords)))
        d = math.acos(c)
        if d >= math.pi - SPHERE_LOG_GUARD:
            raise BeyondInjectivityRadius(
                f"sphere log needs d(p, q) < pi - {SPHERE_LOG_GUARD:g}, got {d:.9g}"
            )
        u = q.coords - c * p.coords
        un = float(np.linalg.norm(u))
        if d == 0.0 or un < 1e-150:
            return TangentVector(p, np.zeros_like(p.coords))
        return TangentVector(p, (d / un) * u)
    a = max(-lorentz_inner(p.coords, q.coords), 1.0)
    d = math.acosh(a)
    u = q.coords - a * p.coords
    un = math.sqrt(max(lorentz_inner(u, u), 0.0))
    if d == 0.0 or un < 1e-150:
        return TangentVector(p, np.zeros_like(p.coords))
    return TangentVector(p, (d / un) * u)


def dist(p: Point, q: Point) -> float:
    """Geodesic distance in closed form."""
    spec = p.manifold
    _require_same_spec(spec, q.manifold)
    if spec.kind is Kind.EUCLIDEAN:
        return float(np.linalg.norm(q.coords - p.coords))
    if spec.kind is Kind.SPHERE:
        c = min(1.0, max(-1.0, float(p.coords @ q.coords)))
        return math.acos(c)
    return math.acosh(max(-lorentz_inner(p.coords, q.coords), 1.0))


def tangent_project(p: Point, ambient: np.ndarray) -> TangentVector:
    """Project an ambient vector onto the tangent space at p."""
    w = np.asarray(ambient, dtype=float)
    spec = p.manifold
    if spec.kind is Kind.EUCLIDEAN:
        return TangentVector(p, w)
    if spec.kind is Kind.SPHERE:
        return TangentVector(p, w - float(p.coords @ w) * p.coords)
    return TangentVector(p, w + lorentz_inner(p.coords, w) * p.coords)


def tangent_basis(p: Point) -> tuple[TangentVector, ...]:
    """Orthonormal tangent basis from Gram-Schmidt over the ambient axes.

    Deterministic: seeds are the standard basis vectors in index order;
    candidates whose orthogonalized norm falls below 1e-8 are skipped.
    """
    spec = p.manifold
    if spec.kind is Kind.EUCLIDEAN:
        eye = np.eye(spec.ambient_dim)
        return tuple(TangentVector(p, eye[i]) for i in range(spec.dim))
    form = lorentz_inner if spec.kind is Kind.HYPERBOLOID else lambda a, b: float(a @ b)
    basis: list[np.ndarray] = []
    for j in range(spec.ambient_dim):
        seed = np.zeros(spec.ambient_dim)
        seed[j] = 1.0
        w = tangent_project(p, seed).coords.copy()
        for b in basis:
            w = w - form(b, w) * b
        nrm = math.sqrt(max(form(w, w), 0.0))
        if nrm < BASIS_SKIP_TOL:
            continue
        basis.append(w / nrm)
        if len(basis) == spec.dim:
            break
    if len(basis) != spec.dim:
        raise RuntimeError("tangent basis construction lost rank")  # pragma: no cover
    return tuple(TangentVector(p, b) for b in basis)


def convexity_radius_bound(p: Point) -> float:
    """pi/2 on the sphere; a large sentinel on the flat/negatively curved pair."""
    if p.manifold.kind is Kind.SPHERE:
        return math.pi / 2.0
    return FLAT_RADIUS_SENTINEL


def surface_point(spec: ManifoldSpec, coords, tol: float = 1e-3) -> Point:
    """Build a Point from approximate coordinates, renormalizing onto the surface.

    Refuses coordinates farther than ``tol`` from the surface so typos do not
    silently become valid points.
    """
    c = np.asarray(coords, dtype=float)
    if c.shape != (spec.ambient_dim,):
        raise InvalidPoint(
            f"expected {spec.ambient_dim} coordinates, got shape {c.shape}"
        )
    if not np.all(np.isfinite(c)):
        raise InvalidPoint("coordinates must be finite")
    if spec.kind is Kind.EUCLIDEAN:
        return Point(spec, c)
    if spec.kind is Kind.SPHERE:
        r = float(np.linalg.norm(c))
        if abs(r - 1.0) > tol or r == 0.0:
            raise InvalidPoint(f"coordinates are {abs(r - 1.0):.3g} from the unit sphere")
        return Point(spec, c / r)
    q = lorentz_inner(c, c)
    if abs(q + 1.0) > tol or c[0] <= 0.0:
        raise InvalidPoint("coordinates are not near the upper hyperboloid sheet")
    return Point(spec, c / math.sqrt(-q))

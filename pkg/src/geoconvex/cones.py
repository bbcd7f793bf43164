"""Tangent cones, normal cones, and polar-cone tests at region points.

Membership in the tangent cone of a constrained region is decided by
geodesic probes at dyadic scales.  Two tests are provided: a direct one
that looks for an interior hit along exp_p(t*v), and a limit-direction
one that fits v against boundary crossings, which also certifies
directions tangent to a curved face where no ray stays interior.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from .errors import (
    BasePointMismatch,
    BeyondInjectivityRadius,
    EvalDomainError,
    NNLSStalled,
    NotInSet,
)
from .manifolds import (
    Point,
    TangentVector,
    exp_map,
    log_map,
    metric_inner,
    norm,
    tangent_project,
)
from .regions import ConvexRegion

PROBE_LEVELS = 41  # dyadic scales eps * 2^-j for j = 0..40
SLOPE_TOL = 1e-6  # exterior at scale t requires max g >= SLOPE_TOL * t
SEQ_IN_TOL = 1e-6  # limit-fit residual at or below this accepts membership
SEQ_OUT_TOL = 1e-3  # every scale at or above this rejects membership
BISECT_STEPS = 50
ZERO_TANGENT = 1e-15
NNLS_MAX_OUTER = 200
POLAR_TOL = 1e-8

IN_TANGENT_CONE = "in_tangent_cone"
NOT_IN_TANGENT_CONE = "not_in_tangent_cone"
UNDECIDED = "undecided"


@dataclasses.dataclass(frozen=True)
class ConeProbe:
    """Verdict of one tangent-cone membership test.

    ``witness_t`` is set only when a strictly interior point
    exp_base(witness_t * direction) with 0 < witness_t < eps(base)
    backs the verdict; limit-direction memberships and the zero vector
    leave it absent.
    """

    base: Point
    direction: TangentVector
    verdict: str
    witness_t: float | None = None


@dataclasses.dataclass(frozen=True)
class GeneratedCone:
    """Finitely generated cone {sum lambda_i g_i : lambda_i >= 0} at a base point."""

    base: Point
    generators: tuple[TangentVector, ...]

    def __post_init__(self):
        gens = tuple(self.generators)
        for g in gens:
            _require_base(g, self.base)
        object.__setattr__(self, "generators", gens)


def _require_base(vector: TangentVector, base: Point) -> None:
    if not np.array_equal(vector.base.coords, base.coords):
        if not np.allclose(vector.base.coords, base.coords, rtol=0.0, atol=1e-12):
            raise BasePointMismatch("tangent vector is rooted at a different point")


def epsilon_of(region: ConvexRegion, p: Point) -> float:
    """Deterministic working radius at a member point."""
    if region.member(p) == "exterior":
        raise NotInSet("epsilon_of requires a member point")
    return region.working_radius(p)


def _classify(region: ConvexRegion, x: Point, t: float) -> str:
    """Trichotomy at probe scale t: interior, exterior, or boundary band.

    Exterior is slope-scaled: a constraint value must exceed SLOPE_TOL * t
    to count, so that shrinking probes along a genuinely outward ray keep
    registering as exterior instead of draining into the band.
    """
    try:
        gmax = region.max_constraint(x)
    except EvalDomainError:
        return "band"
    if gmax <= -region.interior_tol:
        return "interior"
    if gmax >= SLOPE_TOL * t:
        return "exterior"
    return "band"


def tangent_cone_member(region: ConvexRegion, v: TangentVector) -> ConeProbe:
    """Direct membership test by interior probes along exp_p(t * v).

    Scales t_j = eps * 2^-j for j = 0..40.  The first strictly interior
    hit decides membership; all probes exterior decides rejection;
    anything else is undecided.  The witness is taken at j >= 1 so it
    stays strictly below eps.
    """
    p = v.base
    if region.member(p) == "exterior":
        raise NotInSet("tangent cone probes require a member base point")
    vn = norm(v)
    if vn < ZERO_TANGENT:
        return ConeProbe(p, v, IN_TANGENT_CONE)
    u = v.scaled(1.0 / vn)
    eps = epsilon_of(region, p)
    all_exterior = True
    for j in range(PROBE_LEVELS):
        t = eps * 2.0 ** (-j)
        kind = _classify(region, exp_map(u.scaled(t)), t)
        if kind == "interior":
            if j >= 1:
                return ConeProbe(p, u, IN_TANGENT_CONE, witness_t=t)
            all_exterior = False  # j = 0 alone cannot witness t < eps; keep scanning
        elif kind == "band":
            all_exterior = False
    if all_exterior:
        return ConeProbe(p, u, NOT_IN_TANGENT_CONE)
    return ConeProbe(p, u, UNDECIDED)


def _boundary_fit(
    region: ConvexRegion, p: Point, v: TangentVector, vn: float, x: Point, gmax: float
) -> float | None:
    """Residual of fitting v to the boundary crossing seen from p.

    The crossing is located by bisection along the geodesic ray from the
    anchor through the probe point x; feasible probes hunt forward past x
    first.  Returns None when no crossing can be bracketed.
    """
    ray = log_map(region.anchor, x)
    if norm(ray) < 1e-14:
        return None
    if gmax > 0.0:
        lo, hi = 0.0, 1.0
    else:
        lo, hi = 1.0, -1.0
        step = 1e-6
        s = 1.0
        for _ in range(60):
            s += step
            step *= 2.0
            try:
                if region.max_constraint(exp_map(ray.scaled(s))) > 0.0:
                    hi = s
                    break
            except (EvalDomainError, BeyondInjectivityRadius):
                return None
        if hi < 0.0:
            return None
    for _ in range(BISECT_STEPS):
        mid = 0.5 * (lo + hi)
        try:
            gm = region.max_constraint(exp_map(ray.scaled(mid)))
        except EvalDomainError:
            return None
        if gm <= 0.0:
            lo = mid
        else:
            hi = mid
    z = exp_map(ray.scaled(lo))
    w = log_map(p, z)
    ww = metric_inner(w, w)
    if ww < 1e-30:
        return 1.0
    alpha = max(0.0, metric_inner(v, w) / ww)
    return norm(w.scaled(alpha).plus(v.scaled(-1.0))) / vn


def tangent_cone_member_seq(region: ConvexRegion, v: TangentVector) -> ConeProbe:
    """Limit-direction membership test.

    At each probe scale the direction v is fitted as alpha * log_p(z)
    against a set point z near exp_p(t * v): the probe itself when it is
    interior, otherwise the boundary crossing along the anchor ray.  The
    best relative fit over all scales decides: at most SEQ_IN_TOL is a
    member, at least SEQ_OUT_TOL at every scale is not, else undecided.
    Agrees with tangent_cone_member wherever both are decisive, and
    additionally certifies face-tangential directions.
    """
    p = v.base
    if region.member(p) == "exterior":
        raise NotInSet("tangent cone probes require a member base point")
    vn = norm(v)
    if vn < ZERO_TANGENT:
        return ConeProbe(p, v, IN_TANGENT_CONE)
    u = v.scaled(1.0 / vn)
    eps = epsilon_of(region, p)
    best = math.inf
    witness = None
    for j in range(PROBE_LEVELS):
        t = eps * 2.0 ** (-j)
        x = exp_map(u.scaled(t))
        try:
            gmax = region.max_constraint(x)
        except EvalDomainError:
            continue
        if gmax <= -region.interior_tol:
            w = log_map(p, x)
            ww = metric_inner(w, w)
            if ww < 1e-30:
                continue
            alpha = max(0.0, metric_inner(u, w) / ww)
            fit = norm(w.scaled(alpha).plus(u.scaled(-1.0)))
            if fit < best:
                best = fit
            if j >= 1 and fit <= SEQ_IN_TOL and witness is None:
                witness = t
        else:
            fit = _boundary_fit(region, p, u, 1.0, x, gmax)
            if fit is None:
                continue
            if fit < best:
                best = fit
        if best <= SEQ_IN_TOL and j >= 1:
            break
    if best <= SEQ_IN_TOL:
        return ConeProbe(p, u, IN_TANGENT_CONE, witness_t=witness)
    if best >= SEQ_OUT_TOL:
        return ConeProbe(p, u, NOT_IN_TANGENT_CONE)
    return ConeProbe(p, u, UNDECIDED)


def normal_cone_generators(region: ConvexRegion, p: Point) -> GeneratedCone:
    """Active-constraint gradients generating the normal cone at p.

    Interior points get an empty generator list (the cone is {0}); the
    active set at a boundary point collects every constraint within the
    region's boundary band.
    """
    side = region.member(p)
    if side == "exterior":
        raise NotInSet("normal cone requires a member point")
    if side == "interior":
        return GeneratedCone(p, ())
    gens = tuple(
        g.gradient(p)
        for g in region.constraints
        if abs(g.evaluate(p)) <= region.interior_tol
    )
    return GeneratedCone(p, gens)


def polar_member(cone: GeneratedCone, u: TangentVector, tol: float = POLAR_TOL) -> bool:
    """Whether u lies in the polar of the generated cone.

    Generator tests suffice: <u, g_i> <= tol * |u| * |g_i| for all i.
    The polar of the trivial cone is the whole tangent space.
    """
    _require_base(u, cone.base)
    un = norm(u)
    if un == 0.0:
        return True
    for g in cone.generators:
        gn = norm(g)
        if gn == 0.0:
            continue
        if metric_inner(u, g) > tol * un * gn:
            return False
    return True


@dataclasses.dataclass(frozen=True)
class ConeInclusionReport:
    """Sampled evidence for cone_a being polar to a generator set."""

    samples_used: int
    max_violation: float
    counterexample: TangentVector | None
    passed: bool
    tol: float


def cone_in_cone(
    cone_a: GeneratedCone,
    polar_of: GeneratedCone,
    samples: int,
    seed: int,
    tol: float = POLAR_TOL,
) -> ConeInclusionReport:
    """Sample nonnegative combinations of cone_a against the polar of polar_of.

    The violation of a sample u is max_g <u, g> / (|u| |g|) over the
    polar_of generators; the report carries the worst violation and the
    first counterexample exceeding tol.
    """
    _require_base_points(cone_a.base, polar_of.base)
    rng = np.random.default_rng(seed)
    worst = 0.0
    counterexample = None
    used = 0
    gens = cone_a.generators
    for _ in range(samples):
        if not gens:
            break
        lam = rng.exponential(1.0, size=len(gens))
        combo = np.zeros(cone_a.base.manifold.ambient_dim)
        for coeff, g in zip(lam, gens):
            combo += coeff * g.coords
        u = tangent_project(cone_a.base, combo)
        un = norm(u)
        if un < 1e-14:
            continue
        used += 1
        for g in polar_of.generators:
            gn = norm(g)
            if gn == 0.0:
                continue
            violation = metric_inner(u, g) / (un * gn)
            if violation > worst:
                worst = violation
                if violation > tol and counterexample is None:
                    counterexample = u
    return ConeInclusionReport(used, worst, counterexample, worst <= tol, tol)


def _require_base_points(a: Point, b: Point) -> None:
    if not np.allclose(a.coords, b.coords, rtol=0.0, atol=1e-12):
        raise BasePointMismatch("cones are rooted at different points")


def nonneg_combination(
    cone: GeneratedCone, target: TangentVector
) -> tuple[list[float], float]:
    """Best nonnegative combination of the generators approximating target.

    Active-set nonnegative least squares on the Gram system in the base
    metric: repeatedly admit the generator with the most positive
    unconstrained gradient, solve the passive subsystem, and step back
    dropping coefficients that would go negative.  Returns the
    coefficients and the metric norm of the final misfit.
    """
    _require_base(target, cone.base)
    gens = cone.generators
    m = len(gens)
    if m == 0:
        return [], norm(target)
    gram = np.array([[metric_inner(a, b) for b in gens] for a in gens])
    rhs = np.array([metric_inner(g, target) for g in gens])
    scale = max(1.0, float(np.max(np.abs(rhs))), float(np.max(np.abs(gram))))
    w_tol = 1e-12 * scale
    lam = np.zeros(m)

    def misfit(coeffs: np.ndarray) -> float:
        combo = np.zeros_like(target.coords)
        for c, g in zip(coeffs, gens):
            combo += c * g.coords
        return norm(tangent_project(cone.base, combo - target.coords))

    best_lam = lam.copy()
    best_res = misfit(lam)
    passive = np.zeros(m, dtype=bool)
    converged = False
    for _ in range(NNLS_MAX_OUTER):
        w = np.where(passive, -np.inf, rhs - gram @ lam)
        j = int(np.argmax(w))
        if not np.isfinite(w[j]) or w[j] <= w_tol:
            converged = True
            break
        passive[j] = True
        for _ in range(m + 1):
            idx = np.flatnonzero(passive)
            z, *_ = np.linalg.lstsq(gram[np.ix_(idx, idx)], rhs[idx], rcond=None)
            if np.all(z > 0.0):
                lam[:] = 0.0
                lam[idx] = z
                break
            full = np.zeros(m)
            full[idx] = z
            neg = idx[z <= 0.0]
            denom = lam[neg] - full[neg]
            ratios = np.where(denom > 0.0, lam[neg] / np.where(denom > 0.0, denom, 1.0), 0.0)
            alpha = float(np.min(ratios))
            lam += alpha * (full - lam)
            passive &= lam > 1e-14 * scale
            lam[~passive] = 0.0
        res = misfit(lam)
        if res < best_res:
            best_res = res
            best_lam = lam.copy()
    if not converged:
        raise NNLSStalled(
            "nonnegative least squares did not settle within the iteration cap",
            coefficients=[float(c) for c in best_lam],
            residual=best_res,
        )
    return [float(max(c, 0.0)) for c in lam], misfit(lam)

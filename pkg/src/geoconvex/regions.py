"""Geodesically convex regions and certified metric projection.

A region is the sublevel system {x : g_i(x) <= 0} of expressions the
author declares geodesically convex, together with a strictly feasible
anchor.  Construction spot-checks the declaration on random chords.
Projection minimizes squared distance through an exact-penalty
Riemannian descent and then certifies the result against the
variational inequality <log_q* q, log_q* z> <= 0 over sampled interior
z; the certificate, not the solver, is what callers may trust.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    AnchorNotInterior,
    DegenerateProjection,
    EvalDomainError,
    ManifoldMismatch,
    NotGeodesicConvex,
    NotInSet,
    OutsideProjectionNeighborhood,
    PointInSet,
    ProjectionNotCertified,
    SamplingExhausted,
)
from .expressions import Expression
from .manifolds import (
    Kind,
    ManifoldSpec,
    Point,
    TangentVector,
    convexity_radius_bound,
    dist,
    exp_map,
    log_map,
    metric_inner,
    norm,
    tangent_project,
)

INTERIOR_TOL = 1e-9
VI_TOL = 1e-6
VI_PROBES = 64
CHORD_CHECKS = 50
CHORD_SLACK = 1e-7
GRAD_STOP = 1e-9
ARMIJO_C = 1e-4
RHO_INIT = 10.0
RHO_MAX = 1e12
MAX_PROJECT_ITERS = 10_000
SAMPLE_DRAW_CAP = 10_000
SHRINK_STEPS = 50


@dataclass(frozen=True)
class ProjectionResult:
    """Outcome of a certified metric projection."""

    q_star: Point
    distance: float
    vi_residual: float
    iterations: int
    converged: bool


class ConvexRegion:
    """Sublevel system {g_i <= 0} with a strictly feasible anchor.

    ``spot_check=False`` skips the chordwise convexity check; it exists for
    deliberately nonconvex diagnostic instances (constraint-qualification
    failure studies) and leaves every certificate downstream intact.
    """

    def __init__(
        self,
        manifold: ManifoldSpec,
        constraints: tuple[Expression, ...] | list[Expression],
        anchor: Point,
        interior_tol: float = INTERIOR_TOL,
        spot_check: bool = True,
    ):
        if anchor.manifold != manifold:
            raise ManifoldMismatch("anchor does not live on the region's manifold")
        if not constraints:
            raise ValueError("a region needs at least one constraint")
        for g in constraints:
            if g.ambient_dim != manifold.ambient_dim:
                raise ManifoldMismatch(
                    f"constraint {g.source!r} expects ambient dimension {g.ambient_dim}, "
                    f"manifold has {manifold.ambient_dim}"
                )
        if interior_tol <= 0.0:
            raise ValueError("interior_tol must be positive")
        self.manifold = manifold
        self.constraints = tuple(constraints)
        self.anchor = anchor
        self.interior_tol = float(interior_tol)
        self._sample_cache: dict[tuple[int, int], tuple[Point, ...]] = {}
        for g in self.constraints:
            value = g.evaluate(anchor)
            if value > -self.interior_tol:
                raise AnchorNotInterior(
                    f"anchor is not strictly feasible: {g.source!r} evaluates to {value:.3g}"
                )
        if spot_check:
            self._spot_check_convexity()

    @classmethod
    def from_sources(
        cls,
        manifold: ManifoldSpec,
        constraint_sources: list[str],
        anchor: Point,
        interior_tol: float = INTERIOR_TOL,
        spot_check: bool = True,
    ) -> "ConvexRegion":
        from .expressions import parse

        exprs = [parse(src, manifold.ambient_dim) for src in constraint_sources]
        return cls(manifold, exprs, anchor, interior_tol, spot_check)

    # -- membership ---------------------------------------------------------

    def max_constraint(self, x: Point) -> float:
        if x.manifold != self.manifold:
            raise ManifoldMismatch("point does not live on the region's manifold")
        return max(g.evaluate(x) for g in self.constraints)

    def member(self, x: Point) -> str:
        """Classify x as 'interior', 'boundary', or 'exterior' by max_i g_i."""
        m = self.max_constraint(x)
        if m <= -self.interior_tol:
            return "interior"
        if m >= self.interior_tol:
            return "exterior"
        return "boundary"

    # -- construction-time convexity spot check ------------------------------

    def _spot_check_convexity(self):
        rng = np.random.default_rng(0)
        for _ in range(CHORD_CHECKS):
            a = self._draw_interior(rng)
            b = self._draw_interior(rng)
            t = float(rng.uniform(0.1, 0.9))
            step = log_map(a, b)
            mid = exp_map(step.scaled(t))
            for g in self.constraints:
                ga, gb = g.evaluate(a), g.evaluate(b)
                gm = g.evaluate(mid)
                bound = (1.0 - t) * ga + t * gb + CHORD_SLACK
                if gm > bound:
                    raise NotGeodesicConvex(
                        f"constraint {g.source!r} violates chordwise convexity: "
                        f"g(chord({t:.3f})) = {gm:.6g} > {bound:.6g}"
                    )

    # -- interior sampling ----------------------------------------------------

    def working_radius(self, p: Point) -> float:
        """min(half the convexity radius bound, 0.25*d(p, anchor) + 0.1, 0.5)."""
        return min(
            0.5 * convexity_radius_bound(p),
            0.25 * dist(p, self.anchor) + 0.1,
            0.5,
        )

    def _draw_interior(self, rng: np.random.Generator) -> Point:
        radius = 0.9 * self.working_radius(self.anchor)
        for _ in range(200):
            w = tangent_project(self.anchor, rng.standard_normal(self.manifold.ambient_dim))
            n = norm(w)
            if n < 1e-12:
                continue
            r = radius * float(rng.uniform(0.0, 1.0)) ** (1.0 / self.manifold.dim)
            v = w.scaled(r / n)
            candidate = self._shrink_to_interior(v)
            if candidate is not None:
                return candidate
        raise SamplingExhausted("could not draw an interior point near the anchor")

    def _shrink_to_interior(self, v: TangentVector) -> Point | None:
        t = 1.0
        for _ in range(SHRINK_STEPS):
            try:
                candidate = exp_map(v.scaled(t))
                if self.member(candidate) == "interior":
                    return candidate
            except EvalDomainError:
                pass
            t *= 0.5
        return None

    def sample_interior(self, count: int, seed: int = 0) -> tuple[Point, ...]:
        """Deterministic interior points near the anchor.

        Draws tangent vectors at the anchor with radius up to 0.9 times the
        working radius, maps them through exp, and geodesically shrinks any
        rejected draw toward the anchor until it classifies interior.
        """
        key = (count, seed)
        cached = self._sample_cache.get(key)
        if cached is not None:
            return cached
        rng = np.random.default_rng(seed)
        radius = 0.9 * self.working_radius(self.anchor)
        out: list[Point] = []
        draws = 0
        while len(out) < count:
            if draws >= SAMPLE_DRAW_CAP:
                raise SamplingExhausted(
                    f"drew {draws} candidates but produced only {len(out)}/{count} interior points"
                )
            draws += 1
            w = tangent_project(self.anchor, rng.standard_normal(self.manifold.ambient_dim))
            n = norm(w)
            if n < 1e-12:
                continue
            r = radius * float(rng.uniform(0.0, 1.0)) ** (1.0 / self.manifold.dim)
            candidate = self._shrink_to_interior(w.scaled(r / n))
            if candidate is not None:
                out.append(candidate)
        result = tuple(out)
        self._sample_cache[key] = result
        return result


# ---------------------------------------------------------------------------
# Metric projection
# ---------------------------------------------------------------------------


def _penalty_value(region: ConvexRegion, q: Point, p: Point, rho: float) -> float:
    value = dist(q, p) ** 2
    for g in region.constraints:
        viol = g.evaluate(p)
        if viol > 0.0:
            value += rho * viol * viol
    return value


def _penalty_gradient(region: ConvexRegion, q: Point, p: Point, rho: float) -> TangentVector:
    out = log_map(p, q).coords * (-2.0)
    for g in region.constraints:
        viol = g.evaluate(p)
        if viol > 0.0:
            out = out + (2.0 * rho * viol) * g.gradient(p).coords
    return TangentVector(p, out)


def project(
    region: ConvexRegion,
    q: Point,
    start: Point | None = None,
    vi_probes: int = VI_PROBES,
    seed: int = 0,
) -> ProjectionResult:
    """Metric projection of q onto the region, with a VI certificate.

    Exact-penalty Riemannian gradient descent on dist(q, .)^2 with Armijo
    backtracking; the penalty weight doubles from 10 whenever a stationary
    iterate is still infeasible.  The returned point is certified against
    the variational inequality over ``vi_probes`` interior samples; failure
    raises ProjectionNotCertified carrying the best iterate.
    """
    if q.manifold != region.manifold:
        raise ManifoldMismatch("query point does not live on the region's manifold")
    if region.member(q) != "exterior":
        return ProjectionResult(q, 0.0, 0.0, 0, True)
    limit = 0.9 * convexity_radius_bound(region.anchor)
    if dist(q, region.anchor) > limit:
        raise OutsideProjectionNeighborhood(
            f"d(q, anchor) = {dist(q, region.anchor):.6g} exceeds {limit:.6g}"
        )

    p = start if start is not None else region.anchor
    if p.manifold != region.manifold:
        raise ManifoldMismatch("start point does not live on the region's manifold")
    rho = RHO_INIT
    iterations = 0
    prev_coords: np.ndarray | None = None
    prev_grad: np.ndarray | None = None
    step_guess = 1.0

    while iterations < MAX_PROJECT_ITERS:
        grad = _penalty_gradient(region, q, p, rho)
        gnorm = norm(grad)
        if gnorm > GRAD_STOP:
            # Barzilai-Borwein guess seeded into Armijo backtracking.
            if prev_coords is not None:
                s = p.coords - prev_coords
                y = grad.coords - prev_grad
                sy = float(s @ y)
                if sy > 1e-30:
                    step_guess = min(max(float(s @ s) / sy, 1e-12), 1e6)
                else:
                    step_guess = 1.0 / max(1.0, gnorm)
            else:
                step_guess = 1.0 / max(1.0, gnorm)
            t = min(step_guess, 0.8 / gnorm)  # keep sphere steps inside exp's range
            f0 = _penalty_value(region, q, p, rho)
            accepted = False
            for _ in range(60):
                trial = exp_map(grad.scaled(-t))
                try:
                    ft = _penalty_value(region, q, trial, rho)
                except EvalDomainError:
                    t *= 0.5
                    continue
                # Sufficient decrease must also be resolvable in floating point;
                # otherwise the comparison is noise and the round is stationary.
                if ft <= f0 - max(ARMIJO_C * t * gnorm * gnorm, 4e-16 * abs(f0)):
                    prev_coords = p.coords.copy()
                    prev_grad = grad.coords.copy()
                    p = trial
                    accepted = True
                    break
                t *= 0.5
            iterations += 1
            if accepted:
                continue
            # No representable descent step: treat as numerically stationary.
        if region.member(p) == "exterior" and rho < RHO_MAX:
            rho *= 2.0
            prev_coords = None
            prev_grad = None
            continue
        break

    u = log_map(p, q)
    vi = vi_residual(region, p, u, vi_probes, seed)
    result = ProjectionResult(
        q_star=p,
        distance=dist(q, p),
        vi_residual=vi,
        iterations=iterations,
        converged=True,
    )
    if region.member(p) == "exterior":
        raise ProjectionNotCertified(
            f"final iterate is still exterior (max g = {region.max_constraint(p):.3g})",
            result=ProjectionResult(p, result.distance, vi, iterations, False),
        )
    if vi > VI_TOL:
        raise ProjectionNotCertified(
            f"variational-inequality residual {vi:.3g} exceeds {VI_TOL:g}",
            result=ProjectionResult(p, result.distance, vi, iterations, False),
        )
    return result


def vi_residual(
    region: ConvexRegion,
    q_star: Point,
    outward: TangentVector,
    probes: int,
    seed: int,
) -> float:
    """max_z <outward, w_z> / (|outward| |w_z|) over interior samples z."""
    un = norm(outward)
    if un == 0.0:
        return 0.0
    worst = -math.inf
    for z in region.sample_interior(probes, seed):
        w = log_map(q_star, z)
        wn = norm(w)
        if wn < 1e-14:
            continue
        worst = max(worst, metric_inner(outward, w) / (un * wn))
    return 0.0 if worst == -math.inf else worst


def vi_check(
    region: ConvexRegion,
    q: Point,
    q_star: Point,
    probes: int = VI_PROBES,
    seed: int = 0,
) -> float:
    """Independent certificate: normalized VI residual for a claimed projection.

    Requires q exterior and q_star a member (boundary or interior); raises
    DegenerateProjection when q_star coincides with q.
    """
    if region.member(q) != "exterior":
        raise PointInSet("vi_check requires an exterior query point")
    if region.member(q_star) == "exterior":
        raise NotInSet("claimed projection is not a member of the region")
    u = log_map(q_star, q)
    if norm(u) < 1e-12:
        raise DegenerateProjection("claimed projection coincides with the query point")
    return vi_residual(region, q_star, u, probes, seed)

"""Separating and supporting quasi-hyperplanes for convex regions.

A quasi-hyperplane at a base point p is the zero set of
a |-> <u, log_p a> - alpha in the base metric.  Separation of an
exterior point rides on the metric projection; supporting planes at
boundary points are built as limits of separators of nearby exterior
points.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .errors import (
    DegenerateDirection,
    NotBoundaryPoint,
    PointInSet,
    SeparationNotCertified,
    SupportNotCertified,
)
from .manifolds import (
    Point,
    TangentVector,
    dist,
    exp_map,
    log_map,
    metric_inner,
    norm,
    tangent_project,
)
from .regions import ConvexRegion, project
from .cones import epsilon_of, tangent_cone_member, IN_TANGENT_CONE, UNDECIDED
from .sampling import random_unit_tangent

SET_SUP_TOL = 1e-8  # relative to |u|, for separation certificates
SUPPORT_TOL = 1e-6  # raw bound on <u, log_p z> for supporting planes
CAUCHY_TOL = 1e-7
BASE_NEAR_TOL = 1e-6
SUPPORT_PROBES = 500
LINEARIZE_TOL = 1e-6
DEFAULT_MAX_STEPS = 40
REDRAW_CAP = 100


@dataclasses.dataclass(frozen=True)
class QuasiHyperplane:
    """Zero set of a |-> <direction, log_base a> - offset."""

    base: Point
    direction: TangentVector
    offset: float

    def __post_init__(self):
        if norm(self.direction) == 0.0:
            raise DegenerateDirection("quasi-hyperplane direction must be nonzero")

    def evaluate(self, a: Point) -> float:
        return metric_inner(self.direction, log_map(self.base, a)) - self.offset


@dataclasses.dataclass(frozen=True)
class SeparationCertificate:
    """Witness that a plane separates a point from sampled set interior."""

    plane: QuasiHyperplane
    point_value: float
    set_sup: float
    probes_used: int
    margin: float


def separate(
    region: ConvexRegion, y: Point, probes: int = 500, seed: int = 0
) -> SeparationCertificate:
    """Separating quasi-hyperplane between an exterior point and the region.

    The plane sits at the metric projection p of y with direction
    u = log_p y and offset 0.  Certification sweeps interior samples z
    and requires <u, log_p z> <= SET_SUP_TOL * |u| for all of them.
    """
    if region.member(y) != "exterior":
        raise PointInSet("separation requires an exterior point")
    result = project(region, y)
    p = result.q_star
    u = log_map(p, y)
    plane = QuasiHyperplane(p, u, 0.0)
    un = norm(u)
    set_sup = -np.inf
    for z in region.sample_interior(probes, seed):
        set_sup = max(set_sup, metric_inner(u, log_map(p, z)))
    point_value = metric_inner(u, u)
    certificate = SeparationCertificate(
        plane=plane,
        point_value=point_value,
        set_sup=float(set_sup),
        probes_used=probes,
        margin=point_value - max(float(set_sup), 0.0),
    )
    if set_sup > SET_SUP_TOL * un or point_value <= 0.0:
        raise SeparationNotCertified(
            "sampled interior crosses the candidate plane", certificate=certificate
        )
    return certificate


def _initial_outward(region: ConvexRegion, p: Point, rng) -> TangentVector:
    ambient = np.zeros(p.manifold.ambient_dim)
    for g in region.constraints:
        if abs(g.evaluate(p)) <= region.interior_tol:
            ambient += g.gradient(p).coords
    w = tangent_project(p, ambient)
    wn = norm(w)
    if wn > 1e-12:
        return w.scaled(1.0 / wn)
    return random_unit_tangent(p, rng)


def supporting_plane(
    region: ConvexRegion,
    p: Point,
    max_steps: int = DEFAULT_MAX_STEPS,
    seed: int = 0,
) -> QuasiHyperplane:
    """Supporting quasi-hyperplane at a boundary point.

    Exterior points y_k are taken at shrinking distances delta_k from p,
    each is projected back, and the unit directions u_k = log(y_k) at the
    projections are iterated until Cauchy (compared in ambient
    coordinates once the projections sit within BASE_NEAR_TOL of p).
    The final direction is certified against sampled interior points:
    <u, log_p z> <= SUPPORT_TOL.
    """
    if region.member(p) != "boundary":
        raise NotBoundaryPoint("supporting planes exist only at boundary points")
    rng = np.random.default_rng(seed)
    eps = epsilon_of(region, p)
    delta0 = 0.1 * eps
    w = _initial_outward(region, p, rng)
    u_prev = None
    base_prev = None
    u_best = None
    for k in range(max_steps):
        delta = delta0 * 2.0 ** (-k)
        y = exp_map(w.scaled(0.5 * delta))
        redraws = 0
        while region.member(y) != "exterior":
            if redraws >= REDRAW_CAP:
                raise SupportNotCertified(
                    "no exterior point found near the base",
                    diagnostics={"step": k, "delta": delta},
                )
            w = random_unit_tangent(p, rng)
            y = exp_map(w.scaled(0.5 * delta))
            redraws += 1
        result = project(region, y, start=p)
        pk = result.q_star
        uk_raw = log_map(pk, y)
        ukn = norm(uk_raw)
        if ukn < 1e-15:
            continue
        uk = uk_raw.scaled(1.0 / ukn)
        u_best = uk
        near = dist(pk, p) <= BASE_NEAR_TOL
        if (
            u_prev is not None
            and near
            and base_prev is not None
            and dist(base_prev, p) <= BASE_NEAR_TOL
            and float(np.linalg.norm(uk.coords - u_prev.coords)) <= CAUCHY_TOL
        ):
            break
        u_prev = uk
        base_prev = pk
    if u_best is None:
        raise SupportNotCertified(
            "direction sequence produced no usable iterate",
            diagnostics={"max_steps": max_steps},
        )
    u = tangent_project(p, u_best.coords)
    un = norm(u)
    if un < 1e-12:
        raise SupportNotCertified(
            "limit direction degenerated under tangent projection",
            diagnostics={"max_steps": max_steps},
        )
    u = u.scaled(1.0 / un)
    worst = -np.inf
    for z in region.sample_interior(SUPPORT_PROBES, seed):
        worst = max(worst, metric_inner(u, log_map(p, z)))
    if worst > SUPPORT_TOL:
        raise SupportNotCertified(
            "interior sample crosses the candidate supporting plane",
            diagnostics={"max_steps": max_steps, "worst_inner": float(worst)},
        )
    return QuasiHyperplane(p, u, 0.0)


@dataclasses.dataclass(frozen=True)
class LinearizationReport:
    """Tangent-space separation evidence for a quasi-hyperplane."""

    samples_used: int
    undecided: int
    max_cone_value: float
    point_value: float
    passed: bool


def linearize(
    plane: QuasiHyperplane, region: ConvexRegion, probes: int = 200, seed: int = 0
) -> LinearizationReport:
    """Check that the plane's direction linearly separates in the tangent space.

    Samples tangent-cone member directions v at the plane's base and
    requires <u, v> <= LINEARIZE_TOL for each, with the point side
    <u, log_p y> = |u|^2 staying positive.
    """
    p = plane.base
    u = plane.direction
    rng = np.random.default_rng(seed)
    collected = 0
    undecided = 0
    worst = -np.inf
    attempts = 0
    cap = 50 * probes
    while collected < probes and attempts < cap:
        attempts += 1
        v = random_unit_tangent(p, rng)
        probe = tangent_cone_member(region, v)
        if probe.verdict == UNDECIDED:
            undecided += 1
            continue
        if probe.verdict != IN_TANGENT_CONE:
            continue
        collected += 1
        worst = max(worst, metric_inner(u, probe.direction))
    point_value = metric_inner(u, u)
    worst_value = float(worst) if collected else 0.0
    return LinearizationReport(
        samples_used=collected,
        undecided=undecided,
        max_cone_value=worst_value,
        point_value=point_value,
        passed=worst_value <= LINEARIZE_TOL and point_value > 0.0,
    )

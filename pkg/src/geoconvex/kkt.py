"""Projected-gradient solver and first-order optimality certificates.

The solver walks x+ = Pr(exp_x(-t grad f)) with Armijo backtracking.
Certificates come in two modes: KKT (unit objective multiplier, active
multipliers from nonnegative least squares) and Fritz-John (all
multipliers on the simplex, so degenerate instances with vanishing
constraint gradients stay solvable).
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .errors import (
    BeyondInjectivityRadius,
    EvalDomainError,
    ManifoldMismatch,
    NotBoundaryPoint,
    NotInSet,
    NumericalBreakdown,
    OutsideProjectionNeighborhood,
)
from .expressions import Expression
from .manifolds import (
    ManifoldSpec,
    Point,
    TangentVector,
    dist,
    exp_map,
    metric_inner,
    norm,
    log_map,
    tangent_project,
)
from .regions import ConvexRegion, project
from .cones import (
    GeneratedCone,
    IN_TANGENT_CONE,
    NOT_IN_TANGENT_CONE,
    nonneg_combination,
    tangent_cone_member_seq,
)
from .sampling import random_unit_tangent

ARMIJO_C = 1e-4
MOVE_STOP = 1e-10
MIN_STEP = 1e-18
FJ_ITERS = 1000
CQ_SWEEPS = 50


@dataclasses.dataclass(frozen=True)
class Tolerances:
    stationarity_tol: float = 1e-5
    complementarity_tol: float = 1e-6
    step_init: float = 1.0
    max_iters: int = 5000


@dataclasses.dataclass(frozen=True)
class ProblemSpec:
    """A constrained minimization instance on one manifold."""

    manifold: ManifoldSpec
    objective: Expression
    region: ConvexRegion
    start: Point
    tolerances: Tolerances = Tolerances()

    def __post_init__(self):
        if self.region.manifold != self.manifold:
            raise ManifoldMismatch("region lives on a different manifold")
        if self.start.manifold != self.manifold:
            raise ManifoldMismatch("start point lives on a different manifold")
        self.objective.evaluate(self.start)


@dataclasses.dataclass(frozen=True)
class IterationRecord:
    f_value: float
    step: float
    moved: float


@dataclasses.dataclass(frozen=True)
class KKTCertificate:
    point: Point
    multipliers: tuple[float, ...]
    lambda0: float
    stationarity_residual: float
    complementarity: tuple[float, ...]
    feasible: bool
    mode: str
    certified: bool


@dataclasses.dataclass(frozen=True)
class CQReport:
    """Sampled linearization-cone directions tested for tangent-cone membership."""

    samples_used: int
    fraction_in: float
    counterexamples: tuple[TangentVector, ...]
    undecided: int


def solve(problem: ProblemSpec) -> tuple[Point, list[IterationRecord]]:
    """Projected Riemannian gradient descent to a stationary feasible point.

    Each iteration takes the steepest-descent arc, projects back onto the
    region, and Armijo-tests the projected point with the arc step reset
    to step_init.  Stops on a sub-MOVE_STOP move, on a stationarity
    measure dist(x, x+)/t at or below stationarity_tol, or at max_iters.
    """
    tol = problem.tolerances
    region = problem.region
    f = problem.objective
    x = problem.start
    if region.member(x) == "exterior":
        x = project(region, x).q_star
    trace: list[IterationRecord] = []
    for _ in range(tol.max_iters):
        try:
            fx = f.evaluate(x)
            grad = f.gradient(x)
        except EvalDomainError as exc:
            raise NumericalBreakdown(
                "objective stopped evaluating at the current iterate", point=x
            ) from exc
        t = tol.step_init
        accepted = None
        while t >= MIN_STEP:
            try:
                y = exp_map(grad.scaled(-t))
                xp = project(region, y, start=x).q_star
                fp = f.evaluate(xp)
            except (EvalDomainError, BeyondInjectivityRadius, OutsideProjectionNeighborhood):
                t *= 0.5
                continue
            d = dist(x, xp)
            if fp <= fx - (ARMIJO_C / t) * d * d:
                accepted = (xp, fp, d)
                break
            t *= 0.5
        if accepted is None:
            break
        xp, fp, d = accepted
        trace.append(IterationRecord(f_value=fp, step=t, moved=d))
        x = xp
        if d <= MOVE_STOP or d / t <= tol.stationarity_tol:
            break
    return x, trace


def _active_indices(region: ConvexRegion, point: Point) -> tuple[list[int], list[float]]:
    values = [g.evaluate(point) for g in region.constraints]
    active = [i for i, gv in enumerate(values) if abs(gv) <= region.interior_tol]
    return active, values


def check_kkt(problem: ProblemSpec, point: Point) -> KKTCertificate:
    """KKT certificate with multipliers fitted by nonnegative least squares.

    Active multipliers solve min |grad f + sum lambda_i grad g_i| over
    lambda >= 0; inactive multipliers are exactly zero.  Certification
    needs feasibility, a stationarity residual within stationarity_tol,
    and complementarity products within complementarity_tol.
    """
    region = problem.region
    tol = problem.tolerances
    grad_f = problem.objective.gradient(point)
    active, values = _active_indices(region, point)
    cone = GeneratedCone(
        point, tuple(region.constraints[i].gradient(point) for i in active)
    )
    coeffs, residual = nonneg_combination(cone, grad_f.scaled(-1.0))
    multipliers = [0.0] * len(region.constraints)
    for i, c in zip(active, coeffs):
        multipliers[i] = c
    complementarity = tuple(m * gv for m, gv in zip(multipliers, values))
    feasible = max(values) <= region.interior_tol
    certified = (
        feasible
        and residual <= tol.stationarity_tol
        and max((abs(c) for c in complementarity), default=0.0)
        <= tol.complementarity_tol
    )
    return KKTCertificate(
        point=point,
        multipliers=tuple(multipliers),
        lambda0=1.0,
        stationarity_residual=residual,
        complementarity=complementarity,
        feasible=feasible,
        mode="kkt",
        certified=certified,
    )


def _simplex_project(v: np.ndarray) -> np.ndarray:
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    ks = np.arange(1, v.size + 1)
    mask = u - css / ks > 0.0
    rho = int(ks[mask][-1])
    theta = css[mask][-1] / rho
    return np.maximum(v - theta, 0.0)


def check_fritz_john(problem: ProblemSpec, point: Point) -> KKTCertificate:
    """Fritz-John certificate via projected gradient descent on the simplex.

    Minimizes |lambda0 grad f + sum lambda_i grad g_i|^2 subject to the
    multipliers summing to one, which stays well posed when constraint
    gradients vanish (the degenerate case KKT cannot express).
    """
    region = problem.region
    tol = problem.tolerances
    active, values = _active_indices(region, point)
    if max(values) > region.interior_tol:
        raise NotInSet("Fritz-John certificates require a feasible point")
    vectors = [problem.objective.gradient(point)] + [
        region.constraints[i].gradient(point) for i in active
    ]
    m = len(vectors)
    gram = np.array([[metric_inner(a, b) for b in vectors] for a in vectors])
    lam = np.full(m, 1.0 / m)
    top = float(np.max(np.linalg.eigvalsh(gram))) if m > 1 else float(gram[0, 0])
    step = 1.0 / (2.0 * top) if top > 1e-30 else 1.0
    for _ in range(FJ_ITERS):
        lam = _simplex_project(lam - step * (2.0 * gram @ lam))
    combo = np.zeros_like(point.coords)
    for c, vec in zip(lam, vectors):
        combo += c * vec.coords
    residual = norm(tangent_project(point, combo))
    multipliers = [0.0] * len(region.constraints)
    for i, c in zip(active, lam[1:]):
        multipliers[i] = float(c)
    complementarity = tuple(m_i * gv for m_i, gv in zip(multipliers, values))
    return KKTCertificate(
        point=point,
        multipliers=tuple(multipliers),
        lambda0=float(lam[0]),
        stationarity_residual=residual,
        feasible=True,
        complementarity=complementarity,
        mode="fritz_john",
        certified=residual <= tol.stationarity_tol,
    )


def check_cq(
    problem: ProblemSpec, point: Point, probes: int = 200, seed: int = 0
) -> CQReport:
    """Sampled check that linearization-cone directions are tangent-cone members.

    Random unit tangents are swept onto {<grad g_i, v> <= 0 for active i}
    by cyclic halfspace projection and then run through the
    limit-direction membership test.  Advisory: sampling cannot decide
    the inclusion, only exhibit counterexamples.
    """
    region = problem.region
    if region.member(point) != "boundary":
        raise NotBoundaryPoint("the linearization cone check runs at boundary points")
    active, _ = _active_indices(region, point)
    grads = [region.constraints[i].gradient(point) for i in active]
    rng = np.random.default_rng(seed)
    used = 0
    inside = 0
    undecided = 0
    counterexamples: list[TangentVector] = []
    for _ in range(probes):
        v = random_unit_tangent(point, rng)
        for _ in range(CQ_SWEEPS):
            moved = False
            for a in grads:
                aa = metric_inner(a, a)
                if aa < 1e-30:
                    continue
                av = metric_inner(a, v)
                if av > 0.0:
                    v = v.plus(a.scaled(-av / aa))
                    moved = True
            if not moved:
                break
        vn = norm(v)
        if vn < 1e-10:
            continue
        v = v.scaled(1.0 / vn)
        if any(metric_inner(a, v) > 1e-10 * norm(a) for a in grads):
            continue
        probe = tangent_cone_member_seq(region, v)
        used += 1
        if probe.verdict == IN_TANGENT_CONE:
            inside += 1
        elif probe.verdict == NOT_IN_TANGENT_CONE:
            counterexamples.append(v)
        else:
            undecided += 1
    return CQReport(
        samples_used=used,
        fraction_in=inside / used if used else 0.0,
        counterexamples=tuple(counterexamples[:16]),
        undecided=undecided,
    )


def normal_cone_residual(
    problem: ProblemSpec, point: Point, probes: int = 200, seed: int = 0
) -> float:
    """max over interior samples z of <-grad f, log_point z normalized>.

    Nonpositive up to tolerance when the negated objective gradient sits
    in the normal cone at the point; interior optima pass because the
    gradient itself vanishes there.
    """
    u = problem.objective.gradient(point).scaled(-1.0)
    worst = -np.inf
    for z in problem.region.sample_interior(probes, seed):
        w = log_map(point, z)
        wn = norm(w)
        if wn < 1e-14:
            continue
        worst = max(worst, metric_inner(u, w) / wn)
    return 0.0 if worst == -np.inf else float(worst)

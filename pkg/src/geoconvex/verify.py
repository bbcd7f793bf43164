"""Built-in acceptance suite over a seeded instance corpus.

run_all executes eleven numbered check groups (geometry roundtrips,
distance convexity, projection certificates, oracle comparisons,
separation, supporting planes, cone duality, KKT, Fritz-John, solver
sanity, CLI determinism) and returns flat CheckRecord rows.  Record
values and tolerances use a uniform convention: a record passes iff
value <= tolerance, except rows whose name ends in _count_min, which
pass iff value >= tolerance.
"""

from __future__ import annotations

import dataclasses
import io
import json
import math
import os
import tempfile
from contextlib import redirect_stderr, redirect_stdout

import numpy as np

from .errors import (
    GeoConvexError,
    ProjectionNotCertified,
    SeparationNotCertified,
    SupportNotCertified,
)
from .manifolds import (
    Kind,
    ManifoldSpec,
    Point,
    convexity_radius_bound,
    dist,
    exp_map,
    log_map,
    metric_inner,
    norm,
    surface_point,
)
from .expressions import parse
from .regions import ConvexRegion, project
from .cones import (
    IN_TANGENT_CONE,
    NOT_IN_TANGENT_CONE,
    GeneratedCone,
    normal_cone_generators,
    tangent_cone_member,
)
from .separation import separate, supporting_plane
from .kkt import ProblemSpec, check_cq, check_fritz_john, check_kkt, normal_cone_residual, solve
from .problems import parse_problem
from .sampling import random_point, random_unit_tangent

_KINDS = ("euclidean", "sphere", "hyperboloid")

# Embedded copies of the sample problem files, used by the solver and
# CLI checks so the suite needs no filesystem fixtures.
DISK_PROBLEM = """\
# Unit disk in the plane, objective pulls toward (2, 0).
manifold = euclidean
dim = 2
objective = "(x1 - 2)^2 + x2^2"
constraint = "x1^2 + x2^2 - 1"
anchor = [0.0, 0.0]
start = [-0.5, 0.3]
seed = 0
"""

SPHERE_CAP_PROBLEM = """\
# Geodesic cap of angular radius 0.7 about the north-ish axis (1, 0, 0),
# objective is squared geodesic distance to a point outside the cap.
manifold = sphere
dim = 2
objective = "gdist(0.5403023058681398, 0.0, 0.8414709848078965)^2"
constraint = "gdist(1.0, 0.0, 0.0)^2 - 0.49"
anchor = [1.0, 0.0, 0.0]
start = [0.9950041652780258, 0.0, 0.09983341664682815]
seed = 0
"""

HYPERBOLOID_BALL_PROBLEM = """\
# Geodesic ball of radius 0.7 about the apex of the upper hyperboloid
# sheet, objective is squared distance to a point 1.4 away along the
# first spatial axis.  The constrained optimum sits on the ball boundary
# with multiplier 1.
manifold = hyperboloid
dim = 2
objective = "gdist(2.1508984653931407, 1.9043015014515339, 0.0)^2"
constraint = "gdist(1.0, 0.0, 0.0)^2 - 0.49"
anchor = [1.0, 0.0, 0.0]
start = [1.0050041680558035, 0.10016675001984403, 0.0]
seed = 0
"""

_SOLVE_TARGETS = {
    "disk": (DISK_PROBLEM, (1.0, 0.0)),
    "sphere_cap": (SPHERE_CAP_PROBLEM, (math.cos(0.7), 0.0, math.sin(0.7))),
    "hyperboloid_ball": (HYPERBOLOID_BALL_PROBLEM, (math.cosh(0.7), math.sinh(0.7), 0.0)),
}


@dataclasses.dataclass(frozen=True)
class CheckRecord:
    name: str
    status: str
    value: float
    tolerance: float


def _record(name: str, value: float, tolerance: float, minimum: bool = False) -> CheckRecord:
    ok = value >= tolerance if minimum else value <= tolerance
    return CheckRecord(name, "pass" if ok else "fail", float(value), float(tolerance))


def _rng(seed: int, lane: int) -> np.random.Generator:
    return np.random.default_rng([seed, lane])


def _spec(kind: str, dim: int = 2) -> ManifoldSpec:
    return ManifoldSpec.from_name(kind, dim)


def _ball_source(spec: ManifoldSpec, center: Point, radius: float) -> str:
    r2 = repr(float(radius) ** 2)
    if spec.kind is Kind.EUCLIDEAN:
        terms = " + ".join(
            f"(x{i + 1} - ({repr(float(c))}))^2" for i, c in enumerate(center.coords)
        )
        return f"{terms} - {r2}"
    args = ", ".join(repr(float(c)) for c in center.coords)
    return f"gdist({args})^2 - {r2}"


def _draw_radius(kind: str, rng: np.random.Generator) -> float:
    cap = 2.8 if kind == "sphere" else 3.0
    return float(rng.uniform(0.0, cap))


@dataclasses.dataclass
class _Instance:
    region: ConvexRegion
    query: Point
    cover_radius: float


def _random_instance(kind: str, rng: np.random.Generator, two_balls: bool) -> _Instance:
    spec = _spec(kind)
    anchor = random_point(spec, rng, spread=0.8)
    r0 = float(rng.uniform(0.35, 0.9))
    sources = [_ball_source(spec, anchor, r0)]
    if two_balls:
        w = random_unit_tangent(anchor, rng)
        delta = float(rng.uniform(0.1, 0.5 * r0))
        center2 = exp_map(w.scaled(delta))
        r2 = delta + float(rng.uniform(0.3 * r0, r0))
        sources.append(_ball_source(spec, center2, r2))
    region = ConvexRegion.from_sources(spec, sources, anchor)
    direction = random_unit_tangent(anchor, rng)
    hi = min(r0 + 0.7, 0.9 * convexity_radius_bound(anchor) - 0.01)
    d = float(rng.uniform(r0 + 0.08, hi))
    query = exp_map(direction.scaled(d))
    return _Instance(region, query, r0 + 0.05)


def _boundary_instance(kind: str, rng: np.random.Generator) -> tuple[ConvexRegion, Point]:
    spec = _spec(kind)
    anchor = random_point(spec, rng, spread=0.6)
    r0 = float(rng.uniform(0.4, 0.8))
    region = ConvexRegion.from_sources(spec, [_ball_source(spec, anchor, r0)], anchor)
    p = exp_map(random_unit_tangent(anchor, rng).scaled(r0))
    return region, p


# -- check groups -----------------------------------------------------------


def _check_roundtrip(seed: int, quick: bool) -> list[CheckRecord]:
    pairs = 100 if quick else 1000
    records = []
    for kind in _KINDS:
        worst_rt = 0.0
        worst_iso = 0.0
        rng = _rng(seed, 101 + _KINDS.index(kind))
        for dim in (2, 3):
            spec = _spec(kind, dim)
            for _ in range(pairs // 2):
                p = random_point(spec, rng)
                r = _draw_radius(kind, rng)
                v = random_unit_tangent(p, rng).scaled(r)
                q = exp_map(v)
                w = log_map(p, q)
                worst_rt = max(worst_rt, norm(w.plus(v.scaled(-1.0))))
                worst_iso = max(worst_iso, abs(dist(p, q) - r))
        records.append(_record(f"c1_roundtrip_{kind}", worst_rt, 1e-8))
        records.append(_record(f"c1_isometry_{kind}", worst_iso, 1e-9))
    return records


def _check_distance_convexity(seed: int, quick: bool) -> list[CheckRecord]:
    pairs = 100 if quick else 1000
    records = []
    for kind in _KINDS:
        rng = _rng(seed, 201 + _KINDS.index(kind))
        spec = _spec(kind)
        worst = 0.0
        for _ in range(pairs):
            p = random_point(spec, rng, spread=0.7)
            ball = min(0.25 * convexity_radius_bound(p), 0.6)
            pts = []
            for _ in range(3):
                r = ball * float(rng.uniform(0.0, 1.0))
                pts.append(exp_map(random_unit_tangent(p, rng).scaled(r)))
            a, b, c = pts
            t = float(rng.uniform(0.1, 0.9))
            mid = exp_map(log_map(a, b).scaled(t))
            gap = dist(mid, c) - ((1.0 - t) * dist(a, c) + t * dist(b, c))
            worst = max(worst, gap)
        records.append(_record(f"c2_convexity_{kind}", worst, 1e-9))
    return records


def _check_projection(seed: int, quick: bool):
    per_kind = 20 if quick else 100
    allowed = 1 if quick else 5
    records = []
    certified: list[tuple[ConvexRegion, Point]] = []
    for kind in _KINDS:
        rng = _rng(seed, 301 + _KINDS.index(kind))
        worst_vi = -np.inf
        uncertified = 0
        errors = 0
        for k in range(per_kind):
            inst = _random_instance(kind, rng, two_balls=(k % 3 == 0))
            try:
                result = project(inst.region, inst.query, seed=seed + k)
            except ProjectionNotCertified:
                uncertified += 1
                continue
            except GeoConvexError:
                errors += 1
                continue
            worst_vi = max(worst_vi, result.vi_residual)
            certified.append((inst.region, inst.query))
        value = 0.0 if worst_vi == -np.inf else float(worst_vi)
        records.append(_record(f"c3_vi_{kind}", value, 1e-6))
        records.append(_record(f"c3_uncertified_{kind}", uncertified, allowed))
        records.append(_record(f"c3_errors_{kind}", errors, 0.0))
    return records, certified


def _oracle_distance(
    region: ConvexRegion, q: Point, cover: float, rng: np.random.Generator, quick: bool
) -> float:
    anchor = region.anchor
    best = None
    best_d = np.inf
    for _ in range(3000 if quick else 10_000):
        r = cover * math.sqrt(float(rng.uniform(0.0, 1.0)))
        z = exp_map(random_unit_tangent(anchor, rng).scaled(r))
        if region.max_constraint(z) <= 0.0:
            d = dist(q, z)
            if d < best_d:
                best, best_d = z, d
    scale = 0.1 * cover
    for _ in range(4):
        for _ in range(800 if quick else 2000):
            step = scale * float(rng.uniform(0.0, 1.0))
            z = exp_map(random_unit_tangent(best, rng).scaled(step))
            if region.max_constraint(z) <= 0.0:
                d = dist(q, z)
                if d < best_d:
                    best, best_d = z, d
        scale *= 0.1
    return float(best_d)


def _check_oracle(seed: int, quick: bool) -> list[CheckRecord]:
    per_kind = 2 if quick else 10
    records = []
    for kind in _KINDS:
        rng = _rng(seed, 401 + _KINDS.index(kind))
        worst = 0.0
        for k in range(per_kind):
            inst = _random_instance(kind, rng, two_balls=(k % 2 == 0))
            oracle = _oracle_distance(inst.region, inst.query, inst.cover_radius, rng, quick)
            try:
                result = project(inst.region, inst.query, seed=seed + k)
                worst = max(worst, abs(result.distance - oracle))
            except GeoConvexError:
                worst = np.inf
        records.append(_record(f"c4_oracle_{kind}", worst, 1e-4))
    return records


def _check_separation(seed: int, quick: bool, certified) -> list[CheckRecord]:
    probes = 200 if quick else 500
    worst_sup = -np.inf
    worst_pv = 0.0
    failures = 0
    for k, (region, q) in enumerate(certified):
        try:
            cert = separate(region, q, probes=probes, seed=seed + k)
        except (SeparationNotCertified, GeoConvexError):
            failures += 1
            continue
        un = norm(cert.plane.direction)
        worst_sup = max(worst_sup, cert.set_sup / un)
        worst_pv = max(worst_pv, abs(cert.point_value - un * un))
        if cert.point_value <= 0.0:
            failures += 1
    value = 0.0 if worst_sup == -np.inf else float(worst_sup)
    return [
        _record("c5_set_sup", value, 1e-8),
        _record("c5_point_value", worst_pv, 1e-9),
        _record("c5_failures", failures, 0.0),
    ]


def _check_supporting_plane(seed: int, quick: bool) -> list[CheckRecord]:
    total = 10 if quick else 50
    allowed = 1 if quick else 2
    uncertified = 0
    errors = 0
    worst = -np.inf
    for k in range(total):
        kind = _KINDS[k % 3]
        rng = _rng(seed, 601 + k)
        region, p = _boundary_instance(kind, rng)
        try:
            plane = supporting_plane(region, p, seed=seed + k)
        except SupportNotCertified:
            uncertified += 1
            continue
        except GeoConvexError:
            errors += 1
            continue
        for z in region.sample_interior(500, seed + k):
            worst = max(worst, metric_inner(plane.direction, log_map(plane.base, z)))
    value = 0.0 if worst == -np.inf else float(worst)
    return [
        _record("c6_probe_max", value, 1e-6),
        _record("c6_uncertified", uncertified, allowed),
        _record("c6_errors", errors, 0.0),
    ]


def _dummy_problem(region: ConvexRegion) -> ProblemSpec:
    objective = parse("x1", region.manifold.ambient_dim)
    return ProblemSpec(region.manifold, objective, region, region.anchor)


def _check_cone_duality(seed: int, quick: bool) -> list[CheckRecord]:
    per_instance = 350 if quick else 1750
    required = 2000 if quick else 10_000
    cq_probes = 40 if quick else 120
    probes_run = 0
    decisive = 0
    undecided = 0
    skipped = 0
    worst_lin = -np.inf
    for kind in _KINDS:
        for j in range(2):
            rng = _rng(seed, 701 + 10 * _KINDS.index(kind) + j)
            region, p = _boundary_instance(kind, rng)
            cq = check_cq(_dummy_problem(region), p, probes=cq_probes, seed=seed + j)
            if len(cq.counterexamples) > 0:
                skipped += 1
                continue
            ncone = normal_cone_generators(region, p)
            for _ in range(per_instance):
                v = random_unit_tangent(p, rng)
                probe = tangent_cone_member(region, v)
                probes_run += 1
                inner_max = max(
                    metric_inner(v, g) / norm(g) for g in ncone.generators
                )
                if probe.verdict == IN_TANGENT_CONE:
                    worst_lin = max(worst_lin, inner_max)
                    if inner_max > 1e-6:
                        decisive += 1
                elif probe.verdict == NOT_IN_TANGENT_CONE:
                    if inner_max < -1e-5:
                        decisive += 1
                else:
                    undecided += 1
    lin_value = 0.0 if worst_lin == -np.inf else float(worst_lin)
    mono_value = _monotonicity_violation(seed, quick)
    return [
        _record("c7_probe_count_min", probes_run, required, minimum=True),
        _record("c7_decisive", decisive, 0.0),
        _record("c7_linearization", lin_value, 1e-6),
        _record("c7_monotonicity", mono_value, 1e-8),
        _record("c7_cq_skipped", skipped, 0.0),
        _record("c7_undecided_fraction", undecided / max(probes_run, 1), 1.0),
    ]


def _monotonicity_violation(seed: int, quick: bool) -> float:
    """Worst inner product of the large set's normal against the small
    set's strict tangent probes at a shared boundary point."""
    want = 10 if quick else 25
    worst = -np.inf
    for kind in _KINDS:
        rng = _rng(seed, 801 + _KINDS.index(kind))
        spec = _spec(kind)
        anchor = random_point(spec, rng, spread=0.6)
        r0 = 0.6
        big = ConvexRegion.from_sources(spec, [_ball_source(spec, anchor, r0)], anchor)
        p = exp_map(random_unit_tangent(anchor, rng).scaled(r0))
        u_in = log_map(p, anchor).scaled(1.0 / r0)
        t_raw = random_unit_tangent(p, rng)
        t_perp = t_raw.plus(u_in.scaled(-metric_inner(t_raw, u_in)))
        tn = norm(t_perp)
        if tn < 1e-9:
            continue
        t_hat = t_perp.scaled(1.0 / tn)
        w2 = u_in.scaled(0.8).plus(t_hat.scaled(0.6))
        center2 = exp_map(w2.scaled(0.5))
        sources = [_ball_source(spec, anchor, r0), _ball_source(spec, center2, 0.5)]
        small_anchor = None
        mid = u_in.plus(w2)
        mid = mid.scaled(1.0 / norm(mid))
        step = 0.25
        for _ in range(20):
            z = exp_map(mid.scaled(step))
            if all(parse(s, spec.ambient_dim).evaluate(z) < -1e-6 for s in sources):
                small_anchor = z
                break
            step *= 0.7
        if small_anchor is None:
            continue
        small = ConvexRegion.from_sources(spec, sources, small_anchor)
        in_probes = []
        attempts = 0
        while len(in_probes) < want and attempts < 40 * want:
            attempts += 1
            v = random_unit_tangent(p, rng)
            if tangent_cone_member(small, v).verdict == IN_TANGENT_CONE:
                in_probes.append(v)
        if not in_probes:
            continue
        cone = GeneratedCone(p, tuple(in_probes))
        for g in normal_cone_generators(big, p).generators:
            gn = norm(g)
            for v in cone.generators:
                worst = max(worst, metric_inner(g, v) / gn)
    return 0.0 if worst == -np.inf else float(worst)


def _check_kkt_instances(seed: int, quick: bool):
    records = []
    certified_points: list[tuple[ProblemSpec, Point]] = []

    spec2 = _spec("euclidean")
    disk = ConvexRegion.from_sources(
        spec2, ["x1^2 + x2^2 - 1"], surface_point(spec2, [0.0, 0.0])
    )
    problem = ProblemSpec(spec2, parse("x1", 2), disk, disk.anchor)
    opt = surface_point(spec2, [-1.0, 0.0])
    cert = check_kkt(problem, opt)
    lam_err = abs(cert.multipliers[0] - 0.5) if cert.certified else np.inf
    records.append(_record("c8_disk_multiplier", lam_err, 1e-7))
    if cert.certified:
        certified_points.append((problem, opt))

    cap = parse_problem(SPHERE_CAP_PROBLEM)
    cap_spec = cap.to_problem_spec()
    x_cap, _ = solve(cap_spec)
    cap_cert = check_kkt(cap_spec, x_cap)
    cap_resid = cap_cert.stationarity_residual if cap_cert.certified else np.inf
    records.append(_record("c8_cap_stationarity", cap_resid, 1e-5))
    if cap_cert.certified:
        certified_points.append((cap_spec, x_cap))

    count = 5 if quick else 20
    rng = _rng(seed, 901)
    spec3 = _spec("euclidean", 3)
    worst_mult = 0.0
    failures = 0
    for _ in range(count):
        x_bar = rng.uniform(-1.0, 1.0, 3)
        while True:
            a1 = rng.standard_normal(3)
            a1 /= np.linalg.norm(a1)
            a2 = rng.standard_normal(3)
            a2 /= np.linalg.norm(a2)
            if abs(float(a1 @ a2)) <= 0.9:
                break
        lam_true = rng.uniform(0.2, 2.0, 2)
        b = x_bar + (lam_true[0] * a1 + lam_true[1] * a2) / 2.0
        objective = " + ".join(
            f"(x{i + 1} - ({repr(float(b[i]))}))^2" for i in range(3)
        )
        constraints = []
        for a in (a1, a2):
            lhs = " + ".join(f"({repr(float(a[i]))})*x{i + 1}" for i in range(3))
            constraints.append(f"{lhs} - ({repr(float(a @ x_bar))})")
        bisector = a1 + a2
        anchor_coords = x_bar - 0.4 * bisector / np.linalg.norm(bisector)
        region = ConvexRegion.from_sources(
            spec3, constraints, surface_point(spec3, anchor_coords)
        )
        prob = ProblemSpec(spec3, parse(objective, 3), region, region.anchor)
        point = surface_point(spec3, x_bar)
        cert = check_kkt(prob, point)
        if not cert.certified:
            failures += 1
            continue
        grad_f = 2.0 * (x_bar - b)
        basis = np.stack([a1, a2], axis=1)
        lam_oracle, *_ = np.linalg.lstsq(basis, -grad_f, rcond=None)
        worst_mult = max(
            worst_mult,
            float(np.max(np.abs(np.asarray(cert.multipliers) - lam_oracle))),
        )
        certified_points.append((prob, point))
    records.append(_record("c8_affine_multipliers", worst_mult, 1e-7))
    records.append(_record("c8_affine_uncertified", failures, 0.0))
    return records, certified_points


def _check_fritz_john_group(seed: int, certified_points) -> list[CheckRecord]:
    worst = 0.0
    for prob, point in certified_points:
        fj = check_fritz_john(prob, point)
        worst = max(worst, fj.stationarity_residual)
    records = [_record("c9_fj_residual", worst, 1e-8)]

    spec2 = _spec("euclidean")
    anchor = surface_point(spec2, [0.0, 0.0])
    flat = ConvexRegion.from_sources(
        spec2, ["(x1 - 1)^3"], anchor, spot_check=False
    )
    prob = ProblemSpec(spec2, parse("-x1", 2), flat, anchor)
    point = surface_point(spec2, [1.0, 0.0])
    kkt_cert = check_kkt(prob, point)
    records.append(_record("c9_flat_kkt_rejected", 1.0 if kkt_cert.certified else 0.0, 0.0))
    fj = check_fritz_john(prob, point)
    records.append(_record("c9_flat_fj_residual", fj.stationarity_residual, 1e-8))
    records.append(_record("c9_flat_fj_lambda0", abs(fj.lambda0), 1e-6))
    return records


def _check_solver(seed: int, quick: bool, certified_points) -> list[CheckRecord]:
    worst_d = 0.0
    worst_ncr = -np.inf
    for name, (text, target) in _SOLVE_TARGETS.items():
        pf = parse_problem(text)
        prob = pf.to_problem_spec()
        x_hat, _ = solve(prob)
        x_star = surface_point(pf.manifold, target)
        worst_d = max(worst_d, dist(x_hat, x_star))
        worst_ncr = max(worst_ncr, normal_cone_residual(prob, x_hat, probes=200, seed=seed))
        cert = check_kkt(prob, x_hat)
        if cert.certified:
            certified_points.append((prob, x_hat))
    return [
        _record("c10_solver_distance", worst_d, 1e-4),
        _record("c10_normal_cone", 0.0 if worst_ncr == -np.inf else worst_ncr, 1e-5),
    ]


def _check_cli_contracts(seed: int) -> list[CheckRecord]:
    first = run_all(seed=seed, quick=True, nested=True)
    second = run_all(seed=seed, quick=True, nested=True)
    s1 = json.dumps([dataclasses.asdict(r) for r in first], sort_keys=True)
    s2 = json.dumps([dataclasses.asdict(r) for r in second], sort_keys=True)
    records = [_record("c11_determinism", 0.0 if s1 == s2 else 1.0, 0.0)]

    from .cli import main as cli_main

    mismatches = 0
    with tempfile.TemporaryDirectory() as tmp:
        good = os.path.join(tmp, "disk.prob")
        with open(good, "w", encoding="utf-8") as fh:
            fh.write(DISK_PROBLEM)
        bad = os.path.join(tmp, "bad.prob")
        with open(bad, "w", encoding="utf-8") as fh:
            fh.write("manifold = torus\ndim = 2\n")
        probes = [
            (["solve", good, "--json-only"], 0),
            (["solve", bad, "--json-only"], 2),
            (["separate", good, "--point", "0.1,0.1", "--json-only"], 2),
            (["kkt", good, "--use-start", "--json-only"], 1),
        ]
        for argv, expected in probes:
            buf_out, buf_err = io.StringIO(), io.StringIO()
            with redirect_stdout(buf_out), redirect_stderr(buf_err):
                code = cli_main(argv)
            if code != expected:
                mismatches += 1
    records.append(_record("c11_exit_codes", mismatches, 0.0))
    return records


def run_all(seed: int = 0, quick: bool = False, nested: bool = False) -> list[CheckRecord]:
    """Run every acceptance group; returns one CheckRecord per sub-check.

    quick shrinks the instance counts for smoke runs; nested marks an
    inner self-invocation and skips the CLI/determinism group to keep
    the recursion depth at one.
    """
    records: list[CheckRecord] = []
    records.extend(_check_roundtrip(seed, quick))
    records.extend(_check_distance_convexity(seed, quick))
    c3_records, certified = _check_projection(seed, quick)
    records.extend(c3_records)
    records.extend(_check_oracle(seed, quick))
    records.extend(_check_separation(seed, quick, certified))
    records.extend(_check_supporting_plane(seed, quick))
    records.extend(_check_cone_duality(seed, quick))
    c8_records, certified_points = _check_kkt_instances(seed, quick)
    records.extend(c8_records)
    c10_records = _check_solver(seed, quick, certified_points)
    records.extend(_check_fritz_john_group(seed, certified_points))
    records.extend(c10_records)
    if not nested:
        records.extend(_check_cli_contracts(seed))
    return records

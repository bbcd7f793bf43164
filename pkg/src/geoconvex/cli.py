"""Command-line front end: problem files in, deterministic JSON reports out.

Standard output carries one JSON object per run; human-readable notes go
to standard error unless --json-only.  Exit codes: 0 all checks pass,
1 a certified check failed, 2 input or parse errors, 3 numeric
non-certification (inconclusive).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import time

import numpy as np

from .errors import (
    DegenerateDirection,
    DegenerateProjection,
    EvalDomainError,
    GeoConvexError,
    InvalidPoint,
    InvalidTangent,
    ManifoldMismatch,
    NNLSStalled,
    NotBoundaryPoint,
    NotInSet,
    NumericalBreakdown,
    OutsideProjectionNeighborhood,
    ParseError,
    PointInSet,
    ProblemFileError,
    ProjectionNotCertified,
    SamplingExhausted,
    SeparationNotCertified,
    SupportNotCertified,
)
from .manifolds import Point, log_map, metric_inner, norm, surface_point
from .regions import VI_TOL, project
from .cones import (
    IN_TANGENT_CONE,
    NOT_IN_TANGENT_CONE,
    normal_cone_generators,
    polar_member,
    tangent_cone_member,
    tangent_cone_member_seq,
)
from .separation import SUPPORT_TOL, SET_SUP_TOL, separate, supporting_plane
from .kkt import check_fritz_john, check_kkt, normal_cone_residual, solve
from .problems import ProblemFile, load_problem
from .sampling import random_unit_tangent

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_INPUT = 2
EXIT_INCONCLUSIVE = 3

_INPUT_ERRORS = (
    ProblemFileError,
    ParseError,
    EvalDomainError,
    InvalidPoint,
    InvalidTangent,
    ManifoldMismatch,
    PointInSet,
    NotInSet,
    NotBoundaryPoint,
    OutsideProjectionNeighborhood,
    DegenerateProjection,
    DegenerateDirection,
    OSError,
)
_INCONCLUSIVE_ERRORS = (
    ProjectionNotCertified,
    SupportNotCertified,
    SeparationNotCertified,
    NNLSStalled,
    SamplingExhausted,
    NumericalBreakdown,
)


def _coords_text(coords) -> str:
    return ",".join(repr(float(c)) for c in coords)


def _check(name: str, passed: bool, value: float, tolerance: float) -> dict:
    return {
        "name": name,
        "status": "pass" if passed else "fail",
        "value": float(value),
        "tolerance": float(tolerance),
    }


def _inconclusive(name: str, value: float, tolerance: float) -> dict:
    return {
        "name": name,
        "status": "inconclusive",
        "value": float(value),
        "tolerance": float(tolerance),
    }


def _exit_from_checks(checks: list[dict]) -> int:
    statuses = {c["status"] for c in checks}
    if "fail" in statuses:
        return EXIT_FAIL
    if "inconclusive" in statuses:
        return EXIT_INCONCLUSIVE
    return EXIT_PASS


def _resolve_seed(cli_seed: int | None, file_seed: int) -> int:
    if cli_seed is not None:
        return cli_seed
    env = os.environ.get("GEOCONVEX_SEED")
    if env is not None and env != "":
        try:
            return int(env)
        except ValueError as exc:
            raise ProblemFileError(f"GEOCONVEX_SEED is not an integer: {env!r}") from exc
    return file_seed


def _point_from_flag(text: str, problem: ProblemFile) -> Point:
    try:
        coords = [float(t) for t in text.split(",")]
    except ValueError as exc:
        raise InvalidPoint(f"--point expects comma-separated numbers, got {text!r}") from exc
    return surface_point(problem.manifold, coords)


def _cmd_project(problem: ProblemFile, args, seed: int):
    q = _point_from_flag(args.point, problem)
    result = project(problem.region, q, seed=seed)
    checks = [_check("projection_vi", True, result.vi_residual, VI_TOL)]
    extra = {
        "q_star": _coords_text(result.q_star.coords),
        "distance": result.distance,
        "iterations": result.iterations,
    }
    return checks, extra


def _cmd_separate(problem: ProblemFile, args, seed: int):
    y = _point_from_flag(args.point, problem)
    probes = args.probes or 500
    cert = separate(problem.region, y, probes=probes, seed=seed)
    un = norm(cert.plane.direction)
    checks = [
        _check("separation_set_sup", True, cert.set_sup, SET_SUP_TOL * un),
        _check(
            "separation_point_value",
            abs(cert.point_value - un * un) <= 1e-9 and cert.point_value > 0.0,
            cert.point_value,
            1e-9,
        ),
    ]
    extra = {
        "base": _coords_text(cert.plane.base.coords),
        "direction": _coords_text(cert.plane.direction.coords),
        "margin": cert.margin,
        "probes_used": cert.probes_used,
    }
    return checks, extra


def _cmd_support(problem: ProblemFile, args, seed: int):
    p = _point_from_flag(args.point, problem)
    plane = supporting_plane(problem.region, p, seed=seed)
    probes = args.probes or 500
    worst = -np.inf
    for z in problem.region.sample_interior(probes, seed):
        worst = max(worst, metric_inner(plane.direction, log_map(plane.base, z)))
    checks = [_check("support_certificate", worst <= SUPPORT_TOL, worst, SUPPORT_TOL)]
    extra = {
        "base": _coords_text(plane.base.coords),
        "direction": _coords_text(plane.direction.coords),
        "offset": plane.offset,
    }
    return checks, extra


def _cmd_cone(problem: ProblemFile, args, seed: int):
    p = _point_from_flag(args.point, problem)
    region = problem.region
    probes = args.probes or 200
    rng = np.random.default_rng(seed)
    ncone = normal_cone_generators(region, p)
    counts = {"in": 0, "not_in": 0, "undecided": 0}
    worst_in = -np.inf
    duality_ok = True
    agree = True
    for k in range(probes):
        v = random_unit_tangent(p, rng)
        probe = tangent_cone_member(region, v)
        if probe.verdict == IN_TANGENT_CONE:
            counts["in"] += 1
            for g in ncone.generators:
                gn = norm(g)
                if gn > 0.0:
                    worst_in = max(
                        worst_in, metric_inner(probe.direction, g) / gn
                    )
            if not polar_member(ncone, probe.direction, 1e-6):
                duality_ok = False
        elif probe.verdict == NOT_IN_TANGENT_CONE:
            counts["not_in"] += 1
        else:
            counts["undecided"] += 1
        if k < 50:
            seq = tangent_cone_member_seq(region, v)
            decisive = {IN_TANGENT_CONE, NOT_IN_TANGENT_CONE}
            if (
                probe.verdict in decisive
                and seq.verdict in decisive
                and probe.verdict != seq.verdict
            ):
                agree = False
    worst_value = 0.0 if worst_in == -np.inf else float(worst_in)
    checks = [
        _check("cone_duality_in", duality_ok and worst_value <= 1e-6, worst_value, 1e-6),
        _check("cone_test_agreement", agree, 0.0 if agree else 1.0, 0.0),
    ]
    extra = {
        "probes_in": counts["in"],
        "probes_not_in": counts["not_in"],
        "probes_undecided": counts["undecided"],
        "normal_generators": len(ncone.generators),
    }
    return checks, extra


def _cmd_kkt(problem: ProblemFile, args, seed: int):
    if args.point is None and not args.use_start:
        raise ProblemFileError("kkt needs --point or --use-start")
    point = problem.start if args.use_start else _point_from_flag(args.point, problem)
    spec = problem.to_problem_spec()
    cert = check_kkt(spec, point)
    tol = problem.tolerances
    max_comp = max((abs(c) for c in cert.complementarity), default=0.0)
    checks = [
        _check(
            "kkt_stationarity",
            cert.stationarity_residual <= tol.stationarity_tol,
            cert.stationarity_residual,
            tol.stationarity_tol,
        ),
        _check(
            "kkt_complementarity",
            max_comp <= tol.complementarity_tol,
            max_comp,
            tol.complementarity_tol,
        ),
        _check(
            "kkt_feasible",
            cert.feasible,
            max(g.evaluate(point) for g in problem.region.constraints),
            problem.region.interior_tol,
        ),
    ]
    extra = {
        "multipliers": _coords_text(cert.multipliers) if cert.multipliers else "",
        "lambda0": cert.lambda0,
        "certified": cert.certified,
    }
    if cert.feasible:
        fj = check_fritz_john(spec, point)
        fj_tol = 1e-8 if cert.certified else tol.stationarity_tol
        checks.append(
            _check(
                "fritz_john_residual",
                fj.stationarity_residual <= fj_tol,
                fj.stationarity_residual,
                fj_tol,
            )
        )
        extra["fj_lambda0"] = fj.lambda0
    return checks, extra


def _cmd_solve(problem: ProblemFile, args, seed: int):
    spec = problem.to_problem_spec()
    x, trace = solve(spec)
    tol = problem.tolerances
    if trace:
        stationarity = trace[-1].moved / trace[-1].step
    else:
        stationarity = 0.0
    cert = check_kkt(spec, x)
    max_comp = max((abs(c) for c in cert.complementarity), default=0.0)
    ncr = normal_cone_residual(spec, x, probes=args.probes or 200, seed=seed)
    checks = [
        _check(
            "solver_stationarity",
            stationarity <= tol.stationarity_tol or (trace and trace[-1].moved <= 1e-10),
            stationarity,
            tol.stationarity_tol,
        ),
        _check(
            "kkt_stationarity",
            cert.stationarity_residual <= tol.stationarity_tol,
            cert.stationarity_residual,
            tol.stationarity_tol,
        ),
        _check(
            "kkt_complementarity",
            max_comp <= tol.complementarity_tol,
            max_comp,
            tol.complementarity_tol,
        ),
        _check("normal_cone_residual", ncr <= 1e-5, ncr, 1e-5),
    ]
    extra = {
        "point": _coords_text(x.coords),
        "objective_value": problem.objective.evaluate(x),
        "iterations": len(trace),
    }
    return checks, extra


def _cmd_verify(args, seed: int):
    from .verify import run_all

    records = run_all(seed=seed, quick=args.quick)
    checks = [dataclasses.asdict(r) for r in records]
    extra = {"quick": bool(args.quick)}
    return checks, extra


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="geoconvex",
        description="Geodesic convexity toolkit: projection, separation, cones, KKT.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp, needs_point: bool, needs_file: bool = True):
        if needs_file:
            sp.add_argument("file", help="problem file path")
        sp.add_argument(
            "--point",
            required=needs_point,
            default=None,
            help='comma-separated coordinates, e.g. "1,0,0"',
        )
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--probes", type=int, default=None)
        sp.add_argument("--json-only", action="store_true")

    common(sub.add_parser("project", help="metric projection of --point"), True)
    common(sub.add_parser("separate", help="separating quasi-hyperplane"), True)
    common(sub.add_parser("support", help="supporting plane at a boundary --point"), True)
    common(sub.add_parser("cone", help="tangent/normal cone probes at --point"), True)
    kkt_sp = sub.add_parser("kkt", help="KKT and Fritz-John certificates")
    common(kkt_sp, False)
    kkt_sp.add_argument("--use-start", action="store_true")
    solve_sp = sub.add_parser("solve", help="projected gradient descent, then KKT")
    common(solve_sp, False)
    verify_sp = sub.add_parser("verify", help="run the built-in acceptance suite")
    verify_sp.add_argument("file", nargs="?", default=None, help="ignored; corpus is built in")
    verify_sp.add_argument("--seed", type=int, default=None)
    verify_sp.add_argument("--probes", type=int, default=None)
    verify_sp.add_argument("--json-only", action="store_true")
    verify_sp.add_argument("--quick", action="store_true")
    return parser


def _error_payload(command: str, digest: str, seed, exc: Exception, started: float) -> dict:
    payload = {
        "command": command,
        "input_digest": digest,
        "seed": seed,
        "checks": [],
        "error_type": type(exc).__name__,
        "error": str(exc),
        "wall_time_s": round(time.monotonic() - started, 6),
    }
    offset = getattr(exc, "offset", None)
    if offset is not None:
        payload["offset"] = offset
    line_no = getattr(exc, "line_no", None)
    if line_no is not None:
        payload["line_no"] = line_no
    return payload


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    started = time.monotonic()
    command = args.command
    digest = "builtin"
    seed: int | None = None
    try:
        if command == "verify":
            seed = _resolve_seed(args.seed, 0)
            if args.file and not args.json_only:
                print("note: verify runs on built-in instances; file ignored", file=sys.stderr)
            checks, extra = _cmd_verify(args, seed)
        else:
            problem = load_problem(args.file)
            digest = problem.digest
            seed = _resolve_seed(args.seed, problem.seed)
            handler = {
                "project": _cmd_project,
                "separate": _cmd_separate,
                "support": _cmd_support,
                "cone": _cmd_cone,
                "kkt": _cmd_kkt,
                "solve": _cmd_solve,
            }[command]
            checks, extra = handler(problem, args, seed)
    except _INCONCLUSIVE_ERRORS as exc:
        payload = _error_payload(command, digest, seed, exc, started)
        value = 0.0
        result = getattr(exc, "result", None)
        if result is not None:
            value = float(result.vi_residual)
        elif getattr(exc, "residual", None) is not None:
            value = float(exc.residual)
        payload["checks"] = [_inconclusive("certification", value, 0.0)]
        print(json.dumps(payload, sort_keys=True))
        if not args.json_only:
            print(f"inconclusive: {exc}", file=sys.stderr)
        return EXIT_INCONCLUSIVE
    except _INPUT_ERRORS as exc:
        print(json.dumps(_error_payload(command, digest, seed, exc, started), sort_keys=True))
        if not args.json_only:
            print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except GeoConvexError as exc:
        print(json.dumps(_error_payload(command, digest, seed, exc, started), sort_keys=True))
        if not args.json_only:
            print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    report = {
        "command": command,
        "input_digest": digest,
        "seed": seed,
        "checks": checks,
        "wall_time_s": round(time.monotonic() - started, 6),
    }
    report.update(extra)
    print(json.dumps(report, sort_keys=True))
    if not args.json_only:
        for c in checks:
            print(
                f"{c['name']}: {c['status']} (value {c['value']:.3g}, tolerance {c['tolerance']:.3g})",
                file=sys.stderr,
            )
    return _exit_from_checks(checks)


if __name__ == "__main__":
    raise SystemExit(main())

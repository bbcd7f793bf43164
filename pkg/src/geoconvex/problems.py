"""Problem files: line-oriented key=value text describing one instance.

Format::

    manifold = sphere          # euclidean | sphere | hyperboloid
    dim = 2
    objective = "gdist(0,0,1)^2"
    constraint = "gdist(1,0,0) - 0.5"   # repeatable, one per constraint
    anchor = [1, 0, 0]
    start  = [0.995, 0.0998, 0]
    seed = 0
    stationarity_tol = 1e-5    # optional overrides

Comments run from an unquoted ``#`` to end of line.  Expressions are
double-quoted; coordinate vectors are bracketed.  Anchor and start
coordinates are renormalized onto the embedding surface when they are
within 1e-3 of it.
"""

from __future__ import annotations

import dataclasses
import hashlib

from .errors import ProblemFileError
from .expressions import Expression, parse
from .kkt import ProblemSpec, Tolerances
from .manifolds import ManifoldSpec, Point, surface_point
from .regions import ConvexRegion

_TOLERANCE_KEYS = ("stationarity_tol", "complementarity_tol", "step_init", "max_iters")
_KNOWN_KEYS = _TOLERANCE_KEYS + (
    "manifold",
    "dim",
    "objective",
    "constraint",
    "anchor",
    "start",
    "seed",
    "interior_tol",
)


@dataclasses.dataclass(frozen=True)
class ProblemFile:
    """One parsed instance: geometry, objective, region, start, seed."""

    manifold: ManifoldSpec
    objective: Expression
    objective_source: str
    constraint_sources: tuple[str, ...]
    region: ConvexRegion
    anchor: Point
    start: Point
    seed: int
    tolerances: Tolerances
    digest: str

    def to_problem_spec(self) -> ProblemSpec:
        return ProblemSpec(
            manifold=self.manifold,
            objective=self.objective,
            region=self.region,
            start=self.start,
            tolerances=self.tolerances,
        )


def _strip_comment(line: str) -> str:
    out = []
    quoted = False
    for ch in line:
        if ch == '"':
            quoted = not quoted
        elif ch == "#" and not quoted:
            break
        out.append(ch)
    return "".join(out)


def _parse_vector(text: str, line_no: int) -> list[float]:
    body = text.strip()
    if not (body.startswith("[") and body.endswith("]")):
        raise ProblemFileError("coordinate vectors use [a, b, ...]", line_no=line_no)
    items = body[1:-1].split(",")
    try:
        return [float(item) for item in items]
    except ValueError as exc:
        raise ProblemFileError(f"bad coordinate: {exc}", line_no=line_no) from exc


def _parse_quoted(text: str, line_no: int) -> str:
    body = text.strip()
    if body.startswith('"'):
        if not (body.endswith('"') and len(body) >= 2):
            raise ProblemFileError("unterminated quoted expression", line_no=line_no)
        return body[1:-1]
    return body


def parse_problem(text: str, digest_bytes: bytes | None = None) -> ProblemFile:
    """Parse problem-file text into a validated ProblemFile."""
    raw: dict[str, tuple[str, int]] = {}
    constraints: list[tuple[str, int]] = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        body = _strip_comment(line).strip()
        if not body:
            continue
        key, sep, value = body.partition("=")
        if not sep:
            raise ProblemFileError("expected key = value", line_no=line_no)
        key = key.strip()
        value = value.strip()
        if key not in _KNOWN_KEYS:
            raise ProblemFileError(f"unknown key {key!r}", line_no=line_no)
        if key == "constraint":
            constraints.append((value, line_no))
        elif key in raw:
            raise ProblemFileError(f"duplicate key {key!r}", line_no=line_no)
        else:
            raw[key] = (value, line_no)

    def require(key: str) -> tuple[str, int]:
        if key not in raw:
            raise ProblemFileError(f"missing required key {key!r}", line_no=0)
        return raw[key]

    name, name_line = require("manifold")
    dim_text, dim_line = require("dim")
    try:
        dim = int(dim_text)
    except ValueError as exc:
        raise ProblemFileError("dim must be an integer", line_no=dim_line) from exc
    try:
        spec = ManifoldSpec.from_name(name, dim)
    except Exception as exc:
        raise ProblemFileError(str(exc), line_no=name_line) from exc

    objective_source, _ = require("objective")
    objective_source = _parse_quoted(objective_source, raw["objective"][1])
    objective = parse(objective_source, spec.ambient_dim)
    if not constraints:
        raise ProblemFileError("at least one constraint line is required", line_no=0)
    constraint_sources = tuple(
        _parse_quoted(src, line_no) for src, line_no in constraints
    )
    parsed_constraints = [parse(src, spec.ambient_dim) for src in constraint_sources]

    anchor_text, anchor_line = require("anchor")
    anchor = surface_point(spec, _parse_vector(anchor_text, anchor_line))
    interior_tol = 1e-9
    if "interior_tol" in raw:
        interior_tol = float(raw["interior_tol"][0])
    region = ConvexRegion(spec, parsed_constraints, anchor=anchor, interior_tol=interior_tol)

    if "start" in raw:
        start = surface_point(spec, _parse_vector(*raw["start"]))
    else:
        start = anchor

    seed = 0
    if "seed" in raw:
        seed_text, seed_line = raw["seed"]
        try:
            seed = int(seed_text)
        except ValueError as exc:
            raise ProblemFileError("seed must be an integer", line_no=seed_line) from exc

    defaults = Tolerances()
    overrides = {}
    for key in _TOLERANCE_KEYS:
        if key in raw:
            value_text, line_no = raw[key]
            try:
                overrides[key] = (
                    int(value_text) if key == "max_iters" else float(value_text)
                )
            except ValueError as exc:
                raise ProblemFileError(f"bad value for {key}", line_no=line_no) from exc
    tolerances = dataclasses.replace(defaults, **overrides) if overrides else defaults

    payload = digest_bytes if digest_bytes is not None else text.encode("utf-8")
    return ProblemFile(
        manifold=spec,
        objective=objective,
        objective_source=objective_source,
        constraint_sources=constraint_sources,
        region=region,
        anchor=anchor,
        start=start,
        seed=seed,
        tolerances=tolerances,
        digest=hashlib.sha256(payload).hexdigest(),
    )


def load_problem(path: str) -> ProblemFile:
    """Read and parse a problem file from disk."""
    with open(path, "rb") as handle:
        data = handle.read()
    return parse_problem(data.decode("utf-8"), digest_bytes=data)

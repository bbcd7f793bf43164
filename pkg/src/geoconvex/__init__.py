"""Geodesic convexity toolkit.

Closed-form manifolds (euclidean, sphere, hyperboloid), sublevel-set
regions, metric projection with variational-inequality certificates,
tangent/normal cone probes, separating quasi-hyperplanes, and
first-order optimality certificates, all behind a problem-file CLI.
"""

from .manifolds import (
    Geodesic,
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
    surface_point,
    tangent_basis,
    tangent_project,
)
from .expressions import Expression
from .expressions import parse as parse_expression
from .regions import ConvexRegion, ProjectionResult, project, vi_check
from .cones import (
    ConeInclusionReport,
    ConeProbe,
    GeneratedCone,
    cone_in_cone,
    nonneg_combination,
    normal_cone_generators,
    polar_member,
    tangent_cone_member,
    tangent_cone_member_seq,
)
from .separation import (
    LinearizationReport,
    QuasiHyperplane,
    SeparationCertificate,
    linearize,
    separate,
    supporting_plane,
)
from .kkt import (
    CQReport,
    IterationRecord,
    KKTCertificate,
    ProblemSpec,
    Tolerances,
    check_cq,
    check_fritz_john,
    check_kkt,
    normal_cone_residual,
    solve,
)
from .problems import ProblemFile, load_problem, parse_problem
from . import errors

__all__ = [
    "Geodesic",
    "Kind",
    "ManifoldSpec",
    "Point",
    "TangentVector",
    "convexity_radius_bound",
    "dist",
    "exp_map",
    "log_map",
    "metric_inner",
    "norm",
    "surface_point",
    "tangent_basis",
    "tangent_project",
    "Expression",
    "parse_expression",
    "ConvexRegion",
    "ProjectionResult",
    "project",
    "vi_check",
    "ConeInclusionReport",
    "ConeProbe",
    "GeneratedCone",
    "cone_in_cone",
    "nonneg_combination",
    "normal_cone_generators",
    "polar_member",
    "tangent_cone_member",
    "tangent_cone_member_seq",
    "LinearizationReport",
    "QuasiHyperplane",
    "SeparationCertificate",
    "linearize",
    "separate",
    "supporting_plane",
    "CQReport",
    "IterationRecord",
    "KKTCertificate",
    "ProblemSpec",
    "Tolerances",
    "check_cq",
    "check_fritz_john",
    "check_kkt",
    "normal_cone_residual",
    "solve",
    "ProblemFile",
    "load_problem",
    "parse_problem",
    "errors",
]

__version__ = "0.1.0"

"""Exception taxonomy shared by every module.

Errors that carry a partial result (the best iterate of a failed
certification, the last NNLS iterate) expose it as an attribute so
callers can inspect what the solver actually produced.
"""

from __future__ import annotations


class GeoConvexError(Exception):
    """Base class for all library errors."""


class InvalidPoint(GeoConvexError):
    """Coordinates do not satisfy the embedding invariant of the manifold."""


class InvalidTangent(GeoConvexError):
    """Vector is not tangent at its base point."""


class ManifoldMismatch(GeoConvexError):
    """Operands live on different manifolds."""


class BasePointMismatch(GeoConvexError):
    """Tangent vectors are rooted at different base points."""


class BeyondInjectivityRadius(GeoConvexError):
    """exp/log requested outside the closed-form invertibility range."""


class AnchorNotInterior(GeoConvexError):
    """Region anchor is not strictly feasible."""


class NotGeodesicConvex(GeoConvexError):
    """A constraint failed the chordwise convexity spot check."""


class SamplingExhausted(GeoConvexError):
    """Interior sampling could not produce the requested count."""


class OutsideProjectionNeighborhood(GeoConvexError):
    """Query point violates the projection distance precondition."""


class ProjectionNotCertified(GeoConvexError):
    """Projection finished but the variational-inequality certificate failed.

    The ``result`` attribute holds the uncertified best iterate.
    """

    def __init__(self, message: str, result=None):
        super().__init__(message)
        self.result = result


class DegenerateProjection(GeoConvexError):
    """Candidate projection coincides with the query point."""


class PointInSet(GeoConvexError):
    """Operation requires an exterior point but got a member."""


class NotInSet(GeoConvexError):
    """Operation requires a member of the region."""


class NotBoundaryPoint(GeoConvexError):
    """Operation requires a boundary member."""


class NNLSStalled(GeoConvexError):
    """Active-set NNLS hit its outer iteration cap.

    ``coefficients`` and ``residual`` hold the best iterate found.
    """

    def __init__(self, message: str, coefficients=None, residual=None):
        super().__init__(message)
        self.coefficients = coefficients
        self.residual = residual


class SupportNotCertified(GeoConvexError):
    """Supporting plane construction failed its interior-probe certificate.

    ``diagnostics`` is a dict with the limiting-sequence state.
    """

    def __init__(self, message: str, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class SeparationNotCertified(GeoConvexError):
    """Separation certificate exceeded its probe tolerance.

    ``certificate`` holds the measured (failing) values.
    """

    def __init__(self, message: str, certificate=None):
        super().__init__(message)
        self.certificate = certificate


class DegenerateDirection(GeoConvexError):
    """Quasi-hyperplane direction has zero norm."""


class NumericalBreakdown(GeoConvexError):
    """Non-finite value encountered at an iterate.

    ``point`` holds the offending iterate when known.
    """

    def __init__(self, message: str, point=None):
        super().__init__(message)
        self.point = point


class EvalDomainError(GeoConvexError):
    """Expression evaluation hit a domain violation (log, sqrt, division, power).

    ``offset`` is the character offset of the offending node in the source.
    """

    def __init__(self, message: str, offset: int = 0):
        super().__init__(message)
        self.offset = offset


class ParseError(GeoConvexError):
    """Expression source is malformed.

    ``offset`` points at the offending character, ``expected`` describes
    what the parser wanted, ``excerpt`` quotes the surrounding source.
    """

    def __init__(self, message: str, offset: int, expected: str = "", excerpt: str = ""):
        super().__init__(message)
        self.offset = offset
        self.expected = expected
        self.excerpt = excerpt


class ProblemFileError(GeoConvexError):
    """Problem file is missing keys or has a malformed line.

    ``line_no`` is 1-based when known.
    """

    def __init__(self, message: str, line_no: int | None = None):
        super().__init__(message)
        self.line_no = line_no

"""Seeded random points and tangent directions.

Shared by the verification corpus and the test suite so that every
randomized check is reproducible from a single integer seed.
"""

from __future__ import annotations

import numpy as np

from .manifolds import Kind, ManifoldSpec, Point, TangentVector, exp_map, norm, tangent_project


def random_point(spec: ManifoldSpec, rng: np.random.Generator, spread: float = 1.0) -> Point:
    """Draw a point; ``spread`` bounds the distance from the origin/apex."""
    if spec.kind is Kind.EUCLIDEAN:
        return Point(spec, spread * rng.uniform(-1.0, 1.0, spec.ambient_dim))
    if spec.kind is Kind.SPHERE:
        w = rng.standard_normal(spec.ambient_dim)
        while float(np.linalg.norm(w)) < 1e-12:  # pragma: no cover
            w = rng.standard_normal(spec.ambient_dim)
        return Point(spec, w / np.linalg.norm(w))
    apex = Point(spec, np.eye(spec.ambient_dim)[0])
    v = random_unit_tangent(apex, rng)
    return exp_map(v.scaled(spread * rng.uniform(0.0, 1.0)))


def random_unit_tangent(p: Point, rng: np.random.Generator) -> TangentVector:
    """Unit-norm tangent vector at p with rotation-invariant direction."""
    while True:
        v = tangent_project(p, rng.standard_normal(p.manifold.ambient_dim))
        n = norm(v)
        if n > 1e-12:
            return v.scaled(1.0 / n)

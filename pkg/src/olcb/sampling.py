"""
Uniform samples from μ^K, the normalized Lebesgue measure on a body.

Balls and ellipsoids sample directly, planar and spatial polytopes through a
volume-weighted fan of simplices, everything else by rejection in the box
[-R_K, R_K]^n.
"""

import logging

import numpy as np

from .bodies import Ball, Body, Ellipsoid, Polytope, SupportSampled

log = logging.getLogger(__name__)

REJECTION_BATCH = 100_000


def sample_ball(dim: int, count: int, rng: np.random.Generator, radius: float = 1.0) -> np.ndarray:
    g = rng.standard_normal((count, dim))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return radius * g * rng.uniform(size=(count, 1)) ** (1.0 / dim)


def sample_simplices(simplices: np.ndarray, count: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform samples from a union of (n+1)-point simplices given as an (s, n+1, n) array."""
    edges = simplices[:, 1:, :] - simplices[:, :1, :]
    weights = np.abs(np.linalg.det(edges))
    pick = rng.choice(len(simplices), size=count, p=weights / weights.sum())
    bary = rng.dirichlet(np.ones(simplices.shape[1]), size=count)
    return np.einsum("ij,ijk->ik", bary, simplices[pick])


def fan_simplices(polytope: Polytope) -> np.ndarray:
    """Boundary facets coned to the vertex mean, as an (s, n+1, n) array."""
    facets = polytope.vertices[polytope.simplices]
    apex = np.broadcast_to(polytope.centroid_hint, (len(facets), 1, polytope.dim))
    return np.concatenate([apex, facets], axis=1)


def sample_rejection(body: Body, count: int, rng: np.random.Generator) -> np.ndarray:
    lo, hi = body.bounding_box()
    kept: list[np.ndarray] = []
    have = 0
    while have < count:
        pts = rng.uniform(lo, hi, size=(REJECTION_BATCH, body.dim))
        pts = pts[body.contains(pts)]
        kept.append(pts)
        have += len(pts)
    return np.vstack(kept)[:count]


def sample_uniform(body: Body, count: int, seed: int) -> np.ndarray:
    """`count` points drawn uniformly from `body` with a seeded generator."""
    rng = np.random.default_rng(seed)
    match body:
        case Ball():
            return sample_ball(body.dim, count, rng, body.radius)
        case Ellipsoid():
            return sample_ball(body.dim, count, rng) @ body.factor.T
        case Polytope() if body.dim <= 3:
            return sample_simplices(fan_simplices(body), count, rng)
        case SupportSampled() | Polytope():
            log.debug("rejection sampling %d points in dimension %d", count, body.dim)
            return sample_rejection(body, count, rng)
        case _:
            raise TypeError(f"cannot sample from {type(body).__name__}")

#!/usr/bin/env python3
# -*- coding: UTF-8 -*-
"""
Star and convex bodies with the origin in their interior.

Four representations share one interface: exact polytopes (vertex list plus
derived halfspaces), Euclidean balls, origin-centered ellipsoids, and bodies
known only through support values on a direction grid. Every body is
immutable once built, so queries are safe to run from many workers.
"""

import json
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from enum import StrEnum
from functools import lru_cache
from math import gamma, pi
from pathlib import Path

import numpy as np
from numpy.typing import ArrayLike
from scipy.spatial import ConvexHull, QhullError

from .clipping import fan_volume, halfspace_vertices, shoelace, unique_edges
from .config import GEOM_ATOL, get_mc_samples, get_seed
from .errors import (
    BodyValidationError,
    DegenerateBody,
    DimensionUnsupported,
    DomainError,
    OriginNotInterior,
    SingularMap,
)

log = logging.getLogger(__name__)

UNIT_TOL = 1e-12
SINGULAR_TOL = 1e-12
FULL_CHECK_LIMIT = 4_000_000


def unit_ball_volume(dim: int) -> float:
    """ω_n = π^{n/2} / Γ(1 + n/2)."""
    return pi ** (dim / 2) / gamma(1 + dim / 2)


@dataclass(frozen=True, slots=True, eq=False)
class Direction:
    """A unit vector; construction fails if |‖u‖ − 1| > 1e-12."""

    u: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float)
        if abs(np.linalg.norm(u) - 1.0) > UNIT_TOL:
            raise DomainError(f"direction is not a unit vector: |u| = {np.linalg.norm(u)!r}")
        object.__setattr__(self, "u", u)

    @classmethod
    def normalized(cls, x: ArrayLike) -> "Direction":
        x = np.asarray(x, dtype=float)
        norm = np.linalg.norm(x)
        if norm == 0.0:
            raise DomainError("cannot normalize the zero vector")
        return cls(x / norm)


@dataclass(frozen=True, slots=True, eq=False)
class LinearMap:
    """An element of GL(n)."""

    matrix: np.ndarray
    det: float = field(init=False)

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.matrix, dtype=float))
        if a.shape[0] != a.shape[1]:
            raise SingularMap(f"linear map must be square, got shape {a.shape}")
        det = float(np.linalg.det(a))
        if abs(det) <= SINGULAR_TOL:
            raise SingularMap(f"|det A| = {abs(det):.3e} is not invertible")
        object.__setattr__(self, "matrix", a)
        object.__setattr__(self, "det", det)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def transpose(self) -> np.ndarray:
        return self.matrix.T

    def is_similarity(self, atol: float = 1e-12) -> float | None:
        """Scale c if A Aᵀ = c² I, else None."""
        gram = self.matrix @ self.matrix.T
        c2 = gram[0, 0]
        if np.allclose(gram, c2 * np.eye(self.dim), atol=atol * max(1.0, c2)):
            return float(np.sqrt(c2))
        return None

    @classmethod
    def rotation(cls, theta: float) -> "LinearMap":
        c, s = np.cos(theta), np.sin(theta)
        return cls(np.array([[c, -s], [s, c]]))

    @classmethod
    def scaling(cls, *factors: float) -> "LinearMap":
        return cls(np.diag(factors))

    @classmethod
    def shear(cls, dim: int, i: int, j: int, amount: float) -> "LinearMap":
        a = np.eye(dim)
        a[i, j] = amount
        return cls(a)


class VolumeMethod(StrEnum):
    EXACT = "exact"
    MONTE_CARLO = "monte_carlo"


@dataclass(frozen=True, slots=True)
class VolumeEstimate:
    value: float
    stderr: float = 0.0
    method: VolumeMethod = VolumeMethod.EXACT
    samples: int = 0

    def __float__(self) -> float:
        return self.value


def monte_carlo_volume(
    body: "Body", samples: int | None = None, seed: int | None = None
) -> VolumeEstimate:
    """Rejection sampling in the bounding box with a 1σ binomial error."""
    samples = samples or get_mc_samples()
    rng = np.random.default_rng(get_seed() if seed is None else seed)
    lo, hi = body.bounding_box()
    box = float(np.prod(hi - lo))
    hits = 0
    batch = 200_000
    remaining = samples
    while remaining > 0:
        k = min(batch, remaining)
        pts = rng.uniform(lo, hi, size=(k, body.dim))
        hits += int(np.count_nonzero(body.contains(pts)))
        remaining -= k
    p = hits / samples
    return VolumeEstimate(
        value=box * p,
        stderr=box * np.sqrt(p * (1.0 - p) / samples),
        method=VolumeMethod.MONTE_CARLO,
        samples=samples,
    )


class Body(ABC):
    """Common interface of every body representation."""

    dim: int

    @abstractmethod
    def support(self, x: ArrayLike) -> float:
        """h_K(x) = max_{y∈K} x·y."""

    def support_many(self, xs: np.ndarray) -> np.ndarray:
        return np.array([self.support(x) for x in xs])

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        """Axis-aligned box from the support values at ±e_i; needs no interior origin."""
        eye = np.eye(self.dim)
        return -self.support_many(-eye), self.support_many(eye)

    @abstractmethod
    def radial(self, u: ArrayLike) -> float:
        """ρ_K(u) = max{λ > 0 : λu ∈ K}."""

    @abstractmethod
    def radii(self) -> tuple[float, float]:
        """(r_K, R_K): min and max of the radial function."""

    @abstractmethod
    def volume(self, method: VolumeMethod | None = None) -> VolumeEstimate: ...

    @abstractmethod
    def apply_linear(self, a: LinearMap) -> "Body": ...

    @abstractmethod
    def contains(self, points: np.ndarray) -> np.ndarray:
        """Membership mask for an (m, n) array of points."""

    @abstractmethod
    def to_dict(self) -> dict: ...

    @property
    def kind(self) -> str:
        return type(self).__name__.lower()

    def scaled(self, c: float) -> "Body":
        return self.apply_linear(LinearMap(c * np.eye(self.dim)))

    def _check_linear(self, a: LinearMap) -> None:
        if a.dim != self.dim:
            raise DomainError(f"map of dimension {a.dim} applied to a body of dimension {self.dim}")


@dataclass(frozen=True, eq=False)
class Ball(Body):
    dim: int
    radius: float = 1.0

    def __post_init__(self):
        if self.dim < 1:
            raise BodyValidationError(f"dimension must be positive, got {self.dim}")
        if not self.radius > 0:
            raise OriginNotInterior(f"ball radius must be positive, got {self.radius}")

    def support(self, x: ArrayLike) -> float:
        return self.radius * float(np.linalg.norm(x))

    def support_many(self, xs: np.ndarray) -> np.ndarray:
        return self.radius * np.linalg.norm(xs, axis=1)

    def radial(self, u: ArrayLike) -> float:
        return self.radius / float(np.linalg.norm(u))

    def radii(self) -> tuple[float, float]:
        return self.radius, self.radius

    def volume(self, method: VolumeMethod | None = None) -> VolumeEstimate:
        if method == VolumeMethod.MONTE_CARLO:
            return monte_carlo_volume(self)
        return VolumeEstimate(unit_ball_volume(self.dim) * self.radius**self.dim)

    def apply_linear(self, a: LinearMap) -> Body:
        self._check_linear(a)
        c = a.is_similarity()
        if c is not None:
            return Ball(self.dim, self.radius * c)
        return Ellipsoid(self.radius**2 * (a.matrix @ a.matrix.T))

    def contains(self, points: np.ndarray) -> np.ndarray:
        return np.linalg.norm(points, axis=1) <= self.radius + GEOM_ATOL

    def to_dict(self) -> dict:
        return {"type": "ball", "dim": self.dim, "radius": self.radius}


@dataclass(frozen=True, eq=False)
class Ellipsoid(Body):
    """{y : yᵀ M⁻¹ y ≤ 1} for a positive-definite shape matrix M."""

    shape: np.ndarray
    dim: int = field(init=False)
    _inverse: np.ndarray = field(init=False, repr=False)
    _chol: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        m = np.atleast_2d(np.asarray(self.shape, dtype=float))
        if m.shape[0] != m.shape[1]:
            raise BodyValidationError(f"shape matrix must be square, got {m.shape}")
        if not np.allclose(m, m.T, atol=GEOM_ATOL):
            raise BodyValidationError("shape matrix must be symmetric")
        m = (m + m.T) / 2.0
        try:
            chol = np.linalg.cholesky(m)
        except np.linalg.LinAlgError as err:
            raise OriginNotInterior("shape matrix must be positive definite") from err
        object.__setattr__(self, "shape", m)
        object.__setattr__(self, "dim", m.shape[0])
        object.__setattr__(self, "_inverse", np.linalg.inv(m))
        object.__setattr__(self, "_chol", chol)

    @property
    def factor(self) -> np.ndarray:
        """Lower-triangular L with E = L·B."""
        return self._chol

    def support(self, x: ArrayLike) -> float:
        x = np.asarray(x, dtype=float)
        return float(np.sqrt(x @ self.shape @ x))

    def support_many(self, xs: np.ndarray) -> np.ndarray:
        return np.sqrt(np.einsum("ij,jk,ik->i", xs, self.shape, xs))

    def radial(self, u: ArrayLike) -> float:
        u = np.asarray(u, dtype=float)
        return float(1.0 / np.sqrt(u @ self._inverse @ u))

    def radii(self) -> tuple[float, float]:
        eig = np.linalg.eigvalsh(self.shape)
        return float(np.sqrt(eig[0])), float(np.sqrt(eig[-1]))

    def volume(self, method: VolumeMethod | None = None) -> VolumeEstimate:
        if method == VolumeMethod.MONTE_CARLO:
            return monte_carlo_volume(self)
        return VolumeEstimate(unit_ball_volume(self.dim) * float(np.sqrt(np.linalg.det(self.shape))))

    def apply_linear(self, a: LinearMap) -> Body:
        self._check_linear(a)
        return Ellipsoid(a.matrix @ self.shape @ a.matrix.T)

    def contains(self, points: np.ndarray) -> np.ndarray:
        q = np.einsum("ij,jk,ik->i", points, self._inverse, points)
        return q <= 1.0 + GEOM_ATOL

    def to_dict(self) -> dict:
        return {"type": "ellipsoid", "dim": self.dim, "shape": self.shape.tolist()}


@dataclass(frozen=True, eq=False)
class Polytope(Body):
    """Convex hull of a vertex list, with its facet halfspaces a_i·y ≤ b_i (|a_i| = 1).

    In the plane the vertices are kept in counterclockwise order. With
    `check_origin=False` the origin may lie outside or on the boundary; such
    polytopes support volume and symmetrization but not radial queries.
    """

    vertices: np.ndarray
    check_origin: bool = True
    dim: int = field(init=False)
    normals: np.ndarray = field(init=False, repr=False)
    offsets: np.ndarray = field(init=False, repr=False)
    simplices: np.ndarray = field(init=False, repr=False)
    edges: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.vertices, dtype=float))
        n = pts.shape[1]
        if n < 2:
            raise DimensionUnsupported("polytopes need dimension >= 2")
        if len(pts) <= n:
            raise DegenerateBody(f"{len(pts)} vertices cannot span dimension {n}")
        try:
            hull = ConvexHull(pts)
        except QhullError as err:
            raise DegenerateBody("vertex set is affinely dependent") from err

        vertices = pts[hull.vertices]
        index = {int(v): i for i, v in enumerate(hull.vertices)}
        simplices = np.vectorize(index.__getitem__)(hull.simplices)
        normals, offsets = _facet_halfspaces(hull.equations)

        bad = np.flatnonzero(offsets <= GEOM_ATOL)
        if bad.size and self.check_origin:
            raise OriginNotInterior("halfspace offset is not strictly positive", int(bad[0]))

        object.__setattr__(self, "vertices", vertices)
        object.__setattr__(self, "dim", n)
        object.__setattr__(self, "normals", normals)
        object.__setattr__(self, "offsets", offsets)
        object.__setattr__(self, "simplices", simplices)
        object.__setattr__(self, "edges", unique_edges(simplices))
        self._check_representations()

    def _check_representations(self) -> None:
        vertices = self.vertices
        if len(vertices) * len(self.offsets) > FULL_CHECK_LIMIT:
            vertices = vertices[:: max(1, len(vertices) // 256)]
        slack = vertices @ self.normals.T - self.offsets
        worst = np.max(slack, axis=1)
        bad = np.flatnonzero(worst > 1e3 * GEOM_ATOL * max(1.0, float(self.offsets.max())))
        if bad.size:
            raise BodyValidationError("vertex violates a facet halfspace", int(bad[0]))
        touching = np.isclose(slack, 0.0, atol=1e-7 * max(1.0, float(self.offsets.max())))
        idle = np.flatnonzero(~touching.any(axis=0))
        if idle.size and len(vertices) == len(self.vertices):
            raise BodyValidationError("halfspace does not support the vertex set", int(idle[0]))

    def support(self, x: ArrayLike) -> float:
        return float(np.max(self.vertices @ np.asarray(x, dtype=float)))

    def support_many(self, xs: np.ndarray) -> np.ndarray:
        return np.max(xs @ self.vertices.T, axis=1)

    def _require_origin(self) -> None:
        if self.offsets.min() <= GEOM_ATOL:
            raise OriginNotInterior("origin is not interior", int(np.argmin(self.offsets)))

    def radial(self, u: ArrayLike) -> float:
        self._require_origin()
        u = np.asarray(u, dtype=float)
        au = self.normals @ u
        positive = au > 0
        return float(np.min(self.offsets[positive] / au[positive]))

    def radii(self) -> tuple[float, float]:
        self._require_origin()
        return float(self.offsets.min()), float(np.linalg.norm(self.vertices, axis=1).max())

    @property
    def centroid_hint(self) -> np.ndarray:
        """Vertex mean: an interior point, not the center of mass."""
        return self.vertices.mean(axis=0)

    def volume(self, method: VolumeMethod | None = None) -> VolumeEstimate:
        if method == VolumeMethod.MONTE_CARLO:
            return monte_carlo_volume(self)
        if self.dim == 2:
            return VolumeEstimate(abs(shoelace(self.vertices)))
        if self.dim == 3:
            return VolumeEstimate(fan_volume(self.vertices, self.simplices, self.centroid_hint))
        if method == VolumeMethod.EXACT:
            raise DimensionUnsupported(f"exact polytope volume needs n <= 3, got n = {self.dim}")
        return monte_carlo_volume(self)

    def apply_linear(self, a: LinearMap) -> Body:
        self._check_linear(a)
        return Polytope(self.vertices @ a.matrix.T, self.check_origin)

    def contains(self, points: np.ndarray) -> np.ndarray:
        return np.all(points @ self.normals.T <= self.offsets + GEOM_ATOL, axis=1)

    def to_dict(self) -> dict:
        data = {"type": "polytope", "dim": self.dim, "vertices": self.vertices.tolist()}
        if not self.check_origin:
            data["check_origin"] = False
        return data


def _facet_halfspaces(equations: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Merge the coplanar triangles qhull reports into one halfspace per facet."""
    normals = equations[:, :-1]
    norms = np.linalg.norm(normals, axis=1, keepdims=True)
    normals = normals / norms
    offsets = -equations[:, -1] / norms[:, 0]
    keys = np.round(np.column_stack([normals, offsets]), 9)
    _, first = np.unique(keys, axis=0, return_index=True)
    first.sort()
    return normals[first], offsets[first]


@dataclass(frozen=True, eq=False)
class SupportSampled(Body):
    """A convex body known by its support values on a direction grid.

    The body is taken to be the convex closure ∩_i {y : u_i·y ≤ h_i}.
    `grid_resolution` is the largest angle between a grid direction and its nearest neighbour.
    """

    directions: np.ndarray
    values: np.ndarray
    dim: int = field(init=False)
    grid_resolution: float = field(init=False)
    _vertices: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        u = np.atleast_2d(np.asarray(self.directions, dtype=float))
        h = np.asarray(self.values, dtype=float)
        if len(u) != len(h):
            raise BodyValidationError(f"{len(u)} directions but {len(h)} support values")
        off_unit = np.flatnonzero(np.abs(np.linalg.norm(u, axis=1) - 1.0) > UNIT_TOL)
        if off_unit.size:
            raise BodyValidationError("grid direction is not a unit vector", int(off_unit[0]))
        bad = np.flatnonzero(h <= GEOM_ATOL)
        if bad.size:
            raise OriginNotInterior("support value is not strictly positive", int(bad[0]))
        try:
            vertices = halfspace_vertices(u, h)
        except QhullError as err:
            raise BodyValidationError("support samples do not bound a body") from err
        gram = np.clip(u @ u.T, -1.0, 1.0)
        np.fill_diagonal(gram, -1.0)
        resolution = float(np.max(np.arccos(gram.max(axis=1))))

        object.__setattr__(self, "directions", u)
        object.__setattr__(self, "values", h)
        object.__setattr__(self, "dim", u.shape[1])
        object.__setattr__(self, "grid_resolution", resolution)
        object.__setattr__(self, "_vertices", vertices)

    @classmethod
    def from_body(cls, body: Body, directions: np.ndarray) -> "SupportSampled":
        return cls(directions, body.support_many(directions))

    @property
    def vertices(self) -> np.ndarray:
        return self._vertices

    def support(self, x: ArrayLike) -> float:
        return float(np.max(self._vertices @ np.asarray(x, dtype=float)))

    def support_many(self, xs: np.ndarray) -> np.ndarray:
        return np.max(xs @ self._vertices.T, axis=1)

    def radial(self, u: ArrayLike) -> float:
        u = np.asarray(u, dtype=float)
        au = self.directions @ u
        positive = au > 0
        return float(np.min(self.values[positive] / au[positive]))

    def radii(self) -> tuple[float, float]:
        rho = np.array([self.radial(u) for u in self.directions])
        return float(rho.min()), float(np.linalg.norm(self._vertices, axis=1).max())

    def volume(self, method: VolumeMethod | None = None) -> VolumeEstimate:
        if method == VolumeMethod.MONTE_CARLO:
            return monte_carlo_volume(self)
        if self.dim <= 3:
            return self.to_polytope().volume(VolumeMethod.EXACT)
        if method == VolumeMethod.EXACT:
            raise DimensionUnsupported(f"exact sampled-body volume needs n <= 3, got n = {self.dim}")
        return monte_carlo_volume(self)

    def apply_linear(self, a: LinearMap) -> Body:
        self._check_linear(a)
        return SupportSampled(self.directions, self.support_many(self.directions @ a.matrix))

    def contains(self, points: np.ndarray) -> np.ndarray:
        return np.all(points @ self.directions.T <= self.values + GEOM_ATOL, axis=1)

    def to_polytope(self) -> Polytope:
        return Polytope(self._vertices)

    def to_dict(self) -> dict:
        return {
            "type": "support_sampled",
            "dim": self.dim,
            "directions": self.directions.tolist(),
            "values": self.values.tolist(),
        }


def support(body: Body, u: ArrayLike) -> float:
    return body.support(u)


def radial(body: Body, u: ArrayLike) -> float:
    return body.radial(Direction(np.asarray(u, dtype=float)).u)


def inradius_outradius(body: Body) -> tuple[float, float]:
    return body.radii()


def volume(body: Body, method: VolumeMethod | None = None) -> VolumeEstimate:
    return body.volume(method)


@lru_cache(maxsize=512)
def cached_volume_estimate(body: Body) -> VolumeEstimate:
    """Default-method volume with its error, memoized per body instance."""
    return body.volume()


def apply_linear(body: Body, a: LinearMap | ArrayLike) -> Body:
    if not isinstance(a, LinearMap):
        a = LinearMap(np.asarray(a, dtype=float))
    return body.apply_linear(a)


def hausdorff_distance(k: Body, l: Body, directions: np.ndarray) -> float:
    """max_u |h_K(u) − h_L(u)| over the grid."""
    return float(np.max(np.abs(k.support_many(directions) - l.support_many(directions))))


def radial_distance(k: Body, l: Body, directions: np.ndarray) -> float:
    """max_u |ρ_K(u) − ρ_L(u)| over the grid."""
    return float(max(abs(k.radial(u) - l.radial(u)) for u in directions))


def volume_matched_ball(body: Body) -> Ball:
    """Origin-centered ball with |B| = |K|."""
    vol = body.volume().value
    return Ball(body.dim, (vol / unit_ball_volume(body.dim)) ** (1.0 / body.dim))


def regular_polygon(k: int, radius: float = 1.0, phase: float = 0.0) -> Polytope:
    theta = phase + 2.0 * np.pi * np.arange(k) / k
    return Polytope(radius * np.column_stack([np.cos(theta), np.sin(theta)]))


def ball(dim: int, radius: float = 1.0) -> Ball:
    return Ball(dim, radius)


def ellipsoid(semi_axes: ArrayLike, rotation: ArrayLike | None = None) -> Ellipsoid:
    """Q diag(a²) Qᵀ from semi-axes a and an optional orthogonal Q."""
    axes = np.asarray(semi_axes, dtype=float)
    q = np.eye(len(axes)) if rotation is None else np.asarray(rotation, dtype=float)
    return Ellipsoid(q @ np.diag(axes**2) @ q.T)


def polytope(vertices: ArrayLike, check_origin: bool = True) -> Polytope:
    return Polytope(np.asarray(vertices, dtype=float), check_origin)


def scaled(body: Body, c: float) -> Body:
    return body.scaled(c)


def cube(dim: int, half_width: float = 1.0) -> Polytope:
    corners = np.array(np.meshgrid(*[[-1.0, 1.0]] * dim, indexing="ij")).reshape(dim, -1).T
    return Polytope(half_width * corners)


def body_from_dict(data: dict) -> Body:
    """Build a body from the JSON body schema, reporting the first violation."""
    kind = data.get("type")
    dim = data.get("dim")
    if not isinstance(dim, int) or dim < 1:
        raise BodyValidationError(f"'dim' must be a positive integer, got {dim!r}")
    match kind:
        case "ball":
            return Ball(dim, float(data.get("radius", 1.0)))
        case "ellipsoid":
            shape = np.asarray(data["shape"], dtype=float)
            if shape.shape != (dim, dim):
                raise BodyValidationError(f"'shape' must be {dim}x{dim}, got {shape.shape}")
            return Ellipsoid(shape)
        case "polytope":
            vertices = [np.asarray(v, dtype=float) for v in data.get("vertices", [])]
            for i, v in enumerate(vertices):
                if v.shape != (dim,):
                    raise BodyValidationError(f"vertex has {v.size} coordinates, expected {dim}", i)
            return Polytope(np.array(vertices), bool(data.get("check_origin", True)))
        case "support_sampled":
            return SupportSampled(np.asarray(data["directions"]), np.asarray(data["values"]))
        case _:
            raise BodyValidationError(f"unknown body type {kind!r}")


def load_body(source: str | Path | dict) -> Body:
    if isinstance(source, dict):
        return body_from_dict(source)
    with open(source) as f:
        data = json.load(f)
    log.debug("loaded %s body from %s", data.get("type"), source)
    return body_from_dict(data)


def dump_body(body: Body, path: str | Path | None = None) -> dict:
    data = body.to_dict()
    if path is not None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as f:
            json.dump(data, f, indent=2)
    return data

"""Seeded generators of test bodies."""

import logging
from dataclasses import dataclass

import numpy as np

from .bodies import Ball, Body, Ellipsoid, LinearMap, Polytope, regular_polygon
from .errors import BodyValidationError, ConfigError
from .grids import random_directions

log = logging.getLogger(__name__)

RADIUS_RANGE = (0.3, 1.0)
MAX_ATTEMPTS = 1000


@dataclass(frozen=True, slots=True)
class CorpusEntry:
    body_id: str
    body: Body


def random_polygon(rng: np.random.Generator, vertex_count: int, inradius_floor: float = 0.1) -> Polytope:
    """Sorted uniform angles with radii in [0.3, 1], hulled; retried until r_K >= floor."""
    for _ in range(MAX_ATTEMPTS):
        theta = np.sort(rng.uniform(0.0, 2.0 * np.pi, size=vertex_count))
        radii = rng.uniform(*RADIUS_RANGE, size=vertex_count)
        try:
            poly = Polytope(radii[:, None] * np.column_stack([np.cos(theta), np.sin(theta)]))
        except BodyValidationError:
            continue
        if poly.radii()[0] >= inradius_floor:
            return poly
    raise ConfigError(f"no polygon with inradius >= {inradius_floor} after {MAX_ATTEMPTS} draws")


def random_polytope(rng: np.random.Generator, vertex_count: int, inradius_floor: float = 0.1) -> Polytope:
    """Spatial analogue of `random_polygon`: random directions with radii in [0.3, 1]."""
    for _ in range(MAX_ATTEMPTS):
        dirs = random_directions(3, vertex_count, int(rng.integers(2**31)))
        radii = rng.uniform(*RADIUS_RANGE, size=vertex_count)
        try:
            poly = Polytope(radii[:, None] * dirs)
        except BodyValidationError:
            continue
        if poly.radii()[0] >= inradius_floor:
            return poly
    raise ConfigError(f"no polytope with inradius >= {inradius_floor} after {MAX_ATTEMPTS} draws")


def random_ellipsoid(rng: np.random.Generator, dim: int) -> Ellipsoid:
    """Rotated ellipsoid with semi-axes in [0.4, 1.5]."""
    q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    axes = rng.uniform(0.4, 1.5, size=dim)
    return Ellipsoid(q @ np.diag(axes**2) @ q.T)


def random_linear_maps(rng: np.random.Generator, dim: int, count: int) -> list[tuple[str, LinearMap]]:
    """Cycle through rotations, anisotropic scalings and shears."""
    maps: list[tuple[str, LinearMap]] = []
    for i in range(count):
        match i % 3:
            case 0:
                q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
                maps.append(("rotation", LinearMap(q * np.sign(np.diag(r)))))
            case 1:
                maps.append(("scaling", LinearMap(np.diag(rng.uniform(0.5, 2.0, size=dim)))))
            case _:
                i_, j_ = rng.choice(dim, size=2, replace=False)
                maps.append(("shear", LinearMap.shear(dim, int(i_), int(j_), float(rng.uniform(-1.0, 1.0)))))
    return maps


def generate(
    kind: str,
    count: int,
    vertex_count: int,
    seed: int,
    inradius_floor: float = 0.1,
    dim: int = 2,
) -> list[CorpusEntry]:
    rng = np.random.default_rng(seed)
    match kind:
        case "random_polygon":
            make = random_polygon
        case "random_polytope":
            make = random_polytope
        case _:
            raise ConfigError(f"unknown generator kind {kind!r}")
    if kind == "random_polygon" and dim != 2:
        raise ConfigError("random_polygon generates planar bodies only")
    entries = [CorpusEntry(f"{kind}-{i:04d}", make(rng, vertex_count, inradius_floor)) for i in range(count)]
    log.debug("generated %d %s bodies from seed %d", count, kind, seed)
    return entries


def reference_bodies(
    dim: int, seed: int, ellipses: int = 0, regular: tuple[int, ...] = (), ball: bool = True
) -> list[CorpusEntry]:
    rng = np.random.default_rng(seed + 1)
    entries = [CorpusEntry("ball", Ball(dim))] if ball else []
    entries += [CorpusEntry(f"ellipsoid-{i:02d}", random_ellipsoid(rng, dim)) for i in range(ellipses)]
    if dim == 2:
        entries += [CorpusEntry(f"regular-{k:03d}", regular_polygon(k)) for k in regular]
    return entries

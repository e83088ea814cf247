"""
Deterministic direction grids on the unit sphere.

Every grid here is reproducible without a seed except `random_directions`,
which takes one explicitly.
"""

from functools import cache

import numpy as np

from .errors import DimensionUnsupported, DomainError

GOLDEN_ANGLE = np.pi * (3.0 - np.sqrt(5.0))


def uniform_angles(size: int, offset: float = 0.0) -> np.ndarray:
    """`size` unit vectors in the plane at equally spaced angles, starting at `offset`."""
    if size < 3:
        raise DomainError(f"planar grid needs at least 3 directions, got {size}")
    theta = offset + 2.0 * np.pi * np.arange(size) / size
    return np.column_stack([np.cos(theta), np.sin(theta)])


def fibonacci_sphere(size: int) -> np.ndarray:
    """Low-discrepancy Fibonacci lattice on S^2."""
    if size < 4:
        raise DomainError(f"spherical grid needs at least 4 directions, got {size}")
    i = np.arange(size)
    z = 1.0 - (2.0 * i + 1.0) / size
    r = np.sqrt(1.0 - z * z)
    theta = GOLDEN_ANGLE * i
    return np.column_stack([r * np.cos(theta), r * np.sin(theta), z])


def _icosahedron() -> tuple[np.ndarray, list[tuple[int, int, int]]]:
    t = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array(
        [
            [-1, t, 0],
            [1, t, 0],
            [-1, -t, 0],
            [1, -t, 0],
            [0, -1, t],
            [0, 1, t],
            [0, -1, -t],
            [0, 1, -t],
            [t, 0, -1],
            [t, 0, 1],
            [-t, 0, -1],
            [-t, 0, 1],
        ],
        dtype=float,
    )
    faces = [
        (0, 11, 5),
        (0, 5, 1),
        (0, 1, 7),
        (0, 7, 10),
        (0, 10, 11),
        (1, 5, 9),
        (5, 11, 4),
        (11, 10, 2),
        (10, 7, 6),
        (7, 1, 8),
        (3, 9, 4),
        (3, 4, 2),
        (3, 2, 6),
        (3, 6, 8),
        (3, 8, 9),
        (4, 9, 5),
        (2, 4, 11),
        (6, 2, 10),
        (8, 6, 7),
        (9, 8, 1),
    ]
    return verts / np.linalg.norm(verts, axis=1, keepdims=True), faces


@cache
def icosphere(level: int) -> np.ndarray:
    """Vertices of the icosahedron subdivided `level` times: 10·4^level + 2 directions."""
    verts, faces = _icosahedron()
    points = [tuple(v) for v in verts]
    for _ in range(level):
        midpoints: dict[tuple[int, int], int] = {}

        def midpoint(a: int, b: int) -> int:
            key = (min(a, b), max(a, b))
            if key not in midpoints:
                m = (np.asarray(points[a]) + np.asarray(points[b])) / 2.0
                points.append(tuple(m / np.linalg.norm(m)))
                midpoints[key] = len(points) - 1
            return midpoints[key]

        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new_faces
    grid = np.array(points)
    grid.setflags(write=False)
    return grid


def icosphere_level(size: int) -> int | None:
    """Subdivision level whose icosphere has exactly `size` vertices, if any."""
    level = 0
    while 10 * 4**level + 2 <= size:
        if 10 * 4**level + 2 == size:
            return level
        level += 1
    return None


def random_directions(dim: int, size: int, seed: int) -> np.ndarray:
    """Seeded uniform directions on S^{dim-1}."""
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((size, dim))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def direction_grid(dim: int, size: int, seed: int = 0) -> np.ndarray:
    """Default grid for a dimension: angles in the plane, icosphere or Fibonacci in space."""
    if dim < 2:
        raise DimensionUnsupported(f"direction grids need dim >= 2, got {dim}")
    if dim == 2:
        return uniform_angles(size)
    if dim == 3:
        level = icosphere_level(size)
        if level is not None:
            return np.array(icosphere(level))
        return fibonacci_sphere(size)
    return random_directions(dim, size, seed)


def antipodal_index(grid: np.ndarray, atol: float = 1e-9) -> np.ndarray:
    """Index of -u_i in the grid for every i, or -1 where the antipode is missing."""
    gram = grid @ grid.T
    j = np.argmin(gram, axis=1)
    found = np.abs(gram[np.arange(len(grid)), j] + 1.0) <= atol
    return np.where(found, j, -1)

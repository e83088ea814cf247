"""
Halfplane / halfspace clipping and exact volumes of clipped polytopes.

Planar clipping is Sutherland-Hodgman against a single line followed by the
shoelace formula. In three dimensions the clipped vertex set is the kept
vertices plus the edge/plane crossings, and its hull is measured directly.
"""

import numpy as np
from scipy.spatial import ConvexHull, HalfspaceIntersection, QhullError

from .config import GEOM_ATOL


def shoelace(polygon: np.ndarray) -> float:
    """Signed area of a closed polygon given as an (m, 2) vertex array."""
    if len(polygon) < 3:
        return 0.0
    x, y = polygon[:, 0], polygon[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def clip_polygon(polygon: np.ndarray, normal: np.ndarray, offset: float) -> np.ndarray:
    """Clip a convex polygon to the halfplane {y : normal·y <= offset}."""
    m = len(polygon)
    if m == 0:
        return polygon
    d = polygon @ normal - offset
    kept: list[np.ndarray] = []
    for j in range(m):
        p, q = polygon[j - 1], polygon[j]
        dp, dq = d[j - 1], d[j]
        if (dp < 0.0 < dq) or (dq < 0.0 < dp):
            alpha = dp / (dp - dq)
            kept.append(p + alpha * (q - p))
        if dq <= 0.0:
            kept.append(q)
    if not kept:
        return np.empty((0, 2))
    return np.array(kept)


def polygon_slab_tail(polygon: np.ndarray, x: np.ndarray, s: float) -> float:
    """Area of polygon ∩ {|x·y| > s}, clipping once per side of the slab."""
    upper = clip_polygon(polygon, -x, -s)
    lower = clip_polygon(polygon, x, -s)
    return abs(shoelace(upper)) + abs(shoelace(lower))


def polygon_chains(polygon: np.ndarray, axis: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Split a counterclockwise polygon into its lower and upper chains along `axis`.

    Coordinates are w = perp·y and z = axis·y with perp = (axis_y, −axis_x), a
    right-handed frame. Returns (w_lower, z_lower, w_upper, z_upper), each chain
    sorted by increasing w, so np.interp evaluates either boundary.
    """
    axis = axis / np.linalg.norm(axis)
    perp = np.array([axis[1], -axis[0]])
    w, z = polygon @ perp, polygon @ axis
    m = len(polygon)
    bottom_left = np.lexsort((z, w))[0]
    top_left = np.lexsort((-z, w))[0]
    bottom_right = np.lexsort((z, -w))[0]
    top_right = np.lexsort((-z, -w))[0]
    lower = (bottom_left + np.arange((bottom_right - bottom_left) % m + 1)) % m
    upper = ((top_right + np.arange((top_left - top_right) % m + 1)) % m)[::-1]
    return w[lower], z[lower], w[upper], z[upper]


def chain_heights(
    chains: tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray], w: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Upper and lower boundary heights at w, and the mask of w inside the projection."""
    w_lo, z_lo, w_up, z_up = chains
    inside = (w >= w_lo[0] - GEOM_ATOL) & (w <= w_lo[-1] + GEOM_ATOL)
    return np.interp(w, w_up, z_up), np.interp(w, w_lo, z_lo), inside


def chord_lengths(polygon: np.ndarray, x: np.ndarray, levels: np.ndarray) -> np.ndarray:
    """Length of polygon ∩ {x̂·y = s} for every s in `levels`, with x̂ = x/|x|.

    A level outside the polygon gives 0.
    """
    xh = x / np.linalg.norm(x)
    chains = polygon_chains(polygon, np.array([-xh[1], xh[0]]))
    top, bottom, inside = chain_heights(chains, np.asarray(levels, dtype=float))
    return np.where(inside, np.maximum(top - bottom, 0.0), 0.0)


def hull_volume(points: np.ndarray) -> float:
    """Volume (area in the plane) of the convex hull; 0 for degenerate sets."""
    if len(points) <= points.shape[1]:
        return 0.0
    try:
        return float(ConvexHull(points).volume)
    except QhullError:
        return 0.0


def unique_edges(simplices: np.ndarray) -> np.ndarray:
    """Undirected edges of a triangulated hull boundary as an (e, 2) index array."""
    k = simplices.shape[1]
    pairs = np.vstack([simplices[:, [i, j]] for i in range(k) for j in range(i + 1, k)])
    pairs.sort(axis=1)
    return np.unique(pairs, axis=0)


def orthonormal_complement(u: np.ndarray) -> np.ndarray:
    """Rows form an orthonormal basis of u⊥."""
    u = u / np.linalg.norm(u)
    _, _, vt = np.linalg.svd(u[None, :])
    return vt[1:]


def plane_section(
    vertices: np.ndarray, edges: np.ndarray, normal: np.ndarray, level: float
) -> np.ndarray:
    """Points of the polytope boundary on {normal·y = level}: on-plane vertices and edge crossings."""
    z = vertices @ normal
    on_plane = vertices[np.abs(z - level) <= GEOM_ATOL]
    zp, zq = z[edges[:, 0]], z[edges[:, 1]]
    strict = ((zp - level) * (zq - level)) < 0.0
    p, q = vertices[edges[strict, 0]], vertices[edges[strict, 1]]
    alpha = ((level - zp[strict]) / (zq[strict] - zp[strict]))[:, None]
    return np.vstack([on_plane, p + alpha * (q - p)])


def section_area(vertices: np.ndarray, edges: np.ndarray, normal: np.ndarray, level: float) -> float:
    """Area of the planar section of a 3-D polytope at {n̂·y = level}."""
    nh = normal / np.linalg.norm(normal)
    pts = plane_section(vertices, edges, nh, level)
    if len(pts) < 3:
        return 0.0
    return hull_volume(pts @ orthonormal_complement(nh).T)


def clip_polytope(
    vertices: np.ndarray, edges: np.ndarray, normal: np.ndarray, offset: float
) -> np.ndarray:
    """Vertex set of the polytope ∩ {normal·y <= offset}."""
    z = vertices @ normal
    kept = vertices[z <= offset]
    return np.vstack([kept, plane_section(vertices, edges, normal, offset)])


def polytope_slab_tail(
    vertices: np.ndarray, edges: np.ndarray, x: np.ndarray, s: float
) -> float:
    """Volume of polytope ∩ {|x·y| > s} for a 3-D polytope."""
    upper = clip_polytope(vertices, edges, -x, -s)
    lower = clip_polytope(vertices, edges, x, -s)
    return hull_volume(upper) + hull_volume(lower)


def halfspace_vertices(normals: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    """Vertices of {y : normals·y <= offsets}, which must contain the origin in its interior."""
    halfspaces = np.column_stack([normals, -offsets])
    hs = HalfspaceIntersection(halfspaces, np.zeros(normals.shape[1]))
    points = hs.intersections
    hull = ConvexHull(points)
    return points[hull.vertices]


def fan_volume(vertices: np.ndarray, simplices: np.ndarray, center: np.ndarray) -> float:
    """Volume of a polytope as the sum of simplices coning its boundary facets to `center`."""
    tips = vertices[simplices] - center
    dets = np.abs(np.linalg.det(tips))
    return float(dets.sum()) / float(np.prod(np.arange(1, vertices.shape[1] + 1)))

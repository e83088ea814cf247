"""
Steiner symmetrization and the chord apparatus behind it.

For a direction u every point is written y' + t·u with y' in u⊥. Over the
projection K_u the body is bounded above by the overgraph g(y') and below by
−f(y'); σ = (f + g)/2 is the half chord and m = (g − f)/2 its midpoint.
S_uK keeps every chord's length and centers it on u⊥.
"""

import heapq
import logging
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.typing import ArrayLike
from scipy.optimize import linprog, minimize
from scipy.spatial import ConvexHull
from scipy.stats import chi2_contingency

from .bodies import Ball, Body, Ellipsoid, Polytope, unit_ball_volume
from .centroid import build_centroid_body, centroid_bracket, centroid_support
from .clipping import chain_heights, orthonormal_complement, polygon_chains
from .config import GEOM_ATOL, REL_TOL, SIMPLIFY_AREA_BUDGET, get_seed
from .errors import BoundaryPoint, DimensionUnsupported, DomainError, OlcbError
from .export import write_jsonl
from .grids import direction_grid, random_directions
from .orlicz import OrliczFunction, WeightFunction
from .sampling import sample_uniform

log = logging.getLogger(__name__)

AGREEMENT_TOL = 1e-6
INTERIOR_STEP = 1e-7
JITTER = 1e-3
MERGE_DIGITS = 9
CHUNK = 4096


def _unit(u: ArrayLike) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    norm = np.linalg.norm(u)
    if norm == 0.0:
        raise DomainError("symmetrization direction must be nonzero")
    return u / norm


def _basis(u: np.ndarray) -> np.ndarray:
    """Rows spanning u⊥; in the plane the row is (u_y, −u_x), matching `polygon_chains`."""
    if len(u) == 2:
        return np.array([[u[1], -u[0]]])
    return orthonormal_complement(u)


def _chord_range(body: Body, u: np.ndarray, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(t_max, t_min) of the line y' + t·u through each point y' of u⊥; NaN where it misses K."""
    match body:
        case Ball(radius=r):
            half = np.sqrt(r * r - np.sum(points * points, axis=1))
            return half, -half
        case Ellipsoid():
            inv = np.linalg.inv(body.shape)
            a = u @ inv @ u
            b = points @ inv @ u
            c = np.einsum("ij,jk,ik->i", points, inv, points) - 1.0
            root = np.sqrt(b * b - a * c)
            return (-b + root) / a, (-b - root) / a
        case Polytope():
            return _polytope_chord_range(body, u, points)
    raise DomainError(f"no chord evaluator for {body.kind}")


def _polytope_chord_range(poly: Polytope, u: np.ndarray, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    au = poly.normals @ u
    up, down = au > GEOM_ATOL, au < -GEOM_ATOL
    flat = ~(up | down)
    t_max = np.empty(len(points))
    t_min = np.empty(len(points))
    for start in range(0, len(points), CHUNK):
        block = points[start : start + CHUNK]
        rhs = poly.offsets - block @ poly.normals.T
        hi = np.min(rhs[:, up] / au[up], axis=1)
        lo = np.max(rhs[:, down] / au[down], axis=1)
        outside = np.any(rhs[:, flat] < -GEOM_ATOL, axis=1) | (hi < lo - GEOM_ATOL)
        t_max[start : start + CHUNK] = np.where(outside, np.nan, hi)
        t_min[start : start + CHUNK] = np.where(outside, np.nan, lo)
    return t_max, t_min


def simplify_polygon_area_budget(points: np.ndarray, budget: float) -> tuple[np.ndarray, float]:
    """Visvalingam pruning of an open polyline, smallest triangles first, within an area budget.

    Endpoints are never removed. Returns the kept points and the total area of
    the removed triangles.
    """
    k = len(points)
    if k <= 2 or budget <= 0:
        return points, 0.0

    def area(i: int, j: int, l: int) -> float:
        a, b, c = points[i], points[j], points[l]
        return 0.5 * abs((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))

    prev = list(range(-1, k - 1))
    nxt = list(range(1, k + 1))
    alive = [True] * k
    heap = [(area(i - 1, i, i + 1), i) for i in range(1, k - 1)]
    heapq.heapify(heap)
    spent = 0.0
    while heap:
        cost, i = heapq.heappop(heap)
        if not alive[i] or cost != area(prev[i], i, nxt[i]):
            continue
        if spent + cost > budget:
            break
        spent += cost
        alive[i] = False
        p, q = prev[i], nxt[i]
        nxt[p], prev[q] = q, p
        for j in (p, q):
            if 0 < j < k - 1:
                heapq.heappush(heap, (area(prev[j], j, nxt[j]), j))
    return points[np.array(alive)], spent


@dataclass(frozen=True, eq=False)
class ChordDecomposition:
    """σ and m of a polytope over K_u, tabulated at the breakpoints of σ.

    In the plane `breakpoints` are scalar coordinates along (u_y, −u_x) and σ
    is linear between them; in space they are points of u⊥ in the `basis`
    coordinates and the projection is the polygon `projection`.
    """

    body: Polytope
    direction: np.ndarray
    basis: np.ndarray
    breakpoints: np.ndarray
    g: np.ndarray
    f: np.ndarray
    projection: np.ndarray = field(repr=False, default_factory=lambda: np.empty((0, 1)))

    @property
    def sigma(self) -> np.ndarray:
        return (self.f + self.g) / 2.0

    @property
    def midpoint(self) -> np.ndarray:
        return (self.g - self.f) / 2.0

    def evaluate(self, coords: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(σ, m) at points of u⊥ given in basis coordinates; NaN outside K_u."""
        coords = np.atleast_2d(np.asarray(coords, dtype=float))
        if coords.shape[1] != len(self.basis):
            coords = coords.T
        t_max, t_min = _polytope_chord_range(self.body, self.direction, coords @ self.basis)
        return (t_max - t_min) / 2.0, (t_max + t_min) / 2.0

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Membership through σ and m: |t − m(y')| <= σ(y')."""
        coords = points @ self.basis.T
        t = points @ self.direction
        sigma, m = self.evaluate(coords)
        return np.nan_to_num(np.abs(t - m) - sigma, nan=np.inf) <= GEOM_ATOL


def _decompose_2d(poly: Polytope, u: np.ndarray) -> ChordDecomposition:
    chains = polygon_chains(poly.vertices, u)
    w = np.unique(np.concatenate([chains[0], chains[2]]))
    top, bottom, _ = chain_heights(chains, w)
    lo, hi = chains[0][0], chains[0][-1]
    return ChordDecomposition(poly, u, _basis(u), w, top, -bottom, np.array([[lo], [hi]]))


def _segment_crossings(segments: np.ndarray) -> np.ndarray:
    """Pairwise proper intersections of planar segments given as an (e, 2, 2) array."""
    p, r = segments[:, 0], segments[:, 1] - segments[:, 0]
    i, j = np.triu_indices(len(segments), k=1)
    cross = r[i, 0] * r[j, 1] - r[i, 1] * r[j, 0]
    ok = np.abs(cross) > GEOM_ATOL
    i, j, cross = i[ok], j[ok], cross[ok]
    d = p[j] - p[i]
    s = (d[:, 0] * r[j, 1] - d[:, 1] * r[j, 0]) / cross
    t = (d[:, 0] * r[i, 1] - d[:, 1] * r[i, 0]) / cross
    hit = (s > 0) & (s < 1) & (t > 0) & (t < 1)
    return p[i[hit]] + s[hit, None] * r[i[hit]]


def _decompose_3d(poly: Polytope, u: np.ndarray) -> ChordDecomposition:
    basis = _basis(u)
    flat = poly.vertices @ basis.T
    segments = flat[poly.edges]
    candidates = np.vstack([flat, _segment_crossings(segments)])
    candidates = np.unique(np.round(candidates, MERGE_DIGITS), axis=0)
    t_max, t_min = _polytope_chord_range(poly, u, candidates @ basis)
    keep = ~np.isnan(t_max)
    hull = ConvexHull(flat)
    return ChordDecomposition(poly, u, basis, candidates[keep], t_max[keep], -t_min[keep], flat[hull.vertices])


def chord_decomposition(body: Polytope, u: ArrayLike) -> ChordDecomposition:
    u = _unit(u)
    match body.dim:
        case 2:
            return _decompose_2d(body, u)
        case 3:
            return _decompose_3d(body, u)
    raise DimensionUnsupported(f"symmetrization needs n in {{2, 3}}, got n = {body.dim}")


def _symmetral(decomp: ChordDecomposition, budget: float) -> tuple[Polytope, float]:
    sigma = np.maximum(decomp.sigma, 0.0)
    coords = decomp.breakpoints
    pruned = 0.0
    if decomp.body.dim == 2:
        polyline, removed = simplify_polygon_area_budget(np.column_stack([coords, sigma]), budget / 2.0)
        coords, sigma = polyline[:, :1], polyline[:, 1]
        pruned = 2.0 * removed
    base = coords @ decomp.basis
    lift = sigma[:, None] * decomp.direction
    return Polytope(np.vstack([base + lift, base - lift]), decomp.body.check_origin), pruned


def symmetrize_with_budget(body: Body, u: ArrayLike, budget: float) -> tuple[Body, float]:
    """S_uK with σ simplified inside `budget`; returns the body and the volume pruned."""
    if isinstance(body, Ball):
        return body, 0.0
    if not isinstance(body, Polytope):
        raise DomainError(f"Steiner symmetrization is implemented for polytopes and balls, not {body.kind}")
    return _symmetral(chord_decomposition(body, u), budget)


def steiner_symmetrize(body: Body, u: ArrayLike) -> Body:
    """S_uK = {y' + t·u : |t| <= σ(y'), y' ∈ K_u}, exactly."""
    return symmetrize_with_budget(body, u, 0.0)[0]


def _as_perp_point(u: np.ndarray, y: ArrayLike) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.ndim == 0:
        if len(u) != 2:
            raise DomainError("a scalar y' only makes sense in the plane")
        return float(y) * _basis(u)[0]
    return y - (y @ u) * u


@dataclass(frozen=True, slots=True)
class GraphReport:
    g: float
    f: float
    g_min: float
    f_min: float
    x1: np.ndarray
    x2: np.ndarray
    bound: float | None

    @property
    def agreement(self) -> float:
        return max(abs(self.g - self.g_min), abs(self.f - self.f_min))

    @property
    def agrees(self) -> bool:
        return self.agreement <= AGREEMENT_TOL

    @property
    def bound_ok(self) -> bool:
        if self.bound is None:
            return True
        return bool(max(np.linalg.norm(self.x1), np.linalg.norm(self.x2)) <= self.bound + AGREEMENT_TOL)


def _graph_by_minimization(body: Body, u: np.ndarray, basis: np.ndarray, y: np.ndarray, sign: float) -> tuple[float, np.ndarray]:
    """min over x' ∈ u⊥ of h(K, x' + sign·u) − x'·y'."""
    yc = basis @ y
    if isinstance(body, Polytope):
        v = body.vertices
        a_ub = np.column_stack([v @ basis.T - yc, -np.ones(len(v))])
        b_ub = -sign * (v @ u)
        c = np.zeros(len(basis) + 1)
        c[-1] = 1.0
        res = linprog(c, A_ub=a_ub, b_ub=b_ub, bounds=[(None, None)] * len(c), method="highs")
        if not res.success:
            raise OlcbError(f"overgraph linear program failed: {res.message}")
        return float(res.fun), res.x[:-1] @ basis

    def objective(xi: np.ndarray) -> float:
        return body.support(xi @ basis + sign * u) - float(xi @ yc)

    res = minimize(objective, np.zeros(len(basis)), method="BFGS", options={"gtol": 1e-12})
    return float(res.fun), res.x @ basis


def graph_functions(body: Body, u: ArrayLike, y: ArrayLike) -> GraphReport:
    """Overgraph and undergraph at y', by direct chord and by minimizing over support values."""
    u = _unit(u)
    basis = _basis(u)
    y = _as_perp_point(u, y)
    nearby = np.vstack([y, y + INTERIOR_STEP * basis, y - INTERIOR_STEP * basis])
    t_max, t_min = _chord_range(body, u, nearby)
    if np.any(np.isnan(t_max)) or t_max[0] - t_min[0] <= GEOM_ATOL:
        raise BoundaryPoint(f"y' = {y.tolist()} is not in the relative interior of the projection")
    g, f = float(t_max[0]), float(-t_min[0])
    g_min, x1 = _graph_by_minimization(body, u, basis, y, 1.0)
    f_min, x2 = _graph_by_minimization(body, u, basis, y, -1.0)

    bound = None
    try:
        r, big_r = body.radii()
        if np.linalg.norm(y) <= r / 2.0:
            bound = 2.0 * big_r / r
    except OlcbError:
        pass
    report = GraphReport(g, f, g_min, f_min, x1, x2, bound)
    if not report.agrees:
        log.warning("graph functions disagree by %.3e at y' = %s", report.agreement, y)
    return report


@dataclass(frozen=True, slots=True)
class MapsReport:
    p_push: float
    p_reflect: float
    involution_error: float
    samples: int

    @property
    def passed(self) -> bool:
        return self.p_push > 0.01 and self.p_reflect > 0.01 and self.involution_error <= GEOM_ATOL


def _histogram_p_value(a: np.ndarray, b: np.ndarray, bins: int) -> float:
    lo = np.minimum(a.min(axis=0), b.min(axis=0))
    hi = np.maximum(a.max(axis=0), b.max(axis=0))
    edges = [np.linspace(lo[k], hi[k], bins + 1) for k in range(2)]
    ha, _, _ = np.histogram2d(a[:, 0], a[:, 1], bins=edges)
    hb, _, _ = np.histogram2d(b[:, 0], b[:, 1], bins=edges)
    table = np.vstack([ha.ravel(), hb.ravel()])
    table = table[:, table.sum(axis=0) > 0]
    return float(chi2_contingency(table).pvalue)


def maps_S_T_check(body: Body, u: ArrayLike, sample_count: int = 10**5, bins: int = 10, seed: int | None = None) -> MapsReport:
    """Check that S pushes μ^K to μ^{S_uK} and the midpoint reflection T preserves μ^K.

    Samples are compared on a bins × bins histogram of (first u⊥ coordinate, t).
    """
    u = _unit(u)
    seed = get_seed() if seed is None else seed
    basis = _basis(u)
    pts = sample_uniform(body, sample_count, seed)
    coords, t = pts @ basis.T, pts @ u
    t_max, t_min = _chord_range(body, u, coords @ basis)
    m = np.nan_to_num((t_max + t_min) / 2.0)

    pushed = np.column_stack([coords[:, 0], t - m])
    target = sample_uniform(steiner_symmetrize(body, u), sample_count, seed + 1)
    p_push = _histogram_p_value(pushed, np.column_stack([target @ basis[0], target @ u]), bins)

    reflected_t = 2.0 * m - t
    fresh = sample_uniform(body, sample_count, seed + 2)
    p_reflect = _histogram_p_value(
        np.column_stack([coords[:, 0], reflected_t]), np.column_stack([fresh @ basis[0], fresh @ u]), bins
    )
    image = pts + (reflected_t - t)[:, None] * u
    foot = image - np.outer(image @ u, u)
    t_max2, t_min2 = _chord_range(body, u, foot)
    m2 = np.nan_to_num((t_max2 + t_min2) / 2.0)
    twice = foot + (2.0 * m2 - image @ u)[:, None] * u
    involution = float(np.max(np.linalg.norm(twice - pts, axis=1)))
    return MapsReport(p_push, p_reflect, involution, sample_count)


@dataclass(frozen=True, slots=True)
class SteinerInequalityReport:
    lhs: float
    rhs: float

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs


def lemma41_inequality_check(
    body: Body,
    u: ArrayLike,
    x1: ArrayLike,
    x2: ArrayLike,
    phi: OrliczFunction,
    omega: WeightFunction,
    reflected: bool = False,
    symmetral: Body | None = None,
) -> SteinerInequalityReport:
    """h(Γ(S_uK), ½x'₁ + ½x'₂ ± u) against ½h(ΓK, x'₁ + u) + ½h(ΓK, x'₂ − u)."""
    u = _unit(u)
    x1, x2 = np.asarray(x1, dtype=float), np.asarray(x2, dtype=float)
    for x in (x1, x2):
        if abs(x @ u) > GEOM_ATOL:
            raise DomainError(f"x' = {x.tolist()} is not orthogonal to u")
    symmetral = symmetral or steiner_symmetrize(body, u)
    sign = -1.0 if reflected else 1.0
    lhs = centroid_support(symmetral, phi, omega, (x1 + x2) / 2.0 + sign * u)
    rhs = 0.5 * centroid_support(body, phi, omega, x1 + u) + 0.5 * centroid_support(body, phi, omega, x2 - u)
    return SteinerInequalityReport(lhs, rhs)


@dataclass(frozen=True, slots=True)
class InclusionReport:
    violation: float
    eps_grid: float
    symmetral_inner: float | None = None
    source_outer: float | None = None

    @property
    def passed(self) -> bool:
        return self.violation <= self.eps_grid

    @property
    def volume_monotone(self) -> bool:
        if self.symmetral_inner is None or self.source_outer is None:
            return True
        return self.symmetral_inner <= self.source_outer


def lemma42_inclusion_check(
    body: Body,
    u: ArrayLike,
    phi: OrliczFunction,
    omega: WeightFunction,
    directions: np.ndarray,
    grid_size: int | None = None,
    volumes: bool = False,
) -> InclusionReport:
    """max_v h(Γ(S_uK), v) − h(S_u(ΓK outer polytope), v).

    ΓK lies inside its outer polytope and S_u preserves inclusion, so ε_grid is
    the solver tolerance alone.
    """
    u = _unit(u)
    symmetral = steiner_symmetrize(body, u)
    gamma = build_centroid_body(body, phi, omega, grid_size)
    outer_sym = steiner_symmetrize(gamma.outer_polytope(), u)

    violation = -np.inf
    scale = 0.0
    for v in directions:
        lhs = centroid_support(symmetral, phi, omega, v)
        violation = max(violation, lhs - outer_sym.support(v))
        scale = max(scale, lhs)
    eps_grid = REL_TOL * max(scale, 1.0)

    if not volumes:
        return InclusionReport(float(violation), eps_grid)
    sym_bracket = centroid_bracket(build_centroid_body(symmetral, phi, omega, grid_size))
    return InclusionReport(float(violation), eps_grid, sym_bracket.inner, centroid_bracket(gamma).outer)


def default_schedule(dim: int, step_count: int, seed: int | None = None) -> np.ndarray:
    """Coordinate directions first, then random rational angles (n = 2) or random unit vectors."""
    rng = np.random.default_rng(get_seed() if seed is None else seed)
    head = np.eye(dim)[: min(dim, step_count)]
    rest = step_count - len(head)
    if dim == 2:
        q = rng.integers(3, 64, size=rest)
        p = rng.integers(0, q)
        theta = np.pi * p / q
        tail = np.column_stack([np.cos(theta), np.sin(theta)])
    else:
        tail = random_directions(dim, rest, int(rng.integers(2**31)))
    return np.vstack([head, tail])


def _jitter(u: np.ndarray, previous: np.ndarray | None) -> np.ndarray:
    """Rotate u by a small angle when it repeats the previous direction up to sign."""
    if previous is None or abs(u @ previous) < 1.0 - 1e-12:
        return u
    if len(u) == 2:
        c, s = np.cos(JITTER), np.sin(JITTER)
        return np.array([c * u[0] - s * u[1], s * u[0] + c * u[1]])
    w = _basis(u)[0]
    return np.cos(JITTER) * u + np.sin(JITTER) * w


@dataclass(frozen=True, slots=True)
class TraceStep:
    step: int
    direction: tuple[float, ...] | None
    volume: float
    ball_distance: float
    vertex_count: int
    pruned: float = 0.0

    def to_dict(self) -> dict:
        return {
            "step": self.step,
            "direction": list(self.direction) if self.direction is not None else None,
            "volume": self.volume,
            "ball_distance": self.ball_distance,
            "vertex_count": self.vertex_count,
        }


@dataclass(frozen=True, eq=False)
class SymmetrizationTrace:
    bodies: list[Body]
    steps: list[TraceStep]
    ball_radius: float

    @property
    def volume_drift(self) -> float:
        """Largest relative volume change once pruned area is added back."""
        v0 = self.steps[0].volume
        pruned = np.cumsum([s.pruned for s in self.steps])
        return float(max(abs(s.volume + p - v0) for s, p in zip(self.steps, pruned, strict=True)) / v0)

    @property
    def raw_drift(self) -> float:
        v0 = self.steps[0].volume
        return float(max(abs(s.volume - v0) for s in self.steps) / v0)


def _vertex_count(body: Body) -> int:
    return len(body.vertices) if isinstance(body, Polytope) else 0


def symmetrization_schedule(
    body: Body,
    step_count: int,
    seed: int | None = None,
    schedule: Sequence[ArrayLike] | None = None,
    budget: float = SIMPLIFY_AREA_BUDGET,
    grid_size: int = 360,
    on_step: Callable[[TraceStep], None] | None = None,
) -> SymmetrizationTrace:
    """Apply S_{u_1}, S_{u_2}, … and record volume and distance to the volume-matched ball."""
    if body.dim not in (2, 3):
        raise DimensionUnsupported(f"symmetrization needs n in {{2, 3}}, got n = {body.dim}")
    directions = np.asarray(schedule, dtype=float) if schedule is not None else default_schedule(body.dim, step_count, seed)
    grid = direction_grid(body.dim, grid_size if body.dim == 2 else 642, seed=0)
    v0 = body.volume().value
    radius = (v0 / unit_ball_volume(body.dim)) ** (1.0 / body.dim)

    def record(step: int, k: Body, u: np.ndarray | None, pruned: float) -> TraceStep:
        entry = TraceStep(
            step,
            tuple(u.tolist()) if u is not None else None,
            k.volume().value,
            float(np.max(np.abs(k.support_many(grid) - radius))),
            _vertex_count(k),
            pruned,
        )
        if on_step is not None:
            on_step(entry)
        return entry

    bodies = [body]
    steps = [record(0, body, None, 0.0)]
    previous = None
    for i, raw in enumerate(directions[:step_count], start=1):
        u = _jitter(_unit(raw), previous)
        current, pruned = symmetrize_with_budget(bodies[-1], u, budget)
        bodies.append(current)
        steps.append(record(i, current, u, pruned))
        log.debug("step %d: %d vertices, pruned %.2e", i, steps[-1].vertex_count, pruned)
        previous = u
    return SymmetrizationTrace(bodies, steps, radius)


def trace_to_jsonl(trace: SymmetrizationTrace, path: str | Path) -> Path:
    return write_jsonl(path, (step.to_dict() for step in trace.steps))

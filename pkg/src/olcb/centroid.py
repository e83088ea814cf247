"""
Orlicz–Lorentz centroid bodies Γ_{φ,ω}K.

The support of Γ_{φ,ω}K at x is the Orlicz–Lorentz norm of y ↦ x·y on
(K, μ^K). A built `CentroidBody` holds those norms on a direction grid and
the outer polytope ∩_i {y : u_i·y <= h_i} they define. Volumes are reported
as an inner/outer bracket rather than a point estimate.
"""

import logging
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.typing import ArrayLike

from .bodies import Ball, Body, LinearMap, Polytope, SupportSampled, VolumeMethod
from .clipping import halfspace_vertices, hull_volume
from .config import get_grid_size, get_seed, get_threads
from .errors import DomainError
from .export import write_csv
from .grids import antipodal_index, direction_grid, random_directions
from .orlicz import NormSolveReport, OrliczFunction, Power, WeightFunction, norm_solve
from .rearrange import make_profile

log = logging.getLogger(__name__)

MIN_GRID = {2: 8, 3: 64}
SYMMETRY_CHECKS = 8
SYMMETRY_TOL = 1e-6
FACE_TOL = 1e-9
CONTACT_NEIGHBOURS = 8


def centroid_support_report(
    body: Body, phi: OrliczFunction, omega: WeightFunction, x: ArrayLike, **solver
) -> NormSolveReport:
    return norm_solve(make_profile(body, x), phi, omega, **solver)


def centroid_support(body: Body, phi: OrliczFunction, omega: WeightFunction, x: ArrayLike, **solver) -> float:
    """h(Γ_{φ,ω}K, x)."""
    return centroid_support_report(body, phi, omega, x, **solver).lam


@dataclass(frozen=True, slots=True)
class VolumeBracket:
    inner: float
    outer: float
    rigorous: bool = True

    @property
    def width(self) -> float:
        return self.outer - self.inner


@dataclass(frozen=True, eq=False)
class CentroidBody:
    source: Body
    phi: OrliczFunction
    omega: WeightFunction
    directions: np.ndarray
    values: np.ndarray
    reports: tuple[NormSolveReport | None, ...] = ()
    symmetry_gap: float = 0.0
    outer_vertices: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        bad = np.flatnonzero(self.values <= 0)
        if bad.size:
            raise DomainError(f"support value {self.values[bad[0]]!r} is not positive (direction {bad[0]})")
        object.__setattr__(self, "outer_vertices", halfspace_vertices(self.directions, self.values))

    @property
    def dim(self) -> int:
        return self.directions.shape[1]

    @property
    def grid_size(self) -> int:
        return len(self.directions)

    def support(self, x: ArrayLike, **solver) -> float:
        """Direct evaluation of h(Γ_{φ,ω}K, x), off the grid."""
        return centroid_support(self.source, self.phi, self.omega, x, **solver)

    def outer_support(self, x: ArrayLike) -> float:
        return float(np.max(self.outer_vertices @ np.asarray(x, dtype=float)))

    def outer_polytope(self) -> Polytope:
        return Polytope(self.outer_vertices)

    def to_support_sampled(self) -> SupportSampled:
        return SupportSampled(self.directions, self.values)


def _solve_many(
    body: Body,
    phi: OrliczFunction,
    omega: WeightFunction,
    directions: np.ndarray,
    threads: int,
    on_progress: Callable[[int], None] | None,
) -> list[NormSolveReport]:
    def solve(u: np.ndarray) -> NormSolveReport:
        report = centroid_support_report(body, phi, omega, u)
        if on_progress is not None:
            on_progress(1)
        return report

    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(solve, directions))


def build_centroid_body(
    body: Body,
    phi: OrliczFunction,
    omega: WeightFunction,
    grid_size: int | None = None,
    threads: int | None = None,
    on_progress: Callable[[int], None] | None = None,
) -> CentroidBody:
    """Solve the support of Γ_{φ,ω}K on a direction grid and assemble the outer polytope.

    Only one of each antipodal pair is solved, since h(Γ_{φ,ω}K, ·) is even; a
    few antipodes are solved anyway and compared.
    """
    n = body.dim
    grid_size = grid_size or get_grid_size(n)
    if grid_size < MIN_GRID.get(n, 2 * n):
        raise DomainError(f"grid of {grid_size} directions is too coarse for dimension {n}")
    directions = direction_grid(n, grid_size, seed=get_seed())
    threads = threads or get_threads()

    anti = antipodal_index(directions)
    solved = np.flatnonzero((anti < 0) | (np.arange(grid_size) < anti))
    log.debug("solving %d of %d grid directions", len(solved), grid_size)
    reports: list[NormSolveReport | None] = [None] * grid_size
    for i, report in zip(solved, _solve_many(body, phi, omega, directions[solved], threads, on_progress), strict=True):
        reports[i] = report

    values = np.empty(grid_size)
    values[solved] = [reports[i].lam for i in solved]  # pyright: ignore[reportOptionalMemberAccess]
    mirrored = np.flatnonzero((anti >= 0) & (np.arange(grid_size) > anti))
    values[mirrored] = values[anti[mirrored]]

    paired = solved[anti[solved] >= 0]
    checks = paired[np.linspace(0, len(paired) - 1, min(SYMMETRY_CHECKS, len(paired))).astype(int)] if len(paired) else paired
    gap = 0.0
    for i in checks:
        direct = centroid_support(body, phi, omega, directions[anti[i]])
        gap = max(gap, abs(direct - values[i]) / values[i])
    if gap > SYMMETRY_TOL:
        log.warning("antipodal supports differ by %.3e (relative)", gap)

    return CentroidBody(body, phi, omega, directions, values, tuple(reports), gap)


def _contact_segments_2d(cb: CentroidBody) -> np.ndarray:
    """Endpoints of the outer polygon's face in each grid direction, in boundary order."""
    u = cb.directions
    proj = cb.outer_vertices @ u.T
    top = proj.max(axis=0)
    tangent = np.column_stack([-u[:, 1], u[:, 0]])
    ends = np.empty((len(u), 2, 2))
    scale = max(1.0, float(top.max()))
    for i in range(len(u)):
        face = cb.outer_vertices[proj[:, i] >= top[i] - FACE_TOL * scale]
        w = face @ tangent[i]
        ends[i, 0], ends[i, 1] = face[np.argmin(w)], face[np.argmax(w)]
    return ends


def _inner_area_2d(cb: CentroidBody) -> float:
    """Smallest polygon with one vertex on each outer face: a lower bound of |Γ_{φ,ω}K|.

    The true body touches every face, and the shoelace sum is linear in each
    vertex, so the minimum over faces is attained at face endpoints and a
    two-state dynamic program over the cycle finds it.
    """
    order = np.argsort(np.arctan2(cb.directions[:, 1], cb.directions[:, 0]))
    ends = _contact_segments_2d(cb)[order]
    nxt = np.roll(ends, -1, axis=0)
    cost = ends[:, :, None, 0] * nxt[:, None, :, 1] - ends[:, :, None, 1] * nxt[:, None, :, 0]
    best_total = np.inf
    for start in (0, 1):
        best = np.array([np.inf, np.inf])
        best[start] = 0.0
        for i in range(len(ends) - 1):
            best = (best[:, None] + cost[i]).min(axis=0)
        best_total = min(best_total, float((best + cost[-1][:, start]).min()))
    return best_total / 2.0


def _contact_points_3d(cb: CentroidBody) -> np.ndarray:
    """Least-squares gradients of h over each direction's nearest grid neighbours."""
    u, h = cb.directions, cb.values
    nearest = np.argsort(-(u @ u.T), axis=1)[:, :CONTACT_NEIGHBOURS]
    points = np.empty_like(u)
    for i, idx in enumerate(nearest):
        points[i], *_ = np.linalg.lstsq(u[idx], h[idx], rcond=None)
    return points


def centroid_bracket(cb: CentroidBody) -> VolumeBracket:
    """Inner and outer volumes of Γ_{φ,ω}K.

    The planar inner bound is rigorous. In space the inner hull is built from
    estimated contact points and is only an approximation.
    """
    match cb.dim:
        case 2:
            return VolumeBracket(_inner_area_2d(cb), hull_volume(cb.outer_vertices))
        case 3:
            inner = hull_volume(_contact_points_3d(cb))
            outer = hull_volume(cb.outer_vertices)
            return VolumeBracket(min(inner, outer), outer, rigorous=False)
    estimate = cb.to_support_sampled().volume(VolumeMethod.MONTE_CARLO)
    spread = 3.0 * estimate.stderr
    return VolumeBracket(estimate.value - spread, estimate.value + spread, rigorous=False)


@dataclass(frozen=True, slots=True)
class VolumeRatio:
    """|Γ_{φ,ω}K| / |K| as a bracket; `ratio` is the outer value."""

    ratio: float
    error: float
    inner_ratio: float
    outer_ratio: float
    bracket: VolumeBracket
    body_volume: float
    body_stderr: float = 0.0


def ratio_from_bracket(bracket: VolumeBracket, body_volume: float, body_stderr: float = 0.0) -> VolumeRatio:
    lo_vol, hi_vol = body_volume + 3.0 * body_stderr, max(body_volume - 3.0 * body_stderr, 1e-300)
    inner_ratio, outer_ratio = bracket.inner / lo_vol, bracket.outer / hi_vol
    return VolumeRatio(
        ratio=bracket.outer / body_volume,
        error=outer_ratio - inner_ratio,
        inner_ratio=inner_ratio,
        outer_ratio=outer_ratio,
        bracket=bracket,
        body_volume=body_volume,
        body_stderr=body_stderr,
    )


def volume_ratio(
    body: Body, phi: OrliczFunction, omega: WeightFunction, grid_size: int | None = None, **build
) -> VolumeRatio:
    cb = build_centroid_body(body, phi, omega, grid_size, **build)
    vol = body.volume()
    return ratio_from_bracket(centroid_bracket(cb), vol.value, vol.stderr)


def ball_reference_ratio(dim: int, phi: OrliczFunction, omega: WeightFunction, grid_size: int | None = None) -> VolumeRatio:
    """Volume ratio of the unit ball; one solve suffices since Γ_{φ,ω}B is a ball."""
    grid_size = grid_size or get_grid_size(dim)
    ball = Ball(dim)
    e1 = np.eye(dim)[0]
    report = centroid_support_report(ball, phi, omega, e1)
    directions = direction_grid(dim, grid_size, seed=get_seed())
    cb = CentroidBody(ball, phi, omega, directions, np.full(grid_size, report.lam), (report,))
    return ratio_from_bracket(centroid_bracket(cb), ball.volume().value)


def equivariance_check(
    body: Body, a: LinearMap, phi: OrliczFunction, omega: WeightFunction, directions: np.ndarray
) -> float:
    """max_u |h(Γ(AK), u) − h(ΓK, Aᵀu)| / h(ΓK, Aᵀu)."""
    image = body.apply_linear(a)
    worst = 0.0
    for u in directions:
        lhs = centroid_support(image, phi, omega, u)
        rhs = centroid_support(body, phi, omega, a.transpose @ u)
        worst = max(worst, abs(lhs - rhs) / rhs)
    return worst


def export_csv(cb: CentroidBody, path: str | Path) -> Path:
    """One row per grid direction: u, h, solver bracket, residual, backend."""
    header = [*(f"u{k}" for k in range(cb.dim)), "h", "lambda_lo", "lambda_hi", "residual", "backend"]
    rows = []
    for u, h, report in zip(cb.directions, cb.values, cb.reports or [None] * cb.grid_size, strict=True):
        if report is None:
            rows.append([*u.tolist(), float(h), None, None, None, "mirrored"])
        else:
            rows.append([*u.tolist(), float(h), *report.bracket, report.residual, str(report.backend)])
    return write_csv(path, header, rows)


def _supports(body: Body, phi: OrliczFunction, omega: WeightFunction, directions: np.ndarray) -> np.ndarray:
    return np.array([centroid_support(body, phi, omega, u, richardson=False) for u in directions])


def continuity_in_body(
    body: Polytope,
    deltas: Sequence[float],
    phi: OrliczFunction,
    omega: WeightFunction,
    directions: np.ndarray,
    seed: int | None = None,
) -> list[tuple[float, float]]:
    """Max support change of Γ_{φ,ω}K when every vertex moves by δ, for each δ."""
    base = _supports(body, phi, omega, directions)
    shifts = random_directions(body.dim, len(body.vertices), get_seed() if seed is None else seed)
    out = []
    for delta in deltas:
        moved = Polytope(body.vertices + delta * shifts)
        out.append((float(delta), float(np.max(np.abs(_supports(moved, phi, omega, directions) - base)))))
    return out


def continuity_in_phi(
    body: Body, p: float, eps: float, omega: WeightFunction, directions: np.ndarray
) -> float:
    """Max support change when Power(p) is replaced by Power(p ± eps)."""
    base = _supports(body, Power(p), omega, directions)
    worst = 0.0
    for q in (p - eps, p + eps):
        if q < 1.0:
            continue
        worst = max(worst, float(np.max(np.abs(_supports(body, Power(q), omega, directions) - base))))
    return worst

"""
Distribution functions and decreasing rearrangements of y ↦ x·y on a body.

The measure is μ^K, Lebesgue measure on K normalized to total mass one, so
μ(s) = |K ∩ {|x·y| > s}| / |K| and f*(t) = inf{s ≥ 0 : μ(s) ≤ t}.

Exact profiles tabulate the section measure of K along x̂ (chord length in
the plane, section area in space). That measure is a polynomial of degree at
most n − 1 between consecutive vertex levels, so a three-point fit per
interval integrates it without error and μ becomes a closed-form piecewise
polynomial in s.
"""

import logging
from dataclasses import dataclass, field
from enum import StrEnum
from functools import cache
from math import ceil
from pathlib import Path
from typing import Callable

import numpy as np
from numpy.typing import ArrayLike
from scipy.special import betainc

from .bodies import Ball, Body, Ellipsoid, Polytope
from .clipping import chord_lengths, polygon_slab_tail, polytope_slab_tail, section_area, shoelace
from .config import BISECTION_ATOL, EMPIRICAL_SAMPLES, MONOTONE_TOL, get_seed
from .errors import DomainError, MonotonicityViolation, ZeroDirection
from .export import write_csv
from .sampling import sample_uniform

log = logging.getLogger(__name__)

EXACT_ERROR = 1e-12
LEVEL_MERGE = 1e-12


class Backend(StrEnum):
    EXACT_SLAB = "exact_slab"
    EMPIRICAL = "empirical"


@dataclass(frozen=True, slots=True)
class SlabVolumeResult:
    threshold: float
    value: float
    error: float


def _as_direction_vector(x: ArrayLike) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if not np.any(x):
        raise ZeroDirection("the linear functional x·y needs x != 0")
    return x


def _ball_tail(dim: int, c: np.ndarray) -> np.ndarray:
    """μ of the unit ball outside the slab |y₁| <= c."""
    c = np.clip(np.asarray(c, dtype=float), 0.0, 1.0)
    return betainc((dim + 1) / 2.0, 0.5, 1.0 - c * c)


def exact_supported(body: Body) -> bool:
    if isinstance(body, Ball | Ellipsoid):
        return True
    return isinstance(body, Polytope) and body.dim <= 3


def distribution(body: Body, x: ArrayLike, s: float, samples: int = EMPIRICAL_SAMPLES) -> SlabVolumeResult:
    """μ^K{y : |x·y| > s}, exact by clipping where available and Monte Carlo otherwise."""
    x = _as_direction_vector(x)
    if s < 0:
        raise DomainError(f"threshold must be nonnegative, got {s}")
    match body:
        case Ball():
            value = float(_ball_tail(body.dim, s / (body.radius * np.linalg.norm(x))))
            return SlabVolumeResult(s, value, EXACT_ERROR)
        case Ellipsoid():
            value = float(_ball_tail(body.dim, s / body.support(x)))
            return SlabVolumeResult(s, value, EXACT_ERROR)
        case Polytope() if body.dim == 2:
            tail = polygon_slab_tail(body.vertices, x, s)
            return SlabVolumeResult(s, min(1.0, tail / abs(shoelace(body.vertices))), EXACT_ERROR)
        case Polytope() if body.dim == 3:
            tail = polytope_slab_tail(body.vertices, body.edges, x, s)
            return SlabVolumeResult(s, min(1.0, tail / body.volume().value), EXACT_ERROR)
    pts = sample_uniform(body, samples, get_seed())
    p = float(np.mean(np.abs(pts @ x) > s))
    return SlabVolumeResult(s, p, float(np.sqrt(p * (1.0 - p) / samples)))


@dataclass(frozen=True, eq=False)
class SectionTable:
    """Cumulative section integral F(c) = |K ∩ {x̂·y <= c}| of a polytope."""

    levels: np.ndarray
    coeffs: np.ndarray
    cumulative: np.ndarray

    @property
    def total(self) -> float:
        return float(self.cumulative[-1])

    @classmethod
    def build(cls, polytope: Polytope, xh: np.ndarray) -> "SectionTable":
        z = np.unique(polytope.vertices @ xh)
        z = z[np.concatenate([[True], np.diff(z) > LEVEL_MERGE])]
        mids = (z[:-1] + z[1:]) / 2.0
        a0, am, a1 = (_section_measure(polytope, xh, lv) for lv in (z[:-1], mids, z[1:]))
        h = np.diff(z)
        p, q = am - a0, a1 - a0
        c2 = 2.0 * (q - 2.0 * p) / h**2
        c1 = (4.0 * p - q) / h
        pieces = h / 6.0 * (a0 + 4.0 * am + a1)
        return cls(z, np.column_stack([a0, c1, c2]), np.concatenate([[0.0], np.cumsum(pieces)]))

    def below(self, c: np.ndarray) -> np.ndarray:
        z = self.levels
        c = np.clip(np.asarray(c, dtype=float), z[0], z[-1])
        k = np.clip(np.searchsorted(z, c, side="right") - 1, 0, len(z) - 2)
        tau = c - z[k]
        a0, c1, c2 = self.coeffs[k].T
        return self.cumulative[k] + a0 * tau + c1 * tau**2 / 2.0 + c2 * tau**3 / 3.0


def _section_measure(polytope: Polytope, xh: np.ndarray, levels: np.ndarray) -> np.ndarray:
    if polytope.dim == 2:
        return chord_lengths(polytope.vertices, xh, levels)
    return np.array([section_area(polytope.vertices, polytope.edges, xh, lv) for lv in levels])


@dataclass(frozen=True, eq=False)
class RearrangementProfile:
    """The decreasing rearrangement of |x·y| over a body, for one x.

    Build with `make_profile`. Empirical profiles draw their sample once, from
    an explicit seed.
    """

    body: Body
    x: np.ndarray
    backend: Backend
    samples: int = 0
    seed: int | None = None
    _table: SectionTable | None = field(default=None, repr=False)
    _sorted: np.ndarray | None = field(default=None, repr=False)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.x))

    @property
    def ceiling(self) -> float:
        """ess sup |x·y| = max(h(K, x), h(K, −x)), the value of f* as t → 0."""
        return max(self.body.support(self.x), self.body.support(-self.x))

    def measure(self, s: ArrayLike) -> np.ndarray:
        """Vectorized μ(s)."""
        s = np.asarray(s, dtype=float)
        if self.backend == Backend.EMPIRICAL:
            assert self._sorted is not None
            above = len(self._sorted) - np.searchsorted(self._sorted, s, side="right")
            return above / len(self._sorted)
        match self.body:
            case Ball(dim=dim, radius=r):
                return _ball_tail(dim, s / (r * self.norm))
            case Ellipsoid():
                return _ball_tail(self.body.dim, s / self.body.support(self.x))
        assert self._table is not None
        c = s / self.norm
        table = self._table
        value = (table.total - table.below(c) + table.below(-c)) / table.total
        return np.clip(value, 0.0, 1.0)

    def values(self, t: ArrayLike) -> np.ndarray:
        """Vectorized f*(t) for t in (0, 1)."""
        t = np.asarray(t, dtype=float)
        if np.any((t <= 0.0) | (t >= 1.0)):
            raise DomainError("rearrangement is defined for 0 < t < 1")
        if self.backend == Backend.EMPIRICAL:
            assert self._sorted is not None
            n = len(self._sorted)
            rank = np.ceil(t * n).astype(int)
            return self._sorted[n - rank]
        lo = np.zeros_like(t)
        hi = np.full_like(t, self.ceiling)
        while np.max(hi - lo) > BISECTION_ATOL:
            mid = (lo + hi) / 2.0
            done = self.measure(mid) <= t
            hi = np.where(done, mid, hi)
            lo = np.where(done, lo, mid)
        return hi

    @property
    def quantile_error(self) -> float:
        """Order-statistic resolution of an empirical profile, 0 for exact ones."""
        if self.backend == Backend.EXACT_SLAB:
            return BISECTION_ATOL
        return 1.0 / np.sqrt(self.samples)


def make_profile(
    body: Body,
    x: ArrayLike,
    backend: Backend | None = None,
    samples: int = EMPIRICAL_SAMPLES,
    seed: int | None = None,
) -> RearrangementProfile:
    x = _as_direction_vector(x)
    if backend is None:
        backend = Backend.EXACT_SLAB if exact_supported(body) else Backend.EMPIRICAL
    if backend == Backend.EXACT_SLAB:
        if not exact_supported(body):
            raise DomainError(f"no exact slab backend for {body.kind} in dimension {body.dim}")
        table = None
        if isinstance(body, Polytope):
            table = SectionTable.build(body, x / np.linalg.norm(x))
        return RearrangementProfile(body, x, backend, _table=table)
    seed = get_seed() if seed is None else seed
    pts = sample_uniform(body, samples, seed)
    ordered = np.sort(np.abs(pts @ x))
    log.debug("empirical profile: %d samples, seed %d", samples, seed)
    return RearrangementProfile(body, x, backend, samples, seed, _sorted=ordered)


def rearrangement(profile: RearrangementProfile, t: float) -> float:
    """f*(t) = inf{s >= 0 : μ(s) <= t}."""
    return float(profile.values(np.array([t]))[0])


def midpoint_grid(grid_size: int) -> np.ndarray:
    return (np.arange(grid_size) + 0.5) / grid_size


def tabulate(profile: RearrangementProfile, t: np.ndarray) -> np.ndarray:
    """f* on an increasing t grid, rejecting increases beyond tolerance."""
    values = profile.values(t)
    rises = np.diff(values)
    bad = np.flatnonzero(rises > MONOTONE_TOL)
    if bad.size:
        i = int(bad[0])
        raise MonotonicityViolation(
            f"f* increases by {rises[i]:.3e} between t={t[i]:.6g} and t={t[i + 1]:.6g}"
        )
    return np.minimum.accumulate(values)


def rearrangement_breakpoints(profile: RearrangementProfile, grid_size: int) -> list[tuple[float, float]]:
    if grid_size < 2:
        raise DomainError(f"grid_size must be >= 2, got {grid_size}")
    t = midpoint_grid(grid_size)
    return list(zip(t.tolist(), tabulate(profile, t).tolist(), strict=True))


def tabulate_csv(profile: RearrangementProfile, grid_size: int, path: str | Path) -> Path:
    return write_csv(path, ["t", "fstar"], rearrangement_breakpoints(profile, grid_size))


@cache
def ball_half_quantile(dim: int) -> float:
    """f*_{u,B}(1/2) for the unit ball; independent of the unit vector u."""
    e1 = np.zeros(dim)
    e1[0] = 1.0
    return rearrangement(make_profile(Ball(dim), e1), 0.5)


def equimeasurability_gap(profile: RearrangementProfile, thresholds: ArrayLike, grid_size: int = 20_000) -> float:
    """max_s |Leb{t : f*(t) > s} − μ(s)|, with Leb measured on a midpoint grid."""
    t = midpoint_grid(grid_size)
    fstar = profile.values(t)
    gaps = [abs(np.mean(fstar > s) - float(profile.measure(s))) for s in np.asarray(thresholds, dtype=float)]
    return float(max(gaps))


@dataclass(frozen=True, slots=True)
class LayerCakeReport:
    integral: float
    moment: float
    stderr: float

    @property
    def gap(self) -> float:
        return abs(self.integral - self.moment)


def layer_cake_check(
    profile: RearrangementProfile, samples: int = 10**6, seed: int | None = None, grid_size: int = 20_000
) -> LayerCakeReport:
    """Compare ∫₀¹ f*(t) dt with a Monte Carlo estimate of (1/|K|)∫_K |x·y| dy."""
    integral = float(np.mean(profile.values(midpoint_grid(grid_size))))
    pts = sample_uniform(profile.body, samples, get_seed() if seed is None else seed)
    values = np.abs(pts @ profile.x)
    return LayerCakeReport(integral, float(values.mean()), float(values.std() / np.sqrt(samples)))


def phi_rearrangement_identity(
    profile: RearrangementProfile,
    phi: Callable[[np.ndarray], np.ndarray],
    t: ArrayLike,
    samples: int = EMPIRICAL_SAMPLES,
    seed: int | None = None,
) -> float:
    """max_t |φ(f*(t)) − (φ∘|f|)*(t)|, the right side taken as an empirical quantile.

    The gap is relative to the largest value of φ(f*) on the grid.
    """
    t = np.asarray(t, dtype=float)
    lhs = phi(profile.values(t))
    pts = sample_uniform(profile.body, samples, get_seed() if seed is None else seed)
    composed = np.sort(phi(np.abs(pts @ profile.x)))
    rank = np.array([ceil(v * samples) for v in t])
    rhs = composed[samples - rank]
    scale = max(float(np.max(np.abs(lhs))), 1e-300)
    return float(np.max(np.abs(lhs - rhs)) / scale)

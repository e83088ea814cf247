"""
Orlicz functions φ, weights ω and the Orlicz–Lorentz norm solve.

For a rearrangement profile f* the norm is the unique λ* with
Φ(λ*) = ∫₀¹ φ(f*(t)/λ*) ω(t) dt = 1. Φ is evaluated by midpoint cells on a
tabulation of f*, with the weight mass of each cell taken in closed form, so
weights singular at t = 0 need no special treatment.
"""

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Protocol, runtime_checkable

import numpy as np
from numpy.typing import ArrayLike
from scipy.optimize import bisect
from scipy.special import gamma

from .bodies import Ball, Body, Ellipsoid, Polytope, cached_volume_estimate, unit_ball_volume
from .config import (
    EXP_ARG_CAP,
    MAX_BRACKET_STEPS,
    PHI_SATURATION,
    RICHARDSON_CELLS,
    RICHARDSON_TOL,
    get_quadrature_cells,
    get_seed,
)
from .errors import (
    BracketFailure,
    ConfigError,
    DomainError,
    FunctionValidationError,
    NonpositiveLambda,
    OlcbError,
)
from .rearrange import (
    Backend,
    RearrangementProfile,
    SectionTable,
    ball_half_quantile,
    make_profile,
    midpoint_grid,
    tabulate,
)
from .sampling import sample_uniform

log = logging.getLogger(__name__)


@runtime_checkable
class OrliczFunction(Protocol):
    family: str

    def __call__(self, s: ArrayLike) -> np.ndarray: ...

    def inverse(self, a: ArrayLike) -> np.ndarray: ...

    def to_dict(self) -> dict: ...


@runtime_checkable
class WeightFunction(Protocol):
    family: str

    def __call__(self, t: ArrayLike) -> np.ndarray: ...

    def partial(self, a: ArrayLike, b: ArrayLike) -> np.ndarray:
        """W(a, b) = ∫ₐᵇ ω(t) dt in closed form."""
        ...

    def to_dict(self) -> dict: ...


## Orlicz families


@dataclass(frozen=True, slots=True)
class Power:
    """φ(s) = s^p, p >= 1. Power(1) is the identity."""

    p: float = 1.0
    family: str = field(default="power", init=False)

    def __post_init__(self):
        if not self.p >= 1.0:
            raise FunctionValidationError(f"power family needs p >= 1, got {self.p}")

    def __call__(self, s: ArrayLike) -> np.ndarray:
        return np.power(np.asarray(s, dtype=float), self.p)

    def inverse(self, a: ArrayLike) -> np.ndarray:
        return np.power(np.asarray(a, dtype=float), 1.0 / self.p)

    def to_dict(self) -> dict:
        return {"family": self.family, "p": self.p}


@dataclass(frozen=True, slots=True)
class ScaledExp:
    """φ(s) = e^{cs} − 1, with the exponent capped at 700."""

    c: float = 1.0
    family: str = field(default="scaled_exp", init=False)

    def __post_init__(self):
        if not self.c > 0:
            raise FunctionValidationError(f"scaled_exp needs c > 0, got {self.c}")

    def __call__(self, s: ArrayLike) -> np.ndarray:
        arg = np.minimum(self.c * np.asarray(s, dtype=float), EXP_ARG_CAP)
        return np.expm1(arg)

    def inverse(self, a: ArrayLike) -> np.ndarray:
        return np.log1p(np.asarray(a, dtype=float)) / self.c

    def to_dict(self) -> dict:
        return {"family": self.family, "c": self.c}


@dataclass(frozen=True, eq=False)
class PiecewiseLinearConvex:
    """Convex polyline through (0, 0) and the given knots, extended by its last slope."""

    knots: np.ndarray
    family: str = field(default="piecewise_linear", init=False)

    def __post_init__(self):
        k = np.atleast_2d(np.asarray(self.knots, dtype=float))
        if k.shape[1] != 2 or len(k) < 2:
            raise FunctionValidationError("knots must be at least two (s, φ(s)) pairs")
        if k[0, 0] != 0.0 or k[0, 1] != 0.0:
            raise FunctionValidationError("first knot must be (0, 0)")
        ds = np.diff(k[:, 0])
        if np.any(ds <= 0):
            raise FunctionValidationError(f"knot abscissae must increase at knot {int(np.argmin(ds)) + 1}")
        slopes = np.diff(k[:, 1]) / ds
        if slopes[0] <= 0:
            raise FunctionValidationError("first slope must be positive")
        drops = np.flatnonzero(np.diff(slopes) < 0)
        if drops.size:
            raise FunctionValidationError(f"slopes must be nondecreasing at knot {int(drops[0]) + 1}")
        object.__setattr__(self, "knots", k)

    @property
    def _last_slope(self) -> float:
        k = self.knots
        return float((k[-1, 1] - k[-2, 1]) / (k[-1, 0] - k[-2, 0]))

    def __call__(self, s: ArrayLike) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        k = self.knots
        inside = np.interp(s, k[:, 0], k[:, 1])
        return np.where(s > k[-1, 0], k[-1, 1] + self._last_slope * (s - k[-1, 0]), inside)

    def inverse(self, a: ArrayLike) -> np.ndarray:
        a = np.asarray(a, dtype=float)
        k = self.knots
        inside = np.interp(a, k[:, 1], k[:, 0])
        return np.where(a > k[-1, 1], k[-1, 0] + (a - k[-1, 1]) / self._last_slope, inside)

    def to_dict(self) -> dict:
        return {"family": self.family, "knots": self.knots.tolist()}


def validate_phi(phi: OrliczFunction, seed: int = 0, upper: float = 10.0) -> None:
    """Check φ(0) = 0, positivity, strict increase, convexity and the inverse."""
    if float(phi(0.0)) != 0.0:
        raise FunctionValidationError(f"{phi.family}: φ(0) = {float(phi(0.0))!r}")
    s = np.linspace(0.0, upper, 1001)[1:]
    values = phi(s)
    if np.any(values <= 0):
        raise FunctionValidationError(f"{phi.family}: φ is not positive on (0, ∞)")
    if np.any(np.diff(values) <= 0):
        raise FunctionValidationError(f"{phi.family}: φ is not strictly increasing")
    rng = np.random.default_rng(seed)
    a, b = rng.uniform(0, upper, size=(2, 200))
    w = rng.uniform(size=200)
    mixed = phi(w * a + (1 - w) * b)
    chord = w * phi(a) + (1 - w) * phi(b)
    if np.any(mixed > chord * (1 + 1e-12) + 1e-12):
        raise FunctionValidationError(f"{phi.family}: convexity fails on a random triple")
    grid = np.linspace(0.0, float(phi(upper)), 257)
    back = phi(phi.inverse(grid))
    if np.any(np.abs(back - grid) > 1e-10 * np.maximum(1.0, grid)):
        raise FunctionValidationError(f"{phi.family}: φ(φ⁻¹(a)) != a")


## Weight families


@dataclass(frozen=True, slots=True)
class Constant:
    value: float = 1.0
    family: str = field(default="constant", init=False)

    def __post_init__(self):
        if not self.value > 0:
            raise FunctionValidationError(f"constant weight must be positive, got {self.value}")

    def __call__(self, t: ArrayLike) -> np.ndarray:
        return np.full_like(np.asarray(t, dtype=float), self.value)

    def partial(self, a: ArrayLike, b: ArrayLike) -> np.ndarray:
        return self.value * (np.asarray(b, dtype=float) - np.asarray(a, dtype=float))

    def to_dict(self) -> dict:
        return {"family": self.family, "value": self.value}


@dataclass(frozen=True, slots=True)
class PowerSingular:
    """ω(t) = t^(−β), 0 <= β < 1."""

    beta: float = 0.5
    family: str = field(default="power_singular", init=False)

    def __post_init__(self):
        if not 0.0 <= self.beta < 1.0:
            raise FunctionValidationError(f"power_singular needs 0 <= beta < 1, got {self.beta}")

    def __call__(self, t: ArrayLike) -> np.ndarray:
        return np.power(np.asarray(t, dtype=float), -self.beta)

    def partial(self, a: ArrayLike, b: ArrayLike) -> np.ndarray:
        e = 1.0 - self.beta
        return (np.power(np.asarray(b, dtype=float), e) - np.power(np.asarray(a, dtype=float), e)) / e

    def to_dict(self) -> dict:
        return {"family": self.family, "beta": self.beta}


@dataclass(frozen=True, eq=False)
class PiecewiseConstantNonincreasing:
    """Step weight: `steps` are (right end, value) pairs, the last ending at 1."""

    steps: np.ndarray
    family: str = field(default="piecewise_constant", init=False)

    def __post_init__(self):
        st = np.atleast_2d(np.asarray(self.steps, dtype=float))
        ends, values = st[:, 0], st[:, 1]
        if ends[-1] != 1.0:
            raise FunctionValidationError("last step must end at t = 1")
        if ends[0] <= 0.0 or np.any(np.diff(ends) <= 0):
            raise FunctionValidationError("step ends must increase within (0, 1]")
        if np.any(values <= 0):
            raise FunctionValidationError(f"weight values must be positive (step {int(np.argmin(values))})")
        rises = np.flatnonzero(np.diff(values) > 0)
        if rises.size:
            raise FunctionValidationError(f"weight must be nonincreasing (step {int(rises[0]) + 1})")
        object.__setattr__(self, "steps", st)

    @cached_property
    def _cumulative(self) -> tuple[np.ndarray, np.ndarray]:
        ends, values = self.steps[:, 0], self.steps[:, 1]
        knots = np.concatenate([[0.0], ends])
        return knots, np.concatenate([[0.0], np.cumsum(values * np.diff(knots))])

    def __call__(self, t: ArrayLike) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        idx = np.clip(np.searchsorted(self.steps[:, 0], t, side="left"), 0, len(self.steps) - 1)
        return self.steps[idx, 1]

    def partial(self, a: ArrayLike, b: ArrayLike) -> np.ndarray:
        knots, cum = self._cumulative
        return np.interp(b, knots, cum) - np.interp(a, knots, cum)

    def to_dict(self) -> dict:
        return {"family": self.family, "steps": self.steps.tolist()}


@dataclass(frozen=True, slots=True)
class NegatedCell:
    """A weight with its mass over one cell sign-flipped; used to self-test the harness."""

    base: WeightFunction
    cell: tuple[float, float] = (0.0, 0.25)
    family: str = field(default="negated_cell", init=False)

    def __call__(self, t: ArrayLike) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        inside = (t > self.cell[0]) & (t <= self.cell[1])
        return np.where(inside, -1.0, 1.0) * self.base(t)

    def partial(self, a: ArrayLike, b: ArrayLike) -> np.ndarray:
        lo = np.clip(a, *self.cell)
        hi = np.clip(b, *self.cell)
        return self.base.partial(a, b) - 2.0 * self.base.partial(lo, hi)

    def to_dict(self) -> dict:
        return {"family": self.family, "base": self.base.to_dict(), "cell": list(self.cell)}


def validate_omega(omega: WeightFunction, grid_size: int = 1000) -> None:
    """Check positivity, monotonicity, finite mass and W against quadrature away from 0."""
    t = midpoint_grid(grid_size)
    values = omega(t)
    if np.any(values <= 0):
        raise FunctionValidationError(f"{omega.family}: ω is not positive")
    if np.any(np.diff(values) > 1e-12):
        raise FunctionValidationError(f"{omega.family}: ω is not nonincreasing")
    if not np.isfinite(float(omega.partial(0.0, 1.0))):
        raise FunctionValidationError(f"{omega.family}: ∫₀¹ ω is not finite")
    for a, b in ((0.1, 0.3), (0.25, 0.75), (0.5, 1.0)):
        nodes, weights = np.polynomial.legendre.leggauss(64)
        mid, half = (a + b) / 2.0, (b - a) / 2.0
        # Step weights jump inside the interval, so compare against a fine midpoint sum instead.
        if omega.family == "piecewise_constant":
            cells = midpoint_grid(200_000) * (b - a) + a
            approx = float(np.sum(omega(cells)) * (b - a) / 200_000)
            tol = 1e-4
        else:
            approx = float(half * np.sum(weights * omega(mid + half * nodes)))
            tol = 1e-8
        if abs(approx - float(omega.partial(a, b))) > tol:
            raise FunctionValidationError(f"{omega.family}: W({a}, {b}) disagrees with quadrature")


def negate_weight_cell(omega: WeightFunction, cell: tuple[float, float] = (0.0, 0.25)) -> NegatedCell:
    return NegatedCell(omega, cell)


## Config parsing


def phi_from_spec(spec: dict) -> OrliczFunction:
    family = spec.get("family")
    try:
        match family:
            case "power":
                return Power(float(spec.get("p", 1.0)))
            case "identity":
                return Power(1.0)
            case "scaled_exp":
                return ScaledExp(float(spec.get("c", 1.0)))
            case "piecewise_linear":
                return PiecewiseLinearConvex(np.asarray(spec["knots"], dtype=float))
    except KeyError as err:
        raise ConfigError(f"phi family {family!r} is missing {err}") from err
    raise ConfigError(f"unknown phi family {family!r}")


def omega_from_spec(spec: dict, allow_fault: bool = False) -> WeightFunction:
    """Parse a weight family. `negated_cell` is a fault weight and needs `allow_fault`."""
    family = spec.get("family")
    try:
        match family:
            case "constant":
                return Constant(float(spec.get("value", 1.0)))
            case "power_singular":
                return PowerSingular(float(spec["beta"]))
            case "piecewise_constant":
                return PiecewiseConstantNonincreasing(np.asarray(spec["steps"], dtype=float))
            case "negated_cell" if allow_fault:
                lo, hi = spec.get("cell", (0.0, 0.25))
                return NegatedCell(omega_from_spec(spec["base"]), (float(lo), float(hi)))
    except KeyError as err:
        raise ConfigError(f"omega family {family!r} is missing {err}") from err
    if family == "negated_cell":
        raise ConfigError('negated_cell is a fault weight; set "inject_fault" instead')
    raise ConfigError(f"unknown omega family {family!r}")


## Φ(λ) and the norm solve


@dataclass(frozen=True, eq=False)
class Quadrature:
    """f* at cell midpoints and the exact weight mass of each cell."""

    fstar: np.ndarray
    weights: np.ndarray

    @property
    def cells(self) -> int:
        return len(self.fstar)

    @classmethod
    def build(cls, profile: RearrangementProfile, omega: WeightFunction, cells: int) -> "Quadrature":
        edges = np.linspace(0.0, 1.0, cells + 1)
        return cls(tabulate(profile, midpoint_grid(cells)), omega.partial(edges[:-1], edges[1:]))

    def evaluate(self, phi: OrliczFunction, lam: float) -> float:
        if not lam > 0:
            raise NonpositiveLambda(f"λ must be positive, got {lam}")
        total = float(phi(self.fstar / lam) @ self.weights)
        if not np.isfinite(total) or total > PHI_SATURATION:
            return PHI_SATURATION
        return total


def phi_functional(
    profile: RearrangementProfile,
    phi: OrliczFunction,
    omega: WeightFunction,
    lam: float,
    cells: int | None = None,
) -> float:
    """Φ(λ) = ∫₀¹ φ(f*(t)/λ) ω(t) dt."""
    if not lam > 0:
        raise NonpositiveLambda(f"λ must be positive, got {lam}")
    return Quadrature.build(profile, omega, cells or get_quadrature_cells()).evaluate(phi, lam)


@dataclass(frozen=True, slots=True)
class NormSolveReport:
    lam: float
    bracket: tuple[float, float]
    residual: float
    cells: int
    backend: Backend
    bracket_steps: int = 0
    richardson_delta: float = 0.0
    flagged: bool = False


@dataclass(frozen=True, slots=True)
class SupportBounds:
    lower: float
    upper: float
    displayed_lower: float
    c: float


def lemma33_bounds(body: Body, x: ArrayLike, phi: OrliczFunction, omega: WeightFunction) -> SupportBounds:
    """Two-sided bounds on h(Γ_{φ,ω}K, u) for a unit vector u.

    lower = r_K f*_{u,B}(1/2) / φ⁻¹(1/W(0, c)) and upper = R_K / φ⁻¹(1/W(0, 1)), with
    c = r_K^n ω_n / (2|K|). `displayed_lower` is the reciprocal arrangement
    1 / (r_K f*_{u,B}(1/2) φ⁻¹(1/W(0, c))), kept for comparison only: it is not
    a lower bound (it exceeds the support of the disk).
    """
    x = np.asarray(x, dtype=float)
    if abs(np.linalg.norm(x) - 1.0) > 1e-12:
        raise DomainError(f"bounds are stated for unit vectors, got |x| = {np.linalg.norm(x)!r}")
    r, big_r = body.radii()
    n = body.dim
    vol = cached_volume_estimate(body)
    c = r**n * unit_ball_volume(n) / (2.0 * vol.value)
    # a Monte Carlo |K| may undershoot r^n ω_n; anything inside its 3σ band counts as c = 1/2
    c_lo = r**n * unit_ball_volume(n) / (2.0 * (vol.value + 3.0 * vol.stderr))
    if c_lo > 0.5 + 1e-9:
        raise DomainError(f"c(n,K) = {c!r} exceeds 1/2: |K| is below the inscribed ball volume")
    c = min(c, 0.5)
    scale = r * ball_half_quantile(n)
    inv_c = float(phi.inverse(1.0 / float(omega.partial(0.0, c))))
    inv_1 = float(phi.inverse(1.0 / float(omega.partial(0.0, 1.0))))
    return SupportBounds(
        lower=scale / inv_c,
        upper=big_r / inv_1,
        displayed_lower=1.0 / (scale * inv_c),
        c=c,
    )


def _initial_bracket(profile: RearrangementProfile, phi: OrliczFunction, omega: WeightFunction) -> tuple[float, float]:
    norm = profile.norm
    try:
        bounds = lemma33_bounds(profile.body, profile.x / norm, phi, omega)
        lo, hi = bounds.lower * norm, bounds.upper * norm
    except (OlcbError, ValueError, ZeroDivisionError, FloatingPointError) as err:
        log.debug("support bounds unavailable, bracketing from the ceiling: %s", err)
        lo, hi = 0.0, 0.0
    if not (np.isfinite(lo) and lo > 0):
        lo = profile.ceiling * 1e-3
    if not (np.isfinite(hi) and hi > lo):
        hi = max(profile.ceiling, 2.0 * lo)
    return lo, hi


def _solve(quad: Quadrature, phi: OrliczFunction, lo: float, hi: float) -> tuple[float, float, float, int]:
    def excess(lam: float) -> float:
        return quad.evaluate(phi, lam) - 1.0

    steps = 0
    while excess(lo) <= 0.0:
        if steps >= MAX_BRACKET_STEPS:
            raise BracketFailure(f"Φ(λ) <= 1 down to λ = {lo:.3e}")
        lo /= 2.0
        steps += 1
    while excess(hi) >= 0.0:
        if steps >= MAX_BRACKET_STEPS:
            raise BracketFailure(f"Φ(λ) >= 1 up to λ = {hi:.3e}")
        hi *= 2.0
        steps += 1
    lam = float(bisect(excess, lo, hi, xtol=1e-15 * hi, rtol=8.9e-16, maxiter=400))
    return lam, lo, hi, steps


def norm_solve(
    profile: RearrangementProfile,
    phi: OrliczFunction,
    omega: WeightFunction,
    cells: int | None = None,
    richardson: bool = True,
) -> NormSolveReport:
    """Solve Φ(λ) = 1 by bisection inside a bracket seeded from the support bounds."""
    cells = cells or get_quadrature_cells()
    quad = Quadrature.build(profile, omega, cells)
    lo, hi = _initial_bracket(profile, phi, omega)
    lam, lo, hi, steps = _solve(quad, phi, lo, hi)
    residual = abs(quad.evaluate(phi, lam) - 1.0)

    delta = 0.0
    if richardson:
        fine = Quadrature.build(profile, omega, max(RICHARDSON_CELLS, 2 * cells))
        fine_lam, *_ = _solve(fine, phi, lo, hi)
        delta = abs(fine_lam - lam) / lam
    flagged = delta > RICHARDSON_TOL
    if flagged:
        log.warning("quadrature disagreement %.3e at %d cells", delta, cells)
    return NormSolveReport(lam, (lo, hi), residual, cells, profile.backend, steps, delta, flagged)


def orlicz_lorentz_norm(
    body: Body, x: ArrayLike, phi: OrliczFunction, omega: WeightFunction, **kwargs
) -> NormSolveReport:
    return norm_solve(make_profile(body, x), phi, omega, **kwargs)


## Special cases and oracles


def _ball_abs_moment(dim: int, p: float) -> float:
    """E|y₁|^p for y uniform in the unit ball of R^dim."""
    return gamma((p + 1) / 2) * gamma(dim / 2 + 1) / (np.sqrt(np.pi) * gamma((dim + p) / 2 + 1))


def _section_moment(table: SectionTable, p: float) -> float:
    """∫|z|^p A(z) dz over the section table, split at 0, by 64-point Gauss-Legendre."""
    nodes, weights = np.polynomial.legendre.leggauss(64)
    z = table.levels
    breaks = np.unique(np.concatenate([z, [0.0]] if z[0] < 0.0 < z[-1] else [z]))
    total = 0.0
    for a, b in zip(breaks[:-1], breaks[1:], strict=True):
        mid, half = (a + b) / 2.0, (b - a) / 2.0
        pts = mid + half * nodes
        k = np.clip(np.searchsorted(z, pts, side="right") - 1, 0, len(z) - 2)
        tau = pts - z[k]
        a0, c1, c2 = table.coeffs[k].T
        total += half * float(np.sum(weights * np.abs(pts) ** p * (a0 + c1 * tau + c2 * tau**2)))
    return total


def lp_moment_norm(body: Body, x: ArrayLike, p: float, samples: int = 10**6, seed: int | None = None) -> float:
    """((1/|K|) ∫_K |x·y|^p dy)^{1/p}, the L_p centroid body support."""
    x = np.asarray(x, dtype=float)
    match body:
        case Ball():
            return body.radius * float(np.linalg.norm(x)) * _ball_abs_moment(body.dim, p) ** (1 / p)
        case Ellipsoid():
            return body.support(x) * _ball_abs_moment(body.dim, p) ** (1 / p)
        case Polytope() if body.dim <= 3:
            norm = float(np.linalg.norm(x))
            table = SectionTable.build(body, x / norm)
            return norm * (_section_moment(table, p) / table.total) ** (1 / p)
    pts = sample_uniform(body, samples, get_seed() if seed is None else seed)
    return float(np.mean(np.abs(pts @ x) ** p) ** (1 / p))


@dataclass(frozen=True, slots=True)
class SubadditivityReport:
    lhs: float
    rhs: float

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs


def weighted_rearranged_integral(g: ArrayLike, omega: WeightFunction) -> float:
    """∫₀¹ |g|* ω for a step function g on equal cells of (0, 1)."""
    g = np.sort(np.abs(np.asarray(g, dtype=float)))[::-1]
    edges = np.linspace(0.0, 1.0, len(g) + 1)
    return float(g @ omega.partial(edges[:-1], edges[1:]))


def weighted_subadditivity_check(g1: ArrayLike, g2: ArrayLike, omega: WeightFunction) -> SubadditivityReport:
    """∫(g₁+g₂)*ω against ∫g₁*ω + ∫g₂*ω for step functions on a common partition."""
    g1, g2 = np.asarray(g1, dtype=float), np.asarray(g2, dtype=float)
    lhs = weighted_rearranged_integral(g1 + g2, omega)
    rhs = weighted_rearranged_integral(g1, omega) + weighted_rearranged_integral(g2, omega)
    return SubadditivityReport(lhs, rhs)

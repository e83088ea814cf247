"""
Verification campaigns: experiment configs, corpora, result rows.

Every campaign returns `VerificationRow`s sorted by body id and statistic,
plus the artifact paths it wrote. Per-trial solver failures become failed
rows instead of aborting the run.
"""

import json
import logging
import pickle
import zlib
from collections.abc import Callable, Iterable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import jmespath
import numpy as np
from diskcache import Cache
from funlog import log_calls

from .bodies import Ball, Body, Polytope, dump_body, load_body
from .centroid import (
    ball_reference_ratio,
    build_centroid_body,
    centroid_bracket,
    continuity_in_body,
    continuity_in_phi,
    equivariance_check,
    export_csv,
    ratio_from_bracket,
    volume_ratio,
)
from .clipping import orthonormal_complement
from .config import CONFIG_SCHEMA_VERSION, NORM_RESIDUAL, REL_TOL, cache_path, get_grid_size, get_threads
from .corpus import CorpusEntry, generate, random_linear_maps, reference_bodies
from .errors import ConfigError, FunctionValidationError, OlcbError
from .export import write_csv, write_jsonl
from .grids import direction_grid
from .orlicz import (
    Constant,
    OrliczFunction,
    Power,
    WeightFunction,
    lemma33_bounds,
    lp_moment_norm,
    negate_weight_cell,
    norm_solve,
    omega_from_spec,
    phi_from_spec,
    validate_omega,
    validate_phi,
)
from .rearrange import make_profile
from .steiner import (
    chord_decomposition,
    default_schedule,
    graph_functions,
    lemma41_inequality_check,
    lemma42_inclusion_check,
    maps_S_T_check,
    steiner_symmetrize,
    symmetrization_schedule,
    trace_to_jsonl,
)

log = logging.getLogger(__name__)

cache = Cache(cache_path, disk_pickle_protocol=pickle.HIGHEST_PROTOCOL)

SANDWICH_TOL = REL_TOL
STEINER_TOL = REL_TOL
VOLUME_TOL = 1e-9
EQUIVARIANCE_TOL = 1e-5
NEAR_ELLIPSE_TOL = 1e-3
LP_TOL = 1e-4
LP_POWERS = (1.0, 2.0, 4.0)
LP_DIRECTIONS = 16
CONTINUITY_PHI_TOL = 1e-2
CONTINUITY_RATIO = (3.0, 30.0)
FAULTS = (None, "negate_weight_cell")


## Config


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    name: str
    dim: int
    body: dict
    phi: OrliczFunction
    omega: WeightFunction
    directions: np.ndarray | None = None
    grid_size: int | None = None
    trials: int = 100
    pairs: int = 20
    steps: int = 50
    seed: int = 0
    include_ellipses: bool = False
    include_regular: tuple[int, ...] = ()
    inject_fault: str | None = None
    quadrature_cells: int | None = None
    base_dir: Path = field(default_factory=Path.cwd)
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def solver_omega(self) -> WeightFunction:
        """The weight handed to norm solves; differs from `omega` only under fault injection."""
        if self.inject_fault == "negate_weight_cell":
            return negate_weight_cell(self.omega)
        return self.omega

    @property
    def grid(self) -> int:
        return self.grid_size or get_grid_size(self.dim)


def _required(data: dict, expression: str) -> Any:
    value = jmespath.search(expression, data)
    if value is None:
        raise ConfigError(f"config is missing '{expression}'")
    return value


def load_experiment(source: str | Path | dict) -> ExperimentConfig:
    """Parse and validate an experiment config; every error surfaces before any solving."""
    base_dir = Path.cwd()
    if isinstance(source, dict):
        data = source
    else:
        path = Path(source)
        try:
            with open(path) as f:
                data = json.load(f)
        except (OSError, json.JSONDecodeError) as err:
            raise ConfigError(f"cannot read config {path}: {err}") from err
        base_dir = path.parent

    version = jmespath.search("schema_version", data)
    if version != CONFIG_SCHEMA_VERSION:
        raise ConfigError(f"schema_version {version!r} is not supported (expected {CONFIG_SCHEMA_VERSION})")
    dim = _required(data, "dim")
    if not isinstance(dim, int) or dim < 2:
        raise ConfigError(f"dim must be an integer >= 2, got {dim!r}")
    body = _required(data, "body")
    if not any(k in body for k in ("file", "generator", "inline")):
        raise ConfigError("body needs one of 'file', 'generator' or 'inline'")
    if jmespath.search("body.generator", data) is not None:
        _required(data, "body.generator.kind")

    directions = jmespath.search("directions", data)
    if directions is not None:
        directions = np.asarray(directions, dtype=float)
        if directions.ndim != 2 or directions.shape[1] != dim:
            raise ConfigError(f"directions must be vectors of length {dim}")
        zero = np.flatnonzero(~np.any(directions, axis=1))
        if zero.size:
            raise ConfigError(f"direction {int(zero[0])} is the zero vector")

    fault = jmespath.search("inject_fault", data)
    if fault not in FAULTS:
        raise ConfigError(f"unknown fault {fault!r}")

    try:
        phi = phi_from_spec(_required(data, "phi"))
        omega = omega_from_spec(_required(data, "omega"))
        validate_phi(phi)
        validate_omega(omega)
    except FunctionValidationError as err:
        raise ConfigError(str(err)) from err

    return ExperimentConfig(
        name=str(jmespath.search("name", data) or "experiment"),
        dim=dim,
        body=body,
        phi=phi,
        omega=omega,
        directions=directions,
        grid_size=jmespath.search("grid_size", data),
        trials=int(jmespath.search("trials", data) or 100),
        pairs=int(jmespath.search("pairs", data) or 20),
        steps=int(jmespath.search("steps", data) or 50),
        seed=int(jmespath.search("seed", data) or 0),
        include_ellipses=bool(jmespath.search("include_ellipses", data)),
        include_regular=tuple(jmespath.search("include_regular", data) or ()),
        inject_fault=fault,
        quadrature_cells=jmespath.search("quadrature_cells", data),
        base_dir=base_dir,
        raw=data,
    )


def load_config_body(config: ExperimentConfig) -> Body:
    """The single body of `file` and `inline` configs, or the first generated one."""
    if "file" in config.body:
        return load_body(config.base_dir / config.body["file"])
    if "inline" in config.body:
        return load_body(config.body["inline"])
    return build_corpus(config, references=False)[0].body


def build_corpus(config: ExperimentConfig, references: bool = True) -> list[CorpusEntry]:
    gen = config.body.get("generator")
    if gen is None:
        entries = [CorpusEntry("body", load_config_body(config))]
    else:
        entries = generate(
            kind=gen["kind"],
            count=int(gen.get("count", 10)),
            vertex_count=int(gen.get("vertex_count", 8)),
            seed=config.seed,
            inradius_floor=float(gen.get("inradius_floor", 0.1)),
            dim=config.dim,
        )
    if references:
        entries += reference_bodies(
            config.dim, config.seed, ellipses=3 if config.include_ellipses else 0, regular=config.include_regular
        )
    return entries


def config_directions(config: ExperimentConfig) -> np.ndarray:
    if config.directions is not None:
        return config.directions
    return np.eye(config.dim)


## Rows and summaries


@dataclass(frozen=True, slots=True)
class VerificationRow:
    body_id: str
    statistic: str
    lhs: float
    rhs: float
    slack: float
    tolerance: float
    metadata: str = ""

    @property
    def passed(self) -> bool:
        return bool(self.slack >= -self.tolerance)

    @classmethod
    def failed(cls, body_id: str, statistic: str, err: Exception) -> "VerificationRow":
        return cls(body_id, statistic, float("nan"), float("nan"), float("nan"), 0.0, f"error: {err}")

    def as_cells(self) -> list:
        return [self.body_id, self.statistic, self.lhs, self.rhs, self.slack, self.tolerance, self.passed, self.metadata]


ROW_HEADER = ["body_id", "statistic", "lhs", "rhs", "slack", "tolerance", "pass", "metadata"]


@dataclass(frozen=True, slots=True)
class ToleranceBudget:
    """Where a campaign's tolerance goes: solver residual, quadrature disagreement, bracket width."""

    solver_residual: float = NORM_RESIDUAL
    quadrature: float = 0.0
    bracket_width: float = 0.0

    @property
    def total(self) -> float:
        return self.solver_residual + self.quadrature + self.bracket_width


def tolerance_budget(reports: Iterable[Any] = (), bracket_width: float = 0.0) -> ToleranceBudget:
    residual, quadrature = 0.0, 0.0
    for report in reports:
        residual = max(residual, report.residual)
        quadrature = max(quadrature, report.richardson_delta)
    return ToleranceBudget(max(residual, 0.0), quadrature, bracket_width)


@dataclass(frozen=True, slots=True)
class Summary:
    total: int
    failures: int
    min_slack: float
    by_statistic: dict[str, tuple[int, int]]

    @property
    def passed(self) -> bool:
        return self.failures == 0


def summarize(rows: list[VerificationRow]) -> Summary:
    by_statistic: dict[str, tuple[int, int]] = {}
    for row in rows:
        total, failed = by_statistic.get(row.statistic, (0, 0))
        by_statistic[row.statistic] = (total + 1, failed + (not row.passed))
    slacks = [row.slack for row in rows if np.isfinite(row.slack)]
    return Summary(
        total=len(rows),
        failures=sum(not row.passed for row in rows),
        min_slack=min(slacks, default=float("nan")),
        by_statistic=by_statistic,
    )


@dataclass(frozen=True, eq=False)
class CampaignResult:
    rows: list[VerificationRow]
    budget: ToleranceBudget
    artifacts: list[Path] = field(default_factory=list)

    @property
    def summary(self) -> Summary:
        return summarize(self.rows)


def _sorted_rows(rows: Iterable[VerificationRow]) -> list[VerificationRow]:
    return sorted(rows, key=lambda r: (r.body_id, r.statistic))


def _parallel(
    fn: Callable[[CorpusEntry], list[VerificationRow]],
    entries: list[CorpusEntry],
    advance: Callable[[int], None] | None = None,
) -> list[VerificationRow]:
    def task(entry: CorpusEntry) -> list[VerificationRow]:
        try:
            rows = fn(entry)
        except OlcbError as err:
            log.warning("%s failed: %s", entry.body_id, err)
            rows = [VerificationRow.failed(entry.body_id, fn.__name__.removeprefix("_"), err)]
        if advance is not None:
            advance(1)
        return rows

    with ThreadPoolExecutor(max_workers=get_threads()) as pool:
        return _sorted_rows(row for rows in pool.map(task, entries) for row in rows)


def _write_rows(out_dir: Path, name: str, rows: list[VerificationRow]) -> Path:
    return write_csv(out_dir / f"{name}.csv", ROW_HEADER, (row.as_cells() for row in rows))


## Reference values


@cache.memoize(expire=60 * 60 * 24 * 30)
def _ball_reference(dim: int, phi_spec: str, omega_spec: str, grid_size: int) -> tuple[float, float, float]:
    phi = phi_from_spec(json.loads(phi_spec))
    omega = omega_from_spec(json.loads(omega_spec), allow_fault=True)
    ratio = ball_reference_ratio(dim, phi, omega, grid_size)
    return ratio.inner_ratio, ratio.outer_ratio, ratio.ratio


def ball_reference(config: ExperimentConfig) -> tuple[float, float, float]:
    """(inner, outer, point) volume ratio of the unit ball, memoized on disk."""
    return _ball_reference(
        config.dim,
        json.dumps(config.phi.to_dict(), sort_keys=True),
        json.dumps(config.solver_omega.to_dict(), sort_keys=True),
        config.grid,
    )


## Campaigns


@log_calls(level="info", show_timing_only=True)
def run_norm(config: ExperimentConfig, out_dir: Path, advance: Callable[[int], None] | None = None) -> CampaignResult:
    """Support of Γ_{φ,ω}K at each configured direction, one CSV row per (body, direction)."""
    entries = build_corpus(config, references=False)
    directions = config_directions(config)
    table: list[list] = []
    reports = []
    for entry in entries:
        for x in directions:
            report = norm_solve(make_profile(entry.body, x), config.phi, config.solver_omega, cells=config.quadrature_cells)
            reports.append(report)
            table.append(
                [entry.body_id, *[float(v) for v in x], report.lam, *report.bracket, report.residual,
                 report.cells, str(report.backend), report.richardson_delta, config.seed]
            )
            if advance is not None:
                advance(1)
    header = ["body_id", *[f"x{k}" for k in range(config.dim)], "lambda", "lambda_lo", "lambda_hi",
              "residual", "cells", "backend", "richardson", "seed"]
    path = write_csv(out_dir / "norm.csv", header, table)
    rows = [
        VerificationRow(t[0], "residual", t[config.dim + 4], NORM_RESIDUAL, NORM_RESIDUAL - t[config.dim + 4], 0.0)
        for t in table
    ]
    return CampaignResult(_sorted_rows(rows), tolerance_budget(reports), [path])


@log_calls(level="info", show_timing_only=True)
def run_centroid(config: ExperimentConfig, out_dir: Path, advance: Callable[[int], None] | None = None) -> CampaignResult:
    """Build Γ_{φ,ω}K on the grid, export it, and report its volume ratio bracket."""
    body = load_config_body(config)
    cb = build_centroid_body(body, config.phi, config.solver_omega, config.grid, on_progress=advance)
    bracket = centroid_bracket(cb)
    vol = body.volume()
    ratio = ratio_from_bracket(bracket, vol.value, vol.stderr)
    artifacts = [export_csv(cb, out_dir / "centroid.csv")]
    artifacts.append(
        write_csv(
            out_dir / "volume_ratio.csv",
            ["ratio", "error", "inner_ratio", "outer_ratio", "inner", "outer", "rigorous", "symmetry_gap", "seed"],
            [[ratio.ratio, ratio.error, ratio.inner_ratio, ratio.outer_ratio, bracket.inner, bracket.outer,
              bracket.rigorous, cb.symmetry_gap, config.seed]],
        )
    )
    rows = [
        VerificationRow("body", "symmetry", cb.symmetry_gap, 1e-6, 1e-6 - cb.symmetry_gap, 0.0),
        VerificationRow("body", "bracket_order", bracket.inner, bracket.outer, bracket.width, 0.0),
    ]
    return CampaignResult(rows, tolerance_budget([r for r in cb.reports if r], bracket.width), artifacts)


@log_calls(level="info", show_timing_only=True)
def run_steiner(config: ExperimentConfig, out_dir: Path, advance: Callable[[int], None] | None = None) -> CampaignResult:
    """Symmetrize the configured body along each configured direction and check the chord maps."""
    body = load_config_body(config)
    rows: list[VerificationRow] = []
    artifacts: list[Path] = []
    for k, u in enumerate(config_directions(config)):
        tag = f"u{k}"
        symmetral = steiner_symmetrize(body, u)
        vol_in, vol_out = body.volume().value, symmetral.volume().value
        rows.append(VerificationRow(tag, "volume", vol_in, vol_out, -abs(vol_out - vol_in) / vol_in, VOLUME_TOL))
        path = out_dir / f"symmetral_{tag}.json"
        dump_body(symmetral, path)
        artifacts.append(path)
        if isinstance(body, Polytope):
            decomp = chord_decomposition(body, u)
            sigma = decomp.sigma
            rows.append(VerificationRow(tag, "chord_nonnegative", float(sigma.min()), 0.0, float(sigma.min()), 1e-12))
            maps = maps_S_T_check(body, u, seed=config.seed)
            rows.append(VerificationRow(tag, "maps_push", maps.p_push, 0.01, maps.p_push - 0.01, 0.0))
            rows.append(VerificationRow(tag, "maps_reflect", maps.p_reflect, 0.01, maps.p_reflect - 0.01, 0.0))
            rows.append(VerificationRow(tag, "maps_involution", maps.involution_error, 0.0, -maps.involution_error, 1e-9))
            if body.check_origin:
                r = body.radii()[0]
                w = orthonormal_complement(np.asarray(u, dtype=float))[0]
                rows += graph_rows(body, u, [np.zeros(config.dim), 0.25 * r * w, -0.25 * r * w], prefix=f"{tag}-")
        if advance is not None:
            advance(1)
    artifacts.append(_write_rows(out_dir, "steiner", rows))
    return CampaignResult(_sorted_rows(rows), ToleranceBudget(), artifacts)


@log_calls(level="info", show_timing_only=True)
def run_verify_bp(config: ExperimentConfig, out_dir: Path, advance: Callable[[int], None] | None = None) -> CampaignResult:
    """Compare every corpus body's inner volume-ratio bracket with the ball's outer one."""
    if config.dim not in (2, 3):
        raise ConfigError("volume-ratio campaigns need dim 2 or 3")
    ball_inner, ball_outer, _ = ball_reference(config)
    entries = [e for e in build_corpus(config) if not isinstance(e.body, Ball)]
    widths: list[float] = []

    def check(entry: CorpusEntry) -> list[VerificationRow]:
        ratio = volume_ratio(entry.body, config.phi, config.solver_omega, config.grid, threads=1)
        widths.append(ratio.error)
        meta = f"inner={ratio.inner_ratio:.12g};outer={ratio.outer_ratio:.12g}"
        if entry.body_id.startswith("ellipsoid"):
            overlap = min(ratio.outer_ratio - ball_inner, ball_outer - ratio.inner_ratio)
            return [VerificationRow(entry.body_id, "ellipsoid_matches_ball", ratio.inner_ratio, ball_outer, overlap, 0.0, meta)]
        if entry.body_id.startswith("regular"):
            gap = abs(ratio.ratio - ball_outer)
            return [VerificationRow(entry.body_id, "near_ellipse", gap, NEAR_ELLIPSE_TOL, NEAR_ELLIPSE_TOL - gap, 0.0, meta)]
        return [
            VerificationRow(entry.body_id, "volume_ratio", ball_outer, ratio.inner_ratio, ratio.inner_ratio - ball_outer, 0.0, meta)
        ]

    rows = _parallel(check, entries, advance)
    rows.insert(0, VerificationRow("ball", "reference", ball_inner, ball_outer, ball_outer - ball_inner, 0.0))
    artifacts = [_write_rows(out_dir, "verify_bp", rows)]
    return CampaignResult(rows, ToleranceBudget(bracket_width=max(widths, default=0.0)), artifacts)


def _sandwich_rows(entry: CorpusEntry, config: ExperimentConfig, directions: np.ndarray) -> list[VerificationRow]:
    rows = []
    for k, u in enumerate(directions):
        tag = f"u{k:03d}"
        try:
            bounds = lemma33_bounds(entry.body, u, config.phi, config.omega)
            lam = norm_solve(make_profile(entry.body, u), config.phi, config.solver_omega, cells=config.quadrature_cells).lam
        except OlcbError as err:
            rows.append(VerificationRow.failed(entry.body_id, "sandwich_lower", err))
            continue
        meta = f"{tag};displayed_lower={bounds.displayed_lower:.12g};c={bounds.c:.12g}"
        rows.append(VerificationRow(entry.body_id, "sandwich_lower", bounds.lower, lam, lam - bounds.lower, 0.0, meta))
        rows.append(VerificationRow(entry.body_id, "sandwich_upper", lam, bounds.upper, bounds.upper - lam, SANDWICH_TOL, meta))
    return rows


def _lp_rows(entry: CorpusEntry, config: ExperimentConfig, directions: np.ndarray) -> list[VerificationRow]:
    rows = []
    for p in LP_POWERS:
        for k, u in enumerate(directions[:: max(1, len(directions) // LP_DIRECTIONS)][:LP_DIRECTIONS]):
            lam = norm_solve(make_profile(entry.body, u), Power(p), Constant(), richardson=False).lam
            oracle = lp_moment_norm(entry.body, u, p, seed=config.seed)
            rel = abs(lam - oracle) / oracle
            rows.append(VerificationRow(entry.body_id, "lp_moment", lam, oracle, LP_TOL - rel, 0.0, f"p={p:g};u{k}"))
    return rows


def _steiner_rows(entry: CorpusEntry, config: ExperimentConfig, trials: int) -> list[VerificationRow]:
    body = entry.body
    rng = np.random.default_rng([config.seed, zlib.crc32(entry.body_id.encode())])
    rows = []
    schedule = default_schedule(body.dim, trials + body.dim, config.seed)[body.dim :]
    for k, u in enumerate(schedule):
        symmetral = steiner_symmetrize(body, u)
        x1, x2 = rng.uniform(-1.0, 1.0, size=(2, body.dim))
        x1, x2 = x1 - (x1 @ u) * u, x2 - (x2 @ u) * u
        for reflected in (False, True):
            name = "lemma41_reflected" if reflected else "lemma41"
            report = lemma41_inequality_check(
                body, u, x1, x2, config.phi, config.solver_omega, reflected=reflected, symmetral=symmetral
            )
            rows.append(VerificationRow(entry.body_id, name, report.lhs, report.rhs, report.slack, STEINER_TOL, f"trial={k}"))
        zero = np.zeros(body.dim)
        report = lemma41_inequality_check(body, u, zero, zero, config.phi, config.solver_omega, symmetral=symmetral)
        rows.append(VerificationRow(entry.body_id, "lemma41_origin", report.lhs, report.rhs, report.slack, STEINER_TOL, f"trial={k}"))
    return rows


def _inclusion_rows(entry: CorpusEntry, config: ExperimentConfig, directions: np.ndarray) -> list[VerificationRow]:
    u = default_schedule(entry.body.dim, entry.body.dim + 1, config.seed)[-1]
    grid = max(64, config.grid // 8) if config.dim == 2 else 162
    report = lemma42_inclusion_check(entry.body, u, config.phi, config.solver_omega, directions, grid, volumes=True)
    rows = [
        VerificationRow(entry.body_id, "lemma42", report.violation, report.eps_grid,
                        report.eps_grid - report.violation, 0.0),
    ]
    if report.symmetral_inner is not None and report.source_outer is not None:
        rows.append(
            VerificationRow(entry.body_id, "centroid_volume_monotone", report.symmetral_inner, report.source_outer,
                            report.source_outer - report.symmetral_inner, 0.0)
        )
    return rows


def _continuity_rows(entry: CorpusEntry, config: ExperimentConfig, directions: np.ndarray) -> list[VerificationRow]:
    rows = []
    if isinstance(entry.body, Polytope):
        (_, big), (_, small) = continuity_in_body(entry.body, (1e-2, 1e-3), config.phi, config.omega, directions[:4], config.seed)
        ratio = big / small if small > 0 else float("inf")
        lo, hi = CONTINUITY_RATIO
        rows.append(VerificationRow(entry.body_id, "continuity_body", ratio, 10.0, min(ratio - lo, hi - ratio), 0.0))
    p = config.phi.to_dict().get("p", 2.0)
    gap = continuity_in_phi(entry.body, max(float(p), 1.0 + 2e-3), 1e-3, config.omega, directions[:4])
    rows.append(VerificationRow(entry.body_id, "continuity_phi", gap, CONTINUITY_PHI_TOL, CONTINUITY_PHI_TOL - gap, 0.0))
    return rows


@log_calls(level="info", show_timing_only=True)
def run_verify_lemmas(config: ExperimentConfig, out_dir: Path, advance: Callable[[int], None] | None = None) -> CampaignResult:
    """Support sandwich, GL(n) equivariance, the Steiner inequality, the inclusion, continuity and L_p rows."""
    entries = build_corpus(config)
    lemma_grid = direction_grid(config.dim, min(config.grid, 64 if config.dim == 2 else 162), seed=config.seed)
    spot_dirs = lemma_grid[:: max(1, len(lemma_grid) // 8)]
    polytopes = [e for e in entries if isinstance(e.body, Polytope) and config.dim in (2, 3)]
    per_body_trials = max(1, config.trials // max(1, len(polytopes)))

    def sandwich(entry: CorpusEntry) -> list[VerificationRow]:
        return _sandwich_rows(entry, config, lemma_grid)

    def lp_moment(entry: CorpusEntry) -> list[VerificationRow]:
        return _lp_rows(entry, config, lemma_grid)

    def continuity(entry: CorpusEntry) -> list[VerificationRow]:
        return _continuity_rows(entry, config, spot_dirs)

    def steiner(entry: CorpusEntry) -> list[VerificationRow]:
        return _steiner_rows(entry, config, per_body_trials)

    def inclusion(entry: CorpusEntry) -> list[VerificationRow]:
        return _inclusion_rows(entry, config, spot_dirs)

    linear_maps = random_linear_maps(np.random.default_rng(config.seed), config.dim, config.pairs)
    pairs = [
        CorpusEntry(f"{entries[i % len(entries)].body_id}~{name}{i:02d}", entries[i % len(entries)].body)
        for i, (name, _) in enumerate(linear_maps)
    ]
    maps = {pair.body_id: a for pair, (_, a) in zip(pairs, linear_maps, strict=True)}

    def equivariance(entry: CorpusEntry) -> list[VerificationRow]:
        gap = equivariance_check(entry.body, maps[entry.body_id], config.phi, config.solver_omega, spot_dirs[:4])
        return [VerificationRow(entry.body_id, "equivariance", gap, EQUIVARIANCE_TOL, EQUIVARIANCE_TOL - gap, 0.0)]

    rows = _parallel(sandwich, entries, advance)
    rows += _parallel(lp_moment, entries, advance)
    rows += _parallel(continuity, entries, advance)
    rows += _parallel(equivariance, pairs, advance)
    rows += _parallel(steiner, polytopes, advance)
    rows += _parallel(inclusion, polytopes, advance)
    rows = _sorted_rows(rows)
    artifacts = [_write_rows(out_dir, "verify_lemmas", rows)]
    return CampaignResult(rows, ToleranceBudget(), artifacts)


@log_calls(level="info", show_timing_only=True)
def run_converge(config: ExperimentConfig, out_dir: Path, advance: Callable[[int], None] | None = None) -> CampaignResult:
    """Symmetrization trace plus the |ΓK_i| bracket at every step."""
    body = load_config_body(config)
    schedule = config.directions if config.directions is not None and len(config.directions) >= config.steps else None
    trace = symmetrization_schedule(body, config.steps, config.seed, schedule=schedule)
    artifacts = [trace_to_jsonl(trace, out_dir / "trace.jsonl")]

    brackets = []
    for k in trace.bodies:
        cb = build_centroid_body(k, config.phi, config.solver_omega, config.grid)
        brackets.append(centroid_bracket(cb))
        if advance is not None:
            advance(1)
    artifacts.append(
        write_csv(
            out_dir / "centroid_brackets.csv",
            ["step", "volume", "inner", "outer", "seed"],
            ([s.step, s.volume, b.inner, b.outer, config.seed] for s, b in zip(trace.steps, brackets, strict=True)),
        )
    )

    rows = [
        VerificationRow(f"step-{i:04d}", "centroid_volume_monotone", brackets[i].inner, brackets[i - 1].outer,
                        brackets[i - 1].outer - brackets[i].inner, 0.0)
        for i in range(1, len(brackets))
    ]
    rows.append(VerificationRow("trace", "volume_drift", trace.volume_drift, 1e-7, 1e-7 - trace.volume_drift, 0.0))
    width = max((b.width for b in brackets), default=0.0)
    return CampaignResult(_sorted_rows(rows), ToleranceBudget(bracket_width=width), artifacts)


def write_metadata(out_dir: Path, config: ExperimentConfig, command: str) -> Path:
    return write_jsonl(out_dir / "run.jsonl", [{"command": command, "name": config.name, "seed": config.seed, "config": config.raw}])


def graph_rows(body: Body, u: np.ndarray, points: Iterable[Any], prefix: str = "") -> list[VerificationRow]:
    """Direct chord against support minimization at sample points of u⊥."""
    rows = []
    for k, y in enumerate(points):
        report = graph_functions(body, u, y)
        rows.append(VerificationRow(f"{prefix}y{k}", "graph_agreement", report.agreement, 1e-6, 1e-6 - report.agreement, 0.0))
        rows.append(VerificationRow(f"{prefix}y{k}", "minimizer_bound", float(report.bound_ok), 1.0, float(report.bound_ok) - 1.0, 0.0))
    return rows

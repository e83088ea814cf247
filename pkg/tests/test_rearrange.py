"""Tests for distribution functions and decreasing rearrangements."""

from unittest.mock import Mock

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from olcb.bodies import Ball, Polytope
from olcb.errors import DomainError, MonotonicityViolation, ZeroDirection
from olcb.rearrange import (
    Backend,
    ball_half_quantile,
    distribution,
    equimeasurability_gap,
    layer_cake_check,
    make_profile,
    midpoint_grid,
    phi_rearrangement_identity,
    rearrangement,
    rearrangement_breakpoints,
    tabulate,
    tabulate_csv,
)


class TestDistribution:
    """μ^K{|x·y| > s}."""

    def test_square_is_linear(self, square):
        """For the square and x = e₁, μ(s) = 1 − s."""
        for s in (0.0, 0.25, 0.5, 0.9):
            assert distribution(square, [1.0, 0.0], s).value == pytest.approx(1.0 - s)
        assert distribution(square, [1.0, 0.0], 1.5).value == pytest.approx(0.0)

    def test_disk_half_chord(self, disk):
        """The slab |y₁| <= s of the unit disk has area 2(s√(1−s²) + arcsin s)."""
        s = 0.4
        inside = 2.0 * (s * np.sqrt(1.0 - s * s) + np.arcsin(s)) / np.pi
        assert distribution(disk, [1.0, 0.0], s).value == pytest.approx(1.0 - inside)

    def test_cube_slab(self, unit_cube):
        """Slabs of [-1, 1]³ along a face normal."""
        assert distribution(unit_cube, [0.0, 0.0, 1.0], 0.3).value == pytest.approx(0.7)

    def test_errors(self, square):
        """x = 0 and negative thresholds are rejected."""
        with pytest.raises(ZeroDirection):
            distribution(square, [0.0, 0.0], 0.1)
        with pytest.raises(DomainError):
            distribution(square, [1.0, 0.0], -0.1)


class TestRearrangement:
    """f*(t) and its tabulation."""

    def test_square_rearrangement(self, square):
        """f*(t) = 1 − t, and scaling x scales f*."""
        profile = make_profile(square, [1.0, 0.0])
        assert profile.backend == Backend.EXACT_SLAB
        assert rearrangement(profile, 0.3) == pytest.approx(0.7, abs=1e-8)
        assert rearrangement(make_profile(square, [2.0, 0.0]), 0.3) == pytest.approx(1.4, abs=1e-8)

    def test_diagonal_direction(self, square):
        """Along (1, 1) the distribution of y₁ + y₂ is triangular on [-2, 2]."""
        profile = make_profile(square, [1.0, 1.0])
        # μ(s) = (2 − s)² / 4, so f*(t) = 2 − 2√t.
        assert rearrangement(profile, 0.25) == pytest.approx(1.0, abs=1e-8)

    def test_boundary_origin(self, corner_triangle):
        """conv{0, e₁, e₂} along e₁: μ(s) = (1 − s)², so f*(t) = 1 − √t."""
        profile = make_profile(corner_triangle, [1.0, 0.0])
        assert profile.ceiling == pytest.approx(1.0)
        assert rearrangement(profile, 0.5) == pytest.approx(1.0 - np.sqrt(0.5), abs=1e-8)
        assert rearrangement(make_profile(corner_triangle, [-1.0, 0.0]), 0.25) == pytest.approx(0.5, abs=1e-8)

    def test_domain(self, square):
        """t must lie strictly inside (0, 1)."""
        profile = make_profile(square, [1.0, 0.0])
        with pytest.raises(DomainError):
            rearrangement(profile, 0.0)
        with pytest.raises(DomainError):
            rearrangement(profile, 1.0)

    def test_empirical_backend(self, square):
        """Order statistics of a seeded sample approximate the exact f*."""
        profile = make_profile(square, [1.0, 0.0], Backend.EMPIRICAL, samples=20_000, seed=3)
        assert profile.backend == Backend.EMPIRICAL
        assert rearrangement(profile, 0.5) == pytest.approx(0.5, abs=0.02)
        assert profile.quantile_error == pytest.approx(1.0 / np.sqrt(20_000))

    def test_exact_backend_refused_in_four_dimensions(self):
        """No slab formula beyond n = 3 for polytopes."""
        simplex = Polytope(np.vstack([np.eye(4), -np.ones((1, 4))]))
        with pytest.raises(DomainError):
            make_profile(simplex, np.eye(4)[0], Backend.EXACT_SLAB)

    def test_tabulate_rejects_increase(self):
        """An increasing tabulation is a bug, not a rounding effect."""
        profile = Mock()
        profile.values.return_value = np.array([0.9, 0.5, 0.7])
        with pytest.raises(MonotonicityViolation):
            tabulate(profile, np.array([0.1, 0.5, 0.9]))

    def test_breakpoints_and_csv(self, tmp_path, square):
        """Midpoint grid breakpoints, written with fixed formatting."""
        profile = make_profile(square, [1.0, 0.0])
        points = rearrangement_breakpoints(profile, 4)
        assert [t for t, _ in points] == pytest.approx([0.125, 0.375, 0.625, 0.875])
        assert [v for _, v in points] == pytest.approx([0.875, 0.625, 0.375, 0.125], abs=1e-8)
        with pytest.raises(DomainError):
            rearrangement_breakpoints(profile, 1)

        path = tabulate_csv(profile, 4, tmp_path / "fstar.csv")
        lines = path.read_text().splitlines()
        assert lines[0] == "t,fstar"
        assert lines[1].startswith("0.125,0.87")

    def test_ball_half_quantile_is_median(self):
        """Half the disk's area lies outside |y₁| <= f*(1/2)."""
        s = ball_half_quantile(2)
        assert distribution(Ball(2), [1.0, 0.0], s).value == pytest.approx(0.5, abs=1e-8)

    @settings(max_examples=20, deadline=None)
    @given(st.floats(0.05, 0.95), st.floats(0.05, 0.95))
    def test_rearrangement_is_nonincreasing(self, t1, t2):
        """t₁ <= t₂ implies f*(t₁) >= f*(t₂)."""
        tri = Polytope(np.array([[-1.0, -1.0], [2.0, -1.0], [-1.0, 2.0]]))
        profile = make_profile(tri, [0.6, 0.8])
        lo, hi = sorted((t1, t2))
        assert rearrangement(profile, lo) >= rearrangement(profile, hi) - 1e-9


class TestEquimeasurability:
    """f* and |f| have the same distribution."""

    def test_gap_is_small(self, triangle, disk):
        """Leb{f* > s} matches μ(s) to grid resolution."""
        for body in (triangle, disk):
            profile = make_profile(body, [0.6, 0.8])
            assert equimeasurability_gap(profile, np.linspace(0.05, 1.0, 12)) < 1e-3

    def test_layer_cake(self, triangle):
        """∫f* equals the mean of |x·y| over the body."""
        report = layer_cake_check(make_profile(triangle, [1.0, 0.0]), samples=200_000, seed=5)
        assert report.gap <= 5 * report.stderr + 1e-4

    def test_phi_commutes_with_rearrangement(self, triangle):
        """φ(f*) = (φ∘|f|)* for increasing φ."""
        profile = make_profile(triangle, [0.6, 0.8])
        gap = phi_rearrangement_identity(profile, np.square, midpoint_grid(50), samples=100_000, seed=9)
        assert gap < 0.03

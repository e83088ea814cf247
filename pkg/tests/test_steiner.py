"""Tests for Steiner symmetrization, chord functions and symmetrization traces."""

import json
from unittest.mock import patch

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from olcb import steiner
from olcb.bodies import Ball, Polytope, hausdorff_distance
from olcb.errors import BoundaryPoint, DomainError
from olcb.grids import uniform_angles
from olcb.orlicz import Constant, Power
from olcb.steiner import (
    chord_decomposition,
    default_schedule,
    graph_functions,
    lemma41_inequality_check,
    lemma42_inclusion_check,
    maps_S_T_check,
    simplify_polygon_area_budget,
    steiner_symmetrize,
    symmetrization_schedule,
    trace_to_jsonl,
)

E1 = np.array([1.0, 0.0])
E2 = np.array([0.0, 1.0])


class TestChordDecomposition:
    """σ and m over the projection K_u."""

    def test_square(self, square):
        """Every chord of the square along e₂ has half length 1 and midpoint 0."""
        decomp = chord_decomposition(square, E2)
        assert np.allclose(decomp.sigma, 1.0)
        assert np.allclose(decomp.midpoint, 0.0)

    def test_triangle_membership(self, triangle):
        """|t − m(y')| <= σ(y') reproduces membership."""
        decomp = chord_decomposition(triangle, np.array([0.6, 0.8]))
        rng = np.random.default_rng(0)
        pts = rng.uniform(-1.5, 2.5, size=(500, 2))
        assert np.array_equal(decomp.contains(pts), triangle.contains(pts))

    def test_cube_decomposition(self, unit_cube):
        """Chords of the cube along a diagonal are symmetric about the origin."""
        u = np.ones(3) / np.sqrt(3.0)
        decomp = chord_decomposition(unit_cube, u)
        assert np.all(decomp.sigma >= 0.0)
        assert np.allclose(decomp.midpoint, 0.0, atol=1e-9)

    @settings(max_examples=20, deadline=None)
    @given(st.floats(0.0, 2.0 * np.pi))
    def test_sigma_is_concave(self, theta):
        """σ is concave along the projection, so its second differences are <= 0."""
        tri = Polytope(np.array([[-1.0, -1.0], [2.0, -1.0], [-1.0, 2.0]]))
        decomp = chord_decomposition(tri, np.array([np.cos(theta), np.sin(theta)]))
        w = np.linspace(decomp.breakpoints[0] + 1e-6, decomp.breakpoints[-1] - 1e-6, 41)
        sigma, _ = decomp.evaluate(w[:, None])
        assert np.all(np.diff(sigma, 2) <= 1e-9)


class TestSymmetrize:
    """S_uK."""

    def test_volume_preserved(self, triangle, unit_cube):
        """|S_uK| = |K| in the plane and in space."""
        for body, u, rel in ((triangle, np.array([0.6, 0.8]), 1e-9), (unit_cube, np.array([1.0, 2.0, 2.0]) / 3.0, 1e-7)):
            symmetral = steiner_symmetrize(body, u)
            assert symmetral.volume().value == pytest.approx(body.volume().value, rel=rel)

    def test_symmetral_is_reflection_symmetric(self, triangle):
        """S_uK is symmetric about u⊥."""
        u = np.array([0.6, 0.8])
        symmetral = steiner_symmetrize(triangle, u)
        reflect = np.eye(2) - 2.0 * np.outer(u, u)
        for v in uniform_angles(12):
            assert symmetral.support(v) == pytest.approx(symmetral.support(reflect @ v), abs=1e-9)

    @settings(max_examples=15, deadline=None)
    @given(st.floats(0.0, np.pi))
    def test_idempotent(self, theta):
        """S_u(S_uK) = S_uK."""
        tri = Polytope(np.array([[-1.0, -1.0], [2.0, -1.0], [-1.0, 2.0]]))
        u = np.array([np.cos(theta), np.sin(theta)])
        once = steiner_symmetrize(tri, u)
        twice = steiner_symmetrize(once, u)
        assert hausdorff_distance(once, twice, uniform_angles(90)) <= 1e-9
        assert twice.volume().value == pytest.approx(once.volume().value, rel=1e-12)

    def test_symmetric_input_is_fixed(self, square):
        """The square is already symmetric about both axes."""
        symmetral = steiner_symmetrize(square, E1)
        assert np.allclose(symmetral.support_many(uniform_angles(16)), square.support_many(uniform_angles(16)))

    def test_corner_triangle(self, corner_triangle):
        """Symmetrization works with the origin on the boundary."""
        symmetral = steiner_symmetrize(corner_triangle, E2)
        assert symmetral.volume().value == pytest.approx(0.5)

    def test_ball_and_ellipse(self, disk, ellipse):
        """Balls are fixed points; ellipses and zero directions are refused."""
        assert steiner_symmetrize(disk, E1) is disk
        with pytest.raises(DomainError):
            steiner_symmetrize(ellipse, E1)
        with pytest.raises(DomainError):
            steiner_symmetrize(Polytope(np.array([[-1.0, -1.0], [1.0, -1.0], [0.0, 1.0]])), [0.0, 0.0])

    def test_area_budget_pruning(self):
        """Collinear points cost nothing; a real corner exceeds a tiny budget."""
        points = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [3.0, 1.0]])
        kept, removed = simplify_polygon_area_budget(points, 1e-12)
        assert len(kept) == 3
        assert removed == 0.0
        kept, removed = simplify_polygon_area_budget(points, 2.0)
        assert len(kept) == 2
        assert removed == pytest.approx(1.0)


class TestGraphFunctions:
    """Overgraph/undergraph by chord and by minimization."""

    def test_square_center(self, square):
        """g(0) = f(0) = 1 both ways."""
        report = graph_functions(square, E2, 0.0)
        assert report.g == pytest.approx(1.0)
        assert report.g_min == pytest.approx(1.0, abs=1e-6)
        assert report.agrees
        assert report.bound_ok

    def test_triangle_agreement(self, triangle, disk):
        """Polytopes use a linear program, smooth bodies BFGS."""
        assert graph_functions(triangle, np.array([0.6, 0.8]), np.array([0.2, -0.15])).agrees
        assert graph_functions(disk, E2, 0.3).agrees

    def test_boundary_point(self, square):
        """y' on the boundary of the projection is refused."""
        with pytest.raises(BoundaryPoint):
            graph_functions(square, E2, 1.0)


class TestMaps:
    """S and T are volume preserving."""

    def test_triangle(self, triangle):
        """Push-forward and reflection keep the uniform distribution."""
        report = maps_S_T_check(triangle, np.array([0.6, 0.8]), sample_count=20_000, seed=4)
        assert report.involution_error <= 1e-9
        assert report.p_push > 1e-4
        assert report.p_reflect > 1e-4

    def test_involution_is_measured(self, triangle):
        """T∘T is evaluated through fresh chord ranges, so a drifting midpoint shows up."""
        u = np.array([0.6, 0.8])
        real = steiner._chord_range
        feet = []

        def drifting(body, direction, points):
            t_max, t_min = real(body, direction, points)
            feet.append(points)
            if len(feet) == 2:
                return t_max + 0.1, t_min + 0.1
            return t_max, t_min

        with patch("olcb.steiner._chord_range", drifting):
            report = maps_S_T_check(triangle, u, sample_count=2000, seed=4)
        assert len(feet) == 2
        assert np.allclose(feet[1] @ u, 0.0, atol=1e-12)
        assert report.involution_error == pytest.approx(0.2, rel=1e-6)


class TestSteinerInequalities:
    """The support inequality and the inclusion under symmetrization."""

    def test_origin_special_case(self, square):
        """x'₁ = x'₂ = 0 compares h(Γ(S_uK), u) with the mean of h(ΓK, ±u)."""
        zero = np.zeros(2)
        report = lemma41_inequality_check(square, E2, zero, zero, Power(1.0), Constant())
        assert report.lhs == pytest.approx(0.5, rel=1e-6)
        assert report.slack == pytest.approx(0.0, abs=1e-6)

    def test_random_instances(self, triangle):
        """Slack is nonnegative in both the direct and reflected forms."""
        rng = np.random.default_rng(2)
        u = np.array([0.6, 0.8])
        symmetral = steiner_symmetrize(triangle, u)
        perp = np.array([0.8, -0.6])
        for _ in range(5):
            x1, x2 = rng.uniform(-2.0, 2.0, size=2)[:, None] * perp
            for reflected in (False, True):
                report = lemma41_inequality_check(
                    triangle, u, x1, x2, Power(2.0), Constant(), reflected=reflected, symmetral=symmetral
                )
                assert report.slack >= -1e-6

    def test_random_instances_in_space(self):
        """Randomized x'₁, x'₂ in u⊥ for an asymmetric simplex in R³."""
        simplex = Polytope(np.array([[-1.0, -1.0, -1.0], [2.0, -1.0, -1.0], [-1.0, 2.0, -1.0], [-1.0, -1.0, 2.0]]))
        rng = np.random.default_rng(5)
        u = rng.normal(size=3)
        u /= np.linalg.norm(u)
        basis = np.linalg.svd(u[None, :])[2][1:]
        symmetral = steiner_symmetrize(simplex, u)
        for _ in range(3):
            x1, x2 = rng.uniform(-1.5, 1.5, size=(2, 2)) @ basis
            for reflected in (False, True):
                report = lemma41_inequality_check(
                    simplex, u, x1, x2, Power(1.0), Constant(), reflected=reflected, symmetral=symmetral
                )
                assert report.slack >= -1e-6

    def test_not_orthogonal(self, triangle):
        """x' must lie in u⊥."""
        with pytest.raises(DomainError):
            lemma41_inequality_check(triangle, E2, E2, np.zeros(2), Power(1.0), Constant())

    def test_inclusion(self, triangle):
        """Γ(S_uK) ⊆ S_u(ΓK) up to the grid tolerance, and volumes do not grow."""
        report = lemma42_inclusion_check(
            triangle, E2, Power(1.0), Constant(), uniform_angles(6, offset=0.2), grid_size=32, volumes=True
        )
        assert report.passed
        assert report.volume_monotone
        assert report.eps_grid <= 1e-5


class TestTraces:
    """Repeated symmetrization."""

    def test_schedule_starts_with_axes(self):
        """Coordinate directions come first, then seeded draws."""
        schedule = default_schedule(2, 6, seed=1)
        assert np.allclose(schedule[:2], np.eye(2))
        assert np.allclose(np.linalg.norm(schedule, axis=1), 1.0)
        assert np.array_equal(schedule, default_schedule(2, 6, seed=1))

    def test_trace_keeps_volume_and_approaches_ball(self, tmp_path, triangle):
        """Volume stays put and the distance to the matched ball shrinks."""
        trace = symmetrization_schedule(triangle, 12, seed=3)
        assert len(trace.steps) == 13
        assert trace.volume_drift <= 1e-7
        assert trace.steps[-1].ball_distance < trace.steps[0].ball_distance

        path = trace_to_jsonl(trace, tmp_path / "trace.jsonl")
        records = [json.loads(line) for line in path.read_text().splitlines()]
        assert records[0]["direction"] is None
        assert records[1]["step"] == 1

    def test_ball_trace_is_flat(self):
        """The ball is a fixed point."""
        trace = symmetrization_schedule(Ball(2), 5, seed=0)
        assert trace.raw_drift == 0.0
        assert max(s.ball_distance for s in trace.steps) <= 1e-12

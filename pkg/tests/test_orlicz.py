"""Tests for Orlicz functions, weights and the Orlicz–Lorentz norm solve."""

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from olcb.bodies import Ball, Polytope, SupportSampled
from olcb.errors import (
    ConfigError,
    DomainError,
    FunctionValidationError,
    NonpositiveLambda,
)
from olcb.orlicz import (
    Constant,
    NegatedCell,
    PiecewiseConstantNonincreasing,
    PiecewiseLinearConvex,
    Power,
    PowerSingular,
    ScaledExp,
    lemma33_bounds,
    lp_moment_norm,
    negate_weight_cell,
    norm_solve,
    omega_from_spec,
    orlicz_lorentz_norm,
    phi_from_spec,
    phi_functional,
    validate_omega,
    validate_phi,
    weighted_subadditivity_check,
)
from olcb.grids import uniform_angles
from olcb.rearrange import make_profile

E1 = np.array([1.0, 0.0])


class TestFunctionFamilies:
    """φ and ω families and their validation."""

    @pytest.mark.parametrize("phi", [Power(1.0), Power(2.5), ScaledExp(1.0), PiecewiseLinearConvex(np.array([[0, 0], [1, 1], [2, 3]]))])
    def test_valid_phi(self, phi):
        """Every shipped family passes the φ checks."""
        validate_phi(phi)

    def test_invalid_phi(self):
        """Sub-linear powers and concave polylines are rejected."""
        with pytest.raises(FunctionValidationError):
            Power(0.5)
        with pytest.raises(FunctionValidationError):
            PiecewiseLinearConvex(np.array([[0, 0], [1, 2], [2, 3]]))
        with pytest.raises(FunctionValidationError):
            ScaledExp(0.0)

    @pytest.mark.parametrize(
        "omega",
        [Constant(), Constant(2.0), PowerSingular(0.5), PiecewiseConstantNonincreasing(np.array([[0.5, 2.0], [1.0, 1.0]]))],
    )
    def test_valid_omega(self, omega):
        """Every shipped weight passes the ω checks."""
        validate_omega(omega)

    def test_invalid_omega(self):
        """Increasing steps, β >= 1 and negated cells are rejected."""
        with pytest.raises(FunctionValidationError):
            PiecewiseConstantNonincreasing(np.array([[0.5, 1.0], [1.0, 2.0]]))
        with pytest.raises(FunctionValidationError):
            PowerSingular(1.0)
        with pytest.raises(FunctionValidationError):
            validate_omega(negate_weight_cell(Constant()))

    def test_weight_mass(self):
        """W(a, b) in closed form."""
        assert float(PowerSingular(0.5).partial(0.0, 1.0)) == pytest.approx(2.0)
        steps = PiecewiseConstantNonincreasing(np.array([[0.5, 2.0], [1.0, 1.0]]))
        assert float(steps.partial(0.25, 0.75)) == pytest.approx(0.75)
        assert float(negate_weight_cell(Constant()).partial(0.0, 1.0)) == pytest.approx(0.5)

    def test_spec_parsing(self):
        """Config specs round-trip through to_dict."""
        assert phi_from_spec({"family": "identity"}) == Power(1.0)
        assert phi_from_spec({"family": "power", "p": 3}).p == 3.0
        assert omega_from_spec({"family": "power_singular", "beta": 0.25}).beta == 0.25
        negated = omega_from_spec(negate_weight_cell(Constant()).to_dict(), allow_fault=True)
        assert isinstance(negated, NegatedCell)
        assert negated.cell == (0.0, 0.25)
        with pytest.raises(ConfigError, match="fault weight"):
            omega_from_spec(negate_weight_cell(Constant()).to_dict())

    def test_spec_errors(self):
        """Unknown families and missing keys are configuration errors."""
        with pytest.raises(ConfigError):
            phi_from_spec({"family": "cosh"})
        with pytest.raises(ConfigError):
            phi_from_spec({"family": "piecewise_linear"})
        with pytest.raises(ConfigError):
            omega_from_spec({"family": "power_singular"})


class TestNormSolve:
    """Φ(λ*) = 1 on closed forms."""

    @pytest.mark.parametrize("p", [1.0, 2.0, 3.0, 5.0])
    def test_square_closed_form(self, square, p):
        """f*(t) = 1 − t gives λ* = (1/(p+1))^{1/p}."""
        report = orlicz_lorentz_norm(square, E1, Power(p), Constant())
        assert report.lam == pytest.approx((1.0 / (p + 1.0)) ** (1.0 / p), rel=1e-6)
        assert report.residual < 1e-7
        assert not report.flagged

    def test_disk_mean_width(self, disk):
        """E|y₁| over the unit disk is 4/(3π)."""
        report = orlicz_lorentz_norm(disk, E1, Power(1.0), Constant())
        assert report.lam == pytest.approx(4.0 / (3.0 * np.pi), rel=1e-5)

    def test_lorentz_special_case(self, square):
        """φ = identity makes the norm ∫f*ω: ∫(1 − t)t^{-1/2} = 4/3."""
        report = orlicz_lorentz_norm(square, E1, Power(1.0), PowerSingular(0.5))
        assert report.lam == pytest.approx(4.0 / 3.0, rel=1e-5)

    def test_root_of_phi_functional(self, triangle):
        """The solved λ* makes Φ equal to one and Φ decreases through it."""
        profile = make_profile(triangle, [0.6, 0.8])
        phi, omega = ScaledExp(1.0), PowerSingular(0.3)
        lam = norm_solve(profile, phi, omega).lam
        assert phi_functional(profile, phi, omega, lam) == pytest.approx(1.0, abs=1e-7)
        assert phi_functional(profile, phi, omega, 0.5 * lam) > 1.0 > phi_functional(profile, phi, omega, 2.0 * lam)
        with pytest.raises(NonpositiveLambda):
            phi_functional(profile, phi, omega, 0.0)

    @settings(max_examples=10, deadline=None)
    @given(st.floats(0.2, 5.0))
    def test_homogeneity(self, c):
        """‖c·f‖ = c‖f‖."""
        tri = Polytope(np.array([[-1.0, -1.0], [2.0, -1.0], [-1.0, 2.0]]))
        x = np.array([0.6, 0.8])
        base = orlicz_lorentz_norm(tri, x, Power(2.0), Constant(), richardson=False).lam
        scaled = orlicz_lorentz_norm(tri, c * x, Power(2.0), Constant(), richardson=False).lam
        assert scaled == pytest.approx(c * base, rel=1e-7)

    @settings(max_examples=10, deadline=None)
    @given(st.tuples(*[st.floats(-2.0, 2.0)] * 4))
    def test_triangle_inequality(self, coords):
        """‖x₁ + x₂‖ <= ‖x₁‖ + ‖x₂‖."""
        x1, x2 = np.array(coords[:2]), np.array(coords[2:])
        assume(min(np.linalg.norm(x1), np.linalg.norm(x2), np.linalg.norm(x1 + x2)) > 1e-3)
        tri = Polytope(np.array([[-1.0, -1.0], [2.0, -1.0], [-1.0, 2.0]]))

        def norm(x):
            return orlicz_lorentz_norm(tri, x, Power(2.0), PowerSingular(0.3), richardson=False).lam

        assert norm(x1 + x2) <= norm(x1) + norm(x2) + 1e-6

    def test_sampled_near_ball(self):
        """A finely sampled disk has |K| just above π and solves like the disk."""
        sampled = SupportSampled.from_body(Ball(2), uniform_angles(720))
        report = norm_solve(make_profile(sampled, E1), Power(1.0), Constant())
        assert report.lam == pytest.approx(4.0 / (3.0 * np.pi), rel=1e-2)
        bounds = lemma33_bounds(sampled, E1, Power(1.0), Constant())
        assert bounds.c <= 0.5
        assert bounds.lower <= report.lam <= bounds.upper + 1e-6

    def test_boundary_origin(self, corner_triangle):
        """Bounds need an interior origin; the solve falls back to the profile ceiling."""
        report = orlicz_lorentz_norm(corner_triangle, E1, Power(1.0), Constant())
        assert report.lam == pytest.approx(1.0 / 3.0, rel=1e-6)

    def test_negated_cell_drops_below_sandwich(self, square):
        """Flipping the weight on (0, 1/4] gives λ = 1/16, under the clean lower bound."""
        report = norm_solve(make_profile(square, E1), Power(1.0), negate_weight_cell(Constant()))
        assert report.lam == pytest.approx(1.0 / 16.0, rel=1e-6)
        assert lemma33_bounds(square, E1, Power(1.0), Constant()).lower > report.lam


class TestSupportBounds:
    """The two-sided support bounds."""

    @pytest.mark.parametrize("phi", [Power(1.0), Power(2.0), ScaledExp(1.0)])
    @pytest.mark.parametrize("omega", [Constant(), PowerSingular(0.5)])
    def test_sandwich(self, triangle, phi, omega):
        """lower <= λ* <= upper in several directions."""
        for theta in np.linspace(0.0, 2.0 * np.pi, 7)[:-1]:
            u = np.array([np.cos(theta), np.sin(theta)])
            bounds = lemma33_bounds(triangle, u, phi, omega)
            lam = orlicz_lorentz_norm(triangle, u, phi, omega, richardson=False).lam
            assert bounds.lower <= lam <= bounds.upper + 1e-6

    def test_displayed_lower_is_not_a_bound(self, disk):
        """The reciprocal arrangement exceeds the disk's support."""
        bounds = lemma33_bounds(disk, E1, Power(1.0), Constant())
        lam = orlicz_lorentz_norm(disk, E1, Power(1.0), Constant()).lam
        assert bounds.c == pytest.approx(0.5)
        assert bounds.upper == pytest.approx(1.0)
        assert bounds.displayed_lower > lam > bounds.lower

    def test_unit_vectors_only(self, disk):
        """The bounds are stated for |x| = 1."""
        with pytest.raises(DomainError):
            lemma33_bounds(disk, [2.0, 0.0], Power(1.0), Constant())


class TestSpecialCases:
    """L_p oracle and weighted subadditivity."""

    def test_lp_moment_closed_forms(self, square, disk):
        """E|y₁|² = 1/3 on the square, E|y₁| = 4/(3π) on the disk."""
        assert lp_moment_norm(square, E1, 2.0) == pytest.approx(np.sqrt(1.0 / 3.0))
        assert lp_moment_norm(disk, E1, 1.0) == pytest.approx(4.0 / (3.0 * np.pi))
        assert lp_moment_norm(Ball(3), np.eye(3)[0], 2.0) == pytest.approx(np.sqrt(1.0 / 5.0))

    @pytest.mark.parametrize("p", [1.0, 2.0, 4.0])
    def test_solver_matches_lp_moment(self, triangle, p):
        """φ = s^p, ω ≡ 1 is the L_p norm."""
        u = np.array([0.28, 0.96])
        lam = orlicz_lorentz_norm(triangle, u, Power(p), Constant()).lam
        assert lam == pytest.approx(lp_moment_norm(triangle, u, p), rel=1e-4)

    def test_lp_moment_on_cube(self, unit_cube):
        """The section-table moment agrees with the solver in space."""
        u = np.array([0.0, 0.6, 0.8])
        lam = orlicz_lorentz_norm(unit_cube, u, Power(2.0), Constant()).lam
        assert lam == pytest.approx(lp_moment_norm(unit_cube, u, 2.0), rel=1e-4)

    @settings(max_examples=30, deadline=None)
    @given(
        st.lists(st.floats(-5.0, 5.0), min_size=16, max_size=16),
        st.lists(st.floats(-5.0, 5.0), min_size=16, max_size=16),
    )
    def test_weighted_subadditivity(self, g1, g2):
        """∫(g₁+g₂)*ω <= ∫g₁*ω + ∫g₂*ω for nonincreasing ω."""
        report = weighted_subadditivity_check(g1, g2, PowerSingular(0.5))
        assert report.slack >= -1e-9

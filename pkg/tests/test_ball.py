"""
Tests for exact ball spectra, boundary-layer convergence and the annulus sweep
"""

import math

import numpy as np
import pytest

from steklov_limits.ball import (
    BallProblem, BracketingError, ConcentratedDensity, derivative_formula,
    derivative_numeric, disk_neumann_first_positive, harmonic_multiplicity,
    neumann_ball_spectrum, neumann_char, neumann_degree_roots, niwa_annulus_lambda1,
    richardson_levels, steklov_ball_spectrum
)
from steklov_limits.utils import NumericalError

from . import (
    BALL3_DERIVATIVE, BALL3_MASS, DISK_DERIVATIVE, DISK_MASS, DISK_NEUMANN_FIRST,
    EPS_GRID, NIWA_GRID
)


@pytest.fixture
def disk():
    return BallProblem(2, DISK_MASS)


@pytest.fixture
def ball3():
    return BallProblem(3, BALL3_MASS)


class TestBallProblem:
    """Test geometry of the unit ball."""

    def test_disk_geometry(self, disk):
        assert disk.volume == pytest.approx(math.pi)
        assert disk.surface == pytest.approx(2 * math.pi)
        assert disk.steklov_density == pytest.approx(1.0)

    def test_ball_geometry(self, ball3):
        assert ball3.volume == pytest.approx(4 * math.pi / 3)
        assert ball3.surface == pytest.approx(4 * math.pi)
        assert ball3.steklov_density == pytest.approx(1.0)

    def test_invalid_problem(self):
        """Test that both errors are reported together."""
        with pytest.raises(ValueError, match="dimension.*total mass"):
            BallProblem(1, -1.0)

    @pytest.mark.parametrize("dimension,degree,expected", [
        (2, 0, 1), (2, 1, 2), (2, 5, 2), (3, 0, 1), (3, 1, 3), (3, 2, 5), (4, 2, 9),
    ])
    def test_harmonic_multiplicity(self, dimension, degree, expected):
        assert harmonic_multiplicity(dimension, degree) == expected


class TestConcentratedDensity:
    """Test the boundary-layer density."""

    @pytest.mark.parametrize("eps", [0.2, 0.1, 1e-3, 1e-8])
    def test_total_mass(self, disk, eps):
        """Test that every layer width carries the prescribed mass."""
        density = ConcentratedDensity(eps, disk)
        assert density.total_mass() == pytest.approx(DISK_MASS, rel=1e-12)

    def test_values(self, disk):
        density = ConcentratedDensity(0.1, disk)
        assert density(0.5) == 0.1
        assert density(0.95) == pytest.approx(density.annulus_value)
        np.testing.assert_allclose(density(np.array([0.0, 0.99])),
                                   [0.1, density.annulus_value])

    def test_layer_value_blows_up(self, disk):
        """Test that the layer density grows like M/(|dOmega| eps)."""
        density = ConcentratedDensity(1e-6, disk)
        assert density.annulus_value * 1e-6 == pytest.approx(1.0, rel=1e-5)

    @pytest.mark.parametrize("eps", [0.0, -0.1, 0.25, 0.5])
    def test_epsilon_range(self, disk, eps):
        with pytest.raises(ValueError, match="epsilon"):
            ConcentratedDensity(eps, disk)

    def test_wider_range_allowed(self, disk):
        density = ConcentratedDensity(0.6, disk, eps_max=1.0)
        assert density.total_mass() == pytest.approx(DISK_MASS)


class TestSteklovSpectrum:
    """Test the exact Steklov spectrum of the ball."""

    def test_disk(self, disk):
        spectrum = steklov_ball_spectrum(disk, 5)
        np.testing.assert_allclose(spectrum.eigenvalues, [0, 1, 1, 2, 2])
        assert spectrum.clusters == [(0,), (1, 2), (3, 4)]
        assert spectrum.labels[3] == (2, 0)

    def test_ball(self, ball3):
        spectrum = steklov_ball_spectrum(ball3, 5)
        np.testing.assert_allclose(spectrum.eigenvalues, [0, 1, 1, 1, 2])
        assert spectrum.multiplicity(2) == 3

    def test_scales_inversely_with_mass(self):
        spectrum = steklov_ball_spectrum(BallProblem(2, 4 * math.pi), 3)
        np.testing.assert_allclose(spectrum.eigenvalues, [0, 0.5, 0.5])

    def test_count_validation(self, disk):
        with pytest.raises(ValueError):
            steklov_ball_spectrum(disk, 0)


class TestNeumannSpectrum:
    """Test the characteristic equation and its roots."""

    def test_brackets_contain_sign_change(self, disk):
        density = ConcentratedDensity(0.1, disk)
        roots = neumann_degree_roots(1, density, 6.0)
        assert roots
        for bracket in roots:
            assert bracket.lower <= bracket.root <= bracket.upper
            f_lo = neumann_char(1, bracket.lower, density)
            f_hi = neumann_char(1, bracket.upper, density)
            assert f_lo * f_hi <= 0
            assert abs(neumann_char(1, bracket.root, density)) < 1e-6

    def test_disk_spectrum_near_limit(self, disk):
        """Test that a thin layer reproduces the Steklov pattern."""
        spectrum = neumann_ball_spectrum(ConcentratedDensity(0.0125, disk), count=5)
        assert spectrum[0] == 0.0
        np.testing.assert_allclose(spectrum.eigenvalues[1:], [1, 1, 2, 2], rtol=0.05)
        assert spectrum.clusters == [(0,), (1, 2), (3, 4)]
        assert spectrum.labels[1] == (1, 0)

    def test_ball_multiplicities(self, ball3):
        spectrum = neumann_ball_spectrum(ConcentratedDensity(0.05, ball3), count=5)
        assert spectrum.clusters[:2] == [(0,), (1, 2, 3)]
        assert spectrum[1] == pytest.approx(1.0, rel=0.05)

    @pytest.mark.parametrize("j", [1, 2, 3, 4])
    def test_convergence_to_steklov(self, disk, j):
        """Test that gaps shrink and eigenvalues grow with the layer width."""
        limit = steklov_ball_spectrum(disk, 5)[j]
        values = np.array([
            neumann_ball_spectrum(ConcentratedDensity(eps, disk), count=5)[j]
            for eps in EPS_GRID
        ])
        gaps = np.abs(values - limit)
        assert np.all(np.diff(gaps) < 0)
        assert np.all(np.diff(values) < 0)
        assert gaps[-1] / limit < 0.05

    def test_lambda_max_too_small(self, disk):
        density = ConcentratedDensity(0.1, disk)
        with pytest.raises(BracketingError, match="raise lambda_max"):
            neumann_ball_spectrum(density, count=5, lambda_max=0.5)

    def test_bracketing_error_is_numerical(self):
        assert issubclass(BracketingError, NumericalError)

    def test_radial_characteristic_vanishes_at_zero(self, disk):
        """Test that the degree-0 determinant tends to zero with lambda (constant eigenfunction)."""
        density = ConcentratedDensity(0.1, disk)
        values = [abs(neumann_char(0, lam, density)) for lam in (1e-6, 1e-8, 1e-10)]
        assert values[0] > values[1] > values[2]
        assert values[2] < 1e-8

    def test_characteristic_validation(self, disk):
        density = ConcentratedDensity(0.1, disk)
        with pytest.raises(ValueError, match="lambda"):
            neumann_char(1, -1.0, density)
        with pytest.raises(ValueError, match="different ball"):
            neumann_char(1, 1.0, density, BallProblem(2, 1.0))


class TestDerivative:
    """Test the first-order expansion at eps = 0."""

    def test_formula_disk(self, disk):
        assert derivative_formula(disk, 1.0) == pytest.approx(DISK_DERIVATIVE)

    def test_formula_ball(self, ball3):
        assert derivative_formula(ball3, 1.0) == pytest.approx(BALL3_DERIVATIVE)

    def test_formula_zero(self, disk):
        assert derivative_formula(disk, 0.0) == 0.0

    def test_richardson_exact_on_linear(self):
        """Test that a linear sequence extrapolates to its intercept."""
        steps = [0.1, 0.05, 0.025]
        values = [1.0 + 2.0 * h for h in steps]
        levels = richardson_levels(steps, values)
        assert len(levels) == 3
        np.testing.assert_allclose(levels[1], [1.0, 1.0])
        assert levels[-1][-1] == pytest.approx(1.0)

    def test_richardson_exact_on_quadratic(self):
        steps = np.array([0.2, 0.1, 0.05])
        levels = richardson_levels(steps, 3.0 - steps + 4.0 * steps ** 2)
        assert levels[-1][-1] == pytest.approx(3.0)

    def test_numeric_disk(self, disk):
        """Test the extrapolated slope of the first nonzero disk eigenvalue."""
        estimate = derivative_numeric(disk, 1, EPS_GRID)
        assert estimate.lambda_zero == pytest.approx(1.0)
        assert estimate.slope == pytest.approx(DISK_DERIVATIVE, rel=1e-2)
        frame = estimate.to_frame()
        assert list(frame.columns[:3]) == ["epsilon", "lambda_eps", "quotient"]
        assert "richardson_3" in frame.columns
        assert math.isnan(frame["richardson_1"].iloc[0])

    def test_numeric_disk_second_index(self, disk):
        """Test the other member of the first degenerate pair."""
        estimate = derivative_numeric(disk, 2, EPS_GRID)
        assert estimate.lambda_zero == pytest.approx(1.0)
        assert estimate.slope == pytest.approx(DISK_DERIVATIVE, rel=1e-2)

    def test_numeric_zero_index(self, disk):
        estimate = derivative_numeric(disk, 0, EPS_GRID[:3])
        assert estimate.slope == 0.0

    @pytest.mark.slow
    def test_numeric_ball(self, ball3):
        estimate = derivative_numeric(ball3, 1, EPS_GRID, jobs=2)
        assert estimate.slope == pytest.approx(BALL3_DERIVATIVE, rel=1e-2)

    @pytest.mark.slow
    @pytest.mark.parametrize("index", [2, 3])
    def test_numeric_ball_degenerate_triple(self, ball3, index):
        estimate = derivative_numeric(ball3, index, EPS_GRID, jobs=2)
        assert estimate.lambda_zero == pytest.approx(1.0)
        assert estimate.slope == pytest.approx(BALL3_DERIVATIVE, rel=1e-2)

    @pytest.mark.parametrize("grid", [[0.1, 0.05], [0.05, 0.1, 0.01], [0.1, 0.05, 0.0]])
    def test_grid_validation(self, disk, grid):
        with pytest.raises(ValueError, match="eps_grid"):
            derivative_numeric(disk, 1, grid)


class TestAnnulus:
    """Test the first Neumann eigenvalue of thin annuli."""

    def test_disk_limit_value(self):
        assert disk_neumann_first_positive() == pytest.approx(DISK_NEUMANN_FIRST, rel=1e-12)

    def test_increasing_in_width(self):
        values = [niwa_annulus_lambda1(eps) for eps in sorted(NIWA_GRID)]
        assert np.all(np.diff(values) > 0)
        assert max(values) < DISK_NEUMANN_FIRST

    def test_thin_annulus_limit(self):
        assert niwa_annulus_lambda1(1e-3) == pytest.approx(1.0, rel=1e-2)

    def test_small_hole_limit(self):
        assert niwa_annulus_lambda1(0.99) == pytest.approx(DISK_NEUMANN_FIRST, rel=1e-2)

    @pytest.mark.parametrize("eps", [0.0, 1.0, 1.5])
    def test_range(self, eps):
        with pytest.raises(ValueError, match="epsilon"):
            niwa_annulus_lambda1(eps)

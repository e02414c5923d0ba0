"""
Tests for the Bessel function layer against arbitrary-precision references
"""

import math

import mpmath
import numpy as np
import pytest

from steklov_limits.specfun import (
    BesselOrder, DomainError, bessel_j, bessel_j_prime, bessel_y, bessel_y_prime
)

from . import TestDataManager

ORDERS = [0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0]
POINTS = [0.05, 0.7, 1.0, 2.3, 5.5, 12.0, 31.4]


def _close(value, reference, rel=1e-11, abs_=1e-13):
    return abs(value - reference) <= rel * abs(reference) + abs_


class TestBesselOrder:
    """Test order construction and classification."""

    def test_for_degree_planar(self):
        """Test that the disk uses integer orders k."""
        order = BesselOrder.for_degree(2, 3)
        assert order.nu == 3.0
        assert not order.is_half_integer

    def test_for_degree_ball(self):
        """Test that the 3-ball uses orders k + 1/2."""
        order = BesselOrder.for_degree(3, 2)
        assert order.nu == 2.5
        assert order.is_half_integer

    def test_negative_order_rejected(self):
        """Test that negative orders are a domain error."""
        with pytest.raises(DomainError, match="non-negative"):
            BesselOrder(-1.0)

    def test_nan_order_rejected(self):
        with pytest.raises(DomainError):
            BesselOrder(float("nan"))

    def test_invalid_dimension_and_degree(self):
        """Test validation of dimension and angular degree."""
        with pytest.raises(DomainError, match="Dimension"):
            BesselOrder.for_degree(1, 0)
        with pytest.raises(DomainError, match="degree"):
            BesselOrder.for_degree(2, -1)

    def test_domain_error_is_value_error(self):
        assert issubclass(DomainError, ValueError)


class TestBesselValues:
    """Test values and derivatives against mpmath."""

    @pytest.mark.parametrize("nu", ORDERS)
    @pytest.mark.parametrize("x", POINTS)
    def test_first_kind(self, nu, x):
        """Test J_nu(x)."""
        assert _close(bessel_j(nu, x), float(mpmath.besselj(nu, x)))

    @pytest.mark.parametrize("nu", ORDERS)
    @pytest.mark.parametrize("x", POINTS)
    def test_second_kind(self, nu, x):
        """Test Y_nu(x); absolute slack covers the large values near 0."""
        reference = float(mpmath.bessely(nu, x))
        assert _close(bessel_y(nu, x), reference, rel=1e-10)

    @pytest.mark.parametrize("nu", ORDERS)
    @pytest.mark.parametrize("x", POINTS)
    def test_first_kind_derivative(self, nu, x):
        """Test dJ_nu/dx."""
        reference = float(mpmath.besselj(nu, x, derivative=1))
        assert _close(bessel_j_prime(nu, x), reference, rel=1e-10, abs_=1e-12)

    @pytest.mark.parametrize("nu", ORDERS)
    @pytest.mark.parametrize("x", POINTS)
    def test_second_kind_derivative(self, nu, x):
        """Test dY_nu/dx."""
        reference = float(mpmath.bessely(nu, x, derivative=1))
        assert _close(bessel_y_prime(nu, x), reference, rel=1e-9, abs_=1e-12)

    @pytest.mark.parametrize("nu", ORDERS)
    def test_wronskian(self, nu):
        """Test J_nu Y'_nu - J'_nu Y_nu = 2/(pi x)."""
        x = np.array([0.3, 1.7, 4.2, 9.9])
        w = bessel_j(nu, x) * bessel_y_prime(nu, x) - bessel_j_prime(nu, x) * bessel_y(nu, x)
        np.testing.assert_allclose(w, 2.0 / (math.pi * x), rtol=1e-10)

    def test_values_at_origin(self):
        """Test the series values at x = 0."""
        assert bessel_j(0, 0.0) == 1.0
        assert bessel_j(1, 0.0) == 0.0
        assert bessel_j(0.5, 0.0) == 0.0
        assert bessel_j(1.5, 0.0) == 0.0
        assert bessel_j_prime(0, 0.0) == 0.0
        assert bessel_j_prime(1, 0.0) == pytest.approx(0.5)
        assert bessel_j_prime(2, 0.0) == 0.0

    def test_array_matches_scalar(self):
        """Test that array input returns elementwise scalar results."""
        x = np.array(POINTS)
        values = bessel_j(1.5, x)
        assert isinstance(values, np.ndarray)
        assert values.shape == x.shape
        for xi, vi in zip(POINTS, values):
            assert vi == pytest.approx(bessel_j(1.5, xi), rel=1e-14)

    def test_scalar_returns_float(self):
        assert isinstance(bessel_j(2, 1.0), float)
        assert isinstance(bessel_y_prime(BesselOrder(0.5), 1.0), float)


class TestDomain:
    """Test domain errors."""

    def test_y_at_origin(self):
        """Test that Y_nu(0) is a domain error."""
        with pytest.raises(DomainError, match="positive"):
            bessel_y(0, 0.0)
        with pytest.raises(DomainError):
            bessel_y_prime(1, np.array([1.0, 0.0]))

    def test_negative_argument(self):
        with pytest.raises(DomainError, match="non-negative"):
            bessel_j(1, -0.1)

    def test_nan_argument(self):
        with pytest.raises(DomainError, match="NaN"):
            bessel_j_prime(0, float("nan"))


class TestBesselZeros:
    """Test tabulated zeros from the fixture file."""

    def setup_method(self):
        self.zeros = TestDataManager.load_json_fixture("bessel_zeros.json")

    def test_first_kind_zeros(self):
        for entry in self.zeros["j_zeros"]:
            assert abs(bessel_j(entry["nu"], entry["value"])) < 1e-12

    def test_second_kind_zeros(self):
        for entry in self.zeros["y_zeros"]:
            assert abs(bessel_y(entry["nu"], entry["value"])) < 1e-12

    def test_derivative_zeros(self):
        """Test zeros of J'_nu, which set the disk Neumann spectrum."""
        for entry in self.zeros["jp_zeros"]:
            assert abs(bessel_j_prime(entry["nu"], entry["value"])) < 1e-12

"""
Bessel functions of the first and second kind with derivatives.

Thin, validated layer over ``scipy.special``. Half-integer orders (the N=3 ball)
go through the spherical Bessel reductions

    J_{n+1/2}(x) = sqrt(2x/pi) j_n(x),    Y_{n+1/2}(x) = sqrt(2x/pi) y_n(x),

and derivatives use the recurrences

    C'_nu = C_{nu-1} - (nu/x) C_nu      (nu >= 1)
    C'_nu = (nu/x) C_nu - C_{nu+1}      (nu < 1)

so no negative orders are ever evaluated. All functions are pure and may be
called from any number of threads.
"""

import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy import special

ArrayLike = Union[float, np.ndarray]


class DomainError(ValueError):
    """Raised for arguments outside the domain of a Bessel function."""
    pass


@dataclass(frozen=True)
class BesselOrder:
    """Order nu >= 0 of a cylinder function."""

    nu: float

    def __post_init__(self):
        if not math.isfinite(self.nu) or self.nu < 0:
            raise DomainError(f"Bessel order must be finite and non-negative, got {self.nu}")

    @classmethod
    def for_degree(cls, dimension: int, degree: int) -> "BesselOrder":
        """Order nu = k + (N-2)/2 of the radial factor for angular degree k in R^N."""
        if dimension < 2:
            raise DomainError(f"Dimension must be at least 2, got {dimension}")
        if degree < 0:
            raise DomainError(f"Angular degree must be non-negative, got {degree}")
        return cls(degree + (dimension - 2) / 2.0)

    @property
    def is_half_integer(self) -> bool:
        twice = 2.0 * self.nu
        return twice.is_integer() and int(twice) % 2 == 1


def _order(order: Union[BesselOrder, float]) -> BesselOrder:
    return order if isinstance(order, BesselOrder) else BesselOrder(float(order))


def _argument(x: ArrayLike, strictly_positive: bool) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if np.any(np.isnan(arr)):
        raise DomainError("Bessel argument is NaN")
    if strictly_positive and np.any(arr <= 0):
        raise DomainError(f"Argument must be positive, got min {arr.min()}")
    if not strictly_positive and np.any(arr < 0):
        raise DomainError(f"Argument must be non-negative, got min {arr.min()}")
    return arr


def _result(value: np.ndarray, like: ArrayLike) -> ArrayLike:
    if np.ndim(like) == 0:
        return float(value)
    return value


def _jv(nu: float, x: np.ndarray) -> np.ndarray:
    order = BesselOrder(nu)
    if order.is_half_integer:
        n = int(nu - 0.5)
        with np.errstate(divide="ignore", invalid="ignore"):
            value = np.sqrt(2.0 * x / np.pi) * special.spherical_jn(n, x)
        # sqrt(2x/pi) j_n(x) -> 0 at the origin for every n >= 0
        return np.where(x == 0.0, 0.0, value)
    return special.jv(nu, x)


def _yv(nu: float, x: np.ndarray) -> np.ndarray:
    order = BesselOrder(nu)
    if order.is_half_integer:
        n = int(nu - 0.5)
        return np.sqrt(2.0 * x / np.pi) * special.spherical_yn(n, x)
    return special.yv(nu, x)


def bessel_j(order: Union[BesselOrder, float], x: ArrayLike) -> ArrayLike:
    """J_nu(x) for x >= 0."""
    nu = _order(order).nu
    arr = _argument(x, strictly_positive=False)
    return _result(np.asarray(_jv(nu, arr), dtype=float), x)


def bessel_y(order: Union[BesselOrder, float], x: ArrayLike) -> ArrayLike:
    """Y_nu(x) for x > 0; the logarithmic/power singularity at 0 is a domain error."""
    nu = _order(order).nu
    arr = _argument(x, strictly_positive=True)
    return _result(np.asarray(_yv(nu, arr), dtype=float), x)


def bessel_j_prime(order: Union[BesselOrder, float], x: ArrayLike) -> ArrayLike:
    """dJ_nu/dx. At x = 0 the series value is returned (1/2 for nu = 1, 0 for nu = 0 or nu > 1)."""
    nu = _order(order).nu
    arr = _argument(x, strictly_positive=False)
    safe = np.where(arr == 0.0, 1.0, arr)
    if nu >= 1.0:
        value = _jv(nu - 1.0, safe) - (nu / safe) * _jv(nu, safe)
    else:
        value = (nu / safe) * _jv(nu, safe) - _jv(nu + 1.0, safe)
    if np.any(arr == 0.0):
        value = np.where(arr == 0.0, special.jvp(nu, 0.0), value)
    return _result(np.asarray(value, dtype=float), x)


def bessel_y_prime(order: Union[BesselOrder, float], x: ArrayLike) -> ArrayLike:
    """dY_nu/dx for x > 0."""
    nu = _order(order).nu
    arr = _argument(x, strictly_positive=True)
    if nu >= 1.0:
        value = _yv(nu - 1.0, arr) - (nu / arr) * _yv(nu, arr)
    else:
        value = (nu / arr) * _yv(nu, arr) - _yv(nu + 1.0, arr)
    return _result(np.asarray(value, dtype=float), x)

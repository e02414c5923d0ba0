"""
Exact spectra on the unit ball and annulus by separation of variables.

Eigenfunctions are r^{(2-N)/2} C_nu(kappa r) times a spherical harmonic of degree k,
nu = k + (N-2)/2. For the concentrated density rho_eps the radial factor is

    J_nu(sqrt(lambda * eps) r) r^p                       on [0, 1-eps]
    (A J_nu(kappa r) + B Y_nu(kappa r)) r^p              on [1-eps, 1],  kappa = sqrt(lambda * rho_ann)

with p = (2-N)/2, C^1 matching at r = 1-eps and a vanishing derivative at r = 1.
Its zeros in lambda are found by scanning a 3x3 determinant and polishing the
sign changes with ``scipy.optimize.brentq``.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize, special

from .specfun import BesselOrder, bessel_j, bessel_j_prime, bessel_y, bessel_y_prime
from .spectrum import EXACT_CLUSTER_GAP, Spectrum
from .utils import NumericalError, logger, run_ordered

DEFAULT_EPS_MAX = 0.25
ROOT_RTOL = 1e-10
ROOT_XTOL = 1e-14
# Initial scan step as a fraction of the Steklov eigenvalue spacing |dOmega|/M
SCAN_STEP_FRACTION = 0.05
MAX_SCAN_HALVINGS = 6
MAX_DEGREE = 200


class BracketingError(NumericalError):
    """Raised when a characteristic equation root cannot be bracketed."""
    pass


@dataclass(frozen=True)
class BallProblem:
    """Unit ball in R^N carrying total mass M."""

    dimension: int
    total_mass: float

    def __post_init__(self):
        errors = []
        if int(self.dimension) != self.dimension or self.dimension < 2:
            errors.append(f"dimension must be an integer >= 2, got {self.dimension}")
        if not (self.total_mass > 0 and math.isfinite(self.total_mass)):
            errors.append(f"total mass must be positive, got {self.total_mass}")
        if errors:
            raise ValueError(f"Invalid ball problem: {'; '.join(errors)}")

    @property
    def volume(self) -> float:
        n = self.dimension
        return math.pi ** (n / 2.0) / math.gamma(n / 2.0 + 1.0)

    @property
    def surface(self) -> float:
        return self.dimension * self.volume

    @property
    def steklov_density(self) -> float:
        """Constant boundary density M/|dOmega| of the limit problem."""
        return self.total_mass / self.surface


def harmonic_multiplicity(dimension: int, degree: int) -> int:
    """Dimension of the degree-k spherical harmonics on the (N-1)-sphere."""
    if degree < 0:
        raise ValueError(f"degree must be non-negative, got {degree}")
    n, k = dimension, degree
    lower = math.comb(n + k - 3, k - 2) if k >= 2 else 0
    return math.comb(n + k - 1, k) - lower


@dataclass(frozen=True)
class ConcentratedDensity:
    """
    The density rho_eps: eps in the core |x| < 1-eps, a constant in the layer
    1-eps < |x| < 1 chosen so that the total mass is M.
    """

    epsilon: float
    problem: BallProblem
    eps_max: float = DEFAULT_EPS_MAX

    def __post_init__(self):
        eps = self.epsilon
        if not (0.0 < eps < self.eps_max):
            raise ValueError(f"epsilon must lie in (0, {self.eps_max}), got {eps}")
        if self.problem.total_mass <= eps * self.inner_volume:
            raise ValueError(
                f"epsilon={eps} leaves no mass for the boundary layer "
                f"(M={self.problem.total_mass} <= eps*|core|={eps * self.inner_volume})"
            )

    @property
    def inner_radius(self) -> float:
        return 1.0 - self.epsilon

    @property
    def inner_value(self) -> float:
        return self.epsilon

    @property
    def inner_volume(self) -> float:
        return self.problem.volume * (1.0 - self.epsilon) ** self.problem.dimension

    @property
    def layer_volume(self) -> float:
        # 1 - (1-eps)^N without cancellation for small eps
        n = self.problem.dimension
        return self.problem.volume * -math.expm1(n * math.log1p(-self.epsilon))

    @property
    def annulus_value(self) -> float:
        return (self.problem.total_mass - self.epsilon * self.inner_volume) / self.layer_volume

    def total_mass(self) -> float:
        return self.inner_value * self.inner_volume + self.annulus_value * self.layer_volume

    def __call__(self, radius):
        """Density at the given radius (scalar or array)."""
        r = np.asarray(radius, dtype=float)
        values = np.where(r < self.inner_radius, self.inner_value, self.annulus_value)
        return float(values) if values.ndim == 0 else values


class RootBracket(NamedTuple):
    root: float
    lower: float
    upper: float


@dataclass
class DerivativeEstimate:
    """Richardson-extrapolated slope of lambda_j(eps) at eps = 0."""

    index: int
    slope: float
    lambda_zero: float
    eps_grid: np.ndarray
    lambdas: np.ndarray
    quotients: np.ndarray
    levels: List[np.ndarray] = field(default_factory=list)

    def to_frame(self):
        import pandas as pd

        frame = pd.DataFrame({
            "epsilon": self.eps_grid,
            "lambda_eps": self.lambdas,
            "quotient": self.quotients,
        })
        for m, level in enumerate(self.levels[1:], start=1):
            column = np.full(self.eps_grid.size, np.nan)
            column[m:] = level
            frame[f"richardson_{m}"] = column
        return frame


def steklov_ball_spectrum(problem: BallProblem, count: int) -> Spectrum:
    """First ``count`` Steklov eigenvalues k*|dOmega|/M with multiplicities m(N, k)."""
    if count < 1:
        raise ValueError(f"count must be at least 1, got {count}")

    values: List[float] = []
    labels: List[Tuple[int, int]] = []
    degree = 0
    while len(values) < count:
        eigenvalue = degree / problem.steklov_density
        for _ in range(harmonic_multiplicity(problem.dimension, degree)):
            values.append(eigenvalue)
            labels.append((degree, 0))
        degree += 1

    return Spectrum(np.array(values[:count]), labels[:count], cluster_gap=EXACT_CLUSTER_GAP)


def _radial(order: BesselOrder, power: float, kappa: float, r: float,
            first_kind: bool) -> Tuple[float, float]:
    z = kappa * r
    if first_kind:
        c, dc = bessel_j(order, z), bessel_j_prime(order, z)
    else:
        c, dc = bessel_y(order, z), bessel_y_prime(order, z)
    value = r ** power * c
    derivative = power * r ** (power - 1.0) * c + r ** power * kappa * dc
    return value, derivative


def neumann_char(degree: int, lam: float, density: ConcentratedDensity,
                 problem: Optional[BallProblem] = None) -> float:
    """
    Scaled characteristic determinant F(lambda, eps) for angular degree k.

    Columns are the core solution and the two layer solutions; rows are value and
    derivative continuity at r = 1-eps and the Neumann condition at r = 1. The core
    column and every row are divided by their largest magnitude; these factors are
    positive and continuous in lambda, so zeros and signs are those of the raw
    determinant.
    """
    problem = problem or density.problem
    if problem != density.problem:
        raise ValueError("density was built for a different ball problem")
    if not (lam > 0 and math.isfinite(lam)):
        raise ValueError(f"lambda must be positive, got {lam}")

    order = BesselOrder.for_degree(problem.dimension, degree)
    power = (2.0 - problem.dimension) / 2.0
    r0 = density.inner_radius
    kappa_in = math.sqrt(lam * density.inner_value)
    kappa_out = math.sqrt(lam * density.annulus_value)

    fi, dfi = _radial(order, power, kappa_in, r0, first_kind=True)
    fj, dfj = _radial(order, power, kappa_out, r0, first_kind=True)
    fy, dfy = _radial(order, power, kappa_out, r0, first_kind=False)
    _, dj1 = _radial(order, power, kappa_out, 1.0, first_kind=True)
    _, dy1 = _radial(order, power, kappa_out, 1.0, first_kind=False)

    core_scale = max(abs(fi), abs(dfi))
    matrix = np.array([
        [fi / core_scale, -fj, -fy],
        [dfi / core_scale, -dfj, -dfy],
        [0.0, dj1, dy1],
    ])
    matrix /= np.max(np.abs(matrix), axis=1, keepdims=True)
    return float(np.linalg.det(matrix))


def _sign_changes(values: np.ndarray) -> np.ndarray:
    signs = np.sign(values)
    return np.nonzero((signs[:-1] * signs[1:] < 0) | (signs[:-1] == 0))[0]


def _scan(func: Callable[[float], float], start: float, stop: float,
          step: float) -> Tuple[np.ndarray, np.ndarray]:
    grid = np.arange(start, stop + 0.5 * step, step)
    return grid, np.array([func(x) for x in grid])


def neumann_degree_roots(degree: int, density: ConcentratedDensity, lambda_max: float,
                         step: Optional[float] = None) -> List[RootBracket]:
    """
    Positive roots of ``neumann_char`` for one degree in (0, lambda_max].

    The scan step is halved until two consecutive resolutions see the same number
    of sign changes, so that close root pairs are not lost in a single cell.
    """
    problem = density.problem
    step = step or SCAN_STEP_FRACTION / problem.steklov_density

    def func(lam: float) -> float:
        return neumann_char(degree, lam, density)

    grid, values = _scan(func, 0.5 * step, lambda_max, step)
    cells = _sign_changes(values)
    for _ in range(MAX_SCAN_HALVINGS):
        step /= 2.0
        finer_grid, finer_values = _scan(func, 0.5 * step, lambda_max, step)
        finer_cells = _sign_changes(finer_values)
        if finer_cells.size == cells.size:
            break
        logger.debug(f"degree {degree}: {cells.size} -> {finer_cells.size} sign changes, "
                     f"refining scan step to {step:.3g}")
        grid, values, cells = finer_grid, finer_values, finer_cells
    else:
        raise BracketingError(
            f"Root count for degree {degree} did not stabilise after "
            f"{MAX_SCAN_HALVINGS} scan refinements"
        )

    roots = []
    for i in cells:
        lower, upper = float(grid[i]), float(grid[i + 1])
        if values[i] == 0.0:
            roots.append(RootBracket(lower, lower, lower))
            continue
        try:
            root = optimize.brentq(func, lower, upper, xtol=ROOT_XTOL, rtol=ROOT_RTOL)
        except ValueError as e:
            raise BracketingError(f"brentq failed on [{lower}, {upper}] for degree {degree}: {e}")
        roots.append(RootBracket(float(root), lower, upper))
    return roots


def _degrees_needed(dimension: int, count: int) -> int:
    total, degree = 0, 0
    while True:
        total += harmonic_multiplicity(dimension, degree)
        if total >= count:
            return degree
        degree += 1


def neumann_ball_spectrum(density: ConcentratedDensity, problem: Optional[BallProblem] = None,
                          count: int = 6, lambda_max: Optional[float] = None) -> Spectrum:
    """
    First ``count`` eigenvalues of -Laplace u = lambda rho_eps u with Neumann data on the ball.

    Degrees are scanned upward; the lowest root of each degree increases with k,
    so the scan stops at the first degree k >= 1 without a root below
    ``lambda_max``.

    Raises:
        BracketingError: if fewer than ``count`` eigenvalues lie below ``lambda_max``
    """
    problem = problem or density.problem
    if problem != density.problem:
        raise ValueError("density was built for a different ball problem")
    if count < 1:
        raise ValueError(f"count must be at least 1, got {count}")
    if lambda_max is None:
        lambda_max = 2.0 * (_degrees_needed(problem.dimension, count) + 1) / problem.steklov_density

    entries: List[Tuple[float, Tuple[int, int]]] = [(0.0, (0, 0))]
    for degree in range(MAX_DEGREE):
        roots = neumann_degree_roots(degree, density, lambda_max)
        logger.debug(f"eps={density.epsilon:g} degree {degree}: {len(roots)} root(s) "
                     f"below {lambda_max:g}")
        if degree >= 1 and not roots:
            break
        offset = 1 if degree == 0 else 0
        multiplicity = harmonic_multiplicity(problem.dimension, degree)
        for radial, bracket in enumerate(roots, start=offset):
            entries.extend([(bracket.root, (degree, radial))] * multiplicity)

    entries.sort(key=lambda entry: entry[0])
    if len(entries) < count:
        raise BracketingError(
            f"Only {len(entries)} eigenvalue(s) below lambda_max={lambda_max:g}; "
            f"raise lambda_max to capture {count}"
        )
    entries = entries[:count]
    return Spectrum(
        np.array([value for value, _ in entries]),
        [label for _, label in entries],
        cluster_gap=EXACT_CLUSTER_GAP,
    )


def derivative_formula(problem: BallProblem, lambda0: float) -> float:
    """
    Closed-form lambda_j'(0) = 2 M l^2 / (3 N |Omega|) + 2 l^2 |Omega| / (2 M l + N^2 |Omega|).
    """
    if lambda0 < 0:
        raise ValueError(f"lambda0 must be non-negative, got {lambda0}")
    m, n, vol = problem.total_mass, problem.dimension, problem.volume
    return (2.0 * m * lambda0 ** 2 / (3.0 * n * vol)
            + 2.0 * lambda0 ** 2 * vol / (2.0 * m * lambda0 + n ** 2 * vol))


def richardson_levels(steps: Sequence[float], values: Sequence[float]) -> List[np.ndarray]:
    """
    Neville tableau extrapolating values(eps) polynomially to eps = 0.

    Level m holds the extrapolants through m+1 consecutive points; the last entry
    of the last level uses the whole grid.
    """
    x = np.asarray(steps, dtype=float)
    levels = [np.asarray(values, dtype=float)]
    for m in range(1, x.size):
        prev = levels[-1]
        lo, hi = x[:-m], x[m:]
        levels.append((hi * prev[:-1] - lo * prev[1:]) / (hi - lo))
    return levels


def derivative_numeric(problem: BallProblem, index: int, eps_grid: Sequence[float],
                       lambda_max: Optional[float] = None, jobs: int = 1) -> DerivativeEstimate:
    """
    Estimate lambda_j'(0) from one-sided quotients (lambda_j(eps) - lambda_j(0)) / eps.
    """
    grid = np.asarray(eps_grid, dtype=float)
    if grid.size < 3:
        raise ValueError("eps_grid needs at least 3 points")
    if np.any(np.diff(grid) >= 0) or np.any(grid <= 0):
        raise ValueError(f"eps_grid must be positive and strictly decreasing, got {grid.tolist()}")
    if index < 0:
        raise ValueError(f"index must be non-negative, got {index}")

    lambda_zero = steklov_ball_spectrum(problem, index + 1)[index]

    def solve(eps: float) -> float:
        density = ConcentratedDensity(float(eps), problem)
        return neumann_ball_spectrum(density, count=index + 1, lambda_max=lambda_max)[index]

    lambdas = np.array(run_ordered(solve, grid, jobs))
    quotients = (lambdas - lambda_zero) / grid
    levels = richardson_levels(grid, quotients)
    slope = float(levels[-1][-1])
    logger.debug(f"index {index}: quotients {quotients.tolist()} -> slope {slope:.10g}")
    return DerivativeEstimate(index, slope, lambda_zero, grid, lambdas, quotients, levels)


def annulus_cross_product(x: float, epsilon: float) -> float:
    """
    Scaled J_1'(x r0) Y_1'(x) - J_1'(x) Y_1'(x r0), r0 = 1 - eps; its zeros are the
    square roots of the degree-1 Neumann eigenvalues of the annulus r0 < |x| < 1.
    """
    r0 = 1.0 - epsilon
    jp_in, yp_in = bessel_j_prime(1, x * r0), bessel_y_prime(1, x * r0)
    jp_out, yp_out = bessel_j_prime(1, x), bessel_y_prime(1, x)
    scale = max(abs(yp_in), abs(yp_out), 1.0)
    return (jp_in * yp_out - jp_out * yp_in) / scale


def niwa_annulus_lambda1(epsilon: float, step: float = 0.01, x_max: float = 20.0) -> float:
    """First positive Neumann eigenvalue of the planar annulus {1 - eps < |x| < 1}."""
    if not (0.0 < epsilon < 1.0):
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")

    def func(x: float) -> float:
        return annulus_cross_product(x, epsilon)

    lower, f_lower = 5.0 * step, func(5.0 * step)
    while lower < x_max:
        upper = lower + step
        f_upper = func(upper)
        if f_lower == 0.0:
            return lower ** 2
        if f_lower * f_upper < 0:
            root = optimize.brentq(func, lower, upper, xtol=ROOT_XTOL, rtol=ROOT_RTOL)
            return float(root) ** 2
        lower, f_lower = upper, f_upper
    raise BracketingError(f"No annulus root below x={x_max} for epsilon={epsilon}")


def disk_neumann_first_positive() -> float:
    """(j'_{1,1})^2, the first positive Neumann eigenvalue of the unit disk."""
    return float(special.jnp_zeros(1, 1)[0]) ** 2

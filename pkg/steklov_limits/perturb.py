"""
Symmetric functions of eigenvalue clusters, their density differentials and
criticality under the mass constraint.

For F = F_1 u ... u F_n (clusters of equal eigenvalues) and
Lambda_{F,h} = e_h(lambda_j, j in F), a boundary density rho and a direction rho_dot,

    dLambda_{F,h}[rho][rho_dot] = - sum_k c_k sum_{l in F_k} int (Tr u_l)^2 rho_dot dsigma

with u_l orthonormal in the rho-weighted trace inner product. rho is critical
under fixed mass when sum_k c_k sum_l (Tr u_l)^2 is constant on the boundary.
"""

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .ball import BallProblem, steklov_ball_spectrum
from .fem import (DiscreteSpectrum, assemble_boundary_mass, assemble_interior_mass,
                  steklov_fem)
from .mesh import Mesh, refine_mesh
from .utils import NumericalError, logger, relative_gap, run_ordered

# Relative gaps certifying equal / distinct eigenvalues at FEM accuracy
CLUSTER_REL_GAP = 1e-4
SEPARATE_REL_GAP = 1e-2
CLUSTER_ABS_TOL = 1e-9
CRITICAL_THRESHOLD = 1e-3
ORTHONORMAL_TOL = 1e-8
SAMPLER_FLOOR = 0.1
FD_STEP = 1e-4
# delta_h bound on the error from the change under one uniform refinement
REFINEMENT_SAFETY = 2.0


class PartitionError(NumericalError):
    """Raised when eigenvalue clusters cannot be certified."""
    pass


class RankDeficiencyError(PartitionError):
    """Raised when cluster vectors do not span a space of full dimension."""
    pass


class SamplerError(ValueError):
    """Raised when a symmetric density cannot be sampled on the given mesh."""
    pass


def symmetric_function(values: Sequence[float], h: int) -> float:
    """Elementary symmetric polynomial e_h of ``values`` via the one-pass recurrence."""
    values = [float(v) for v in values]
    if not (1 <= h <= len(values)):
        raise ValueError(f"order h must lie in [1, {len(values)}], got {h}")
    partial = np.zeros(h + 1)
    partial[0] = 1.0
    for i, value in enumerate(values):
        for j in range(min(i + 1, h), 0, -1):
            partial[j] += value * partial[j - 1]
    return float(partial[h])


@dataclass
class BoundaryFunction:
    """
    A P1 function on the boundary of a mesh.

    ``values`` follow ``mesh.boundary_vertices()`` (sorted vertex indices).
    """

    mesh: Mesh
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        expected = self.mesh.boundary_vertices().size
        if self.values.shape != (expected,):
            raise ValueError(f"Boundary function needs {expected} values, got shape {self.values.shape}")

    @classmethod
    def constant(cls, mesh: Mesh, value: float) -> "BoundaryFunction":
        return cls(mesh, np.full(mesh.boundary_vertices().size, float(value)))

    @classmethod
    def from_function(cls, mesh: Mesh, func: Callable[[np.ndarray], np.ndarray]) -> "BoundaryFunction":
        """Sample ``func`` of the polar angle at the boundary vertices."""
        theta = boundary_angles(mesh)
        return cls(mesh, np.broadcast_to(func(theta), theta.shape).copy())

    @classmethod
    def from_vertex_vector(cls, mesh: Mesh, vector: np.ndarray) -> "BoundaryFunction":
        return cls(mesh, np.asarray(vector)[mesh.boundary_vertices()])

    def edge_values(self) -> np.ndarray:
        """(E, 2) endpoint values per boundary edge."""
        local = np.searchsorted(self.mesh.boundary_vertices(), self.mesh.boundary_edges)
        return self.values[local]

    def integrate(self) -> float:
        """Exact integral of the P1 interpolant over the polygonal boundary."""
        ends = self.edge_values()
        return float(np.sum(0.5 * self.mesh.edge_lengths() * (ends[:, 0] + ends[:, 1])))

    def _combine(self, other, op) -> "BoundaryFunction":
        if isinstance(other, BoundaryFunction):
            if other.mesh is not self.mesh:
                raise ValueError("Boundary functions live on different meshes")
            other = other.values
        return BoundaryFunction(self.mesh, op(self.values, other))

    def __add__(self, other):
        return self._combine(other, np.add)

    __radd__ = __add__

    def __sub__(self, other):
        return self._combine(other, np.subtract)

    def __mul__(self, other):
        return self._combine(other, np.multiply)

    __rmul__ = __mul__

    def __neg__(self):
        return BoundaryFunction(self.mesh, -self.values)


def boundary_angles(mesh: Mesh) -> np.ndarray:
    points = mesh.vertices[mesh.boundary_vertices()]
    return np.arctan2(points[:, 1], points[:, 0])


def mass(rho: BoundaryFunction) -> float:
    """M[rho], the integral of rho over the boundary."""
    return rho.integrate()


def mass_differential(rho_dot: BoundaryFunction) -> float:
    """dM[rho][rho_dot]; M is linear so this is M[rho_dot]."""
    return rho_dot.integrate()


def orthonormalize_boundary(vectors: np.ndarray, weight, tol: float = ORTHONORMAL_TOL) -> np.ndarray:
    """
    Orthonormalize columns in the inner product u^T W v (modified Gram-Schmidt, two passes).

    Raises:
        RankDeficiencyError: if a column is (numerically) in the span of the previous ones
    """
    basis = np.array(vectors, dtype=float, copy=True)
    if basis.ndim == 1:
        basis = basis[:, None]
    for i in range(basis.shape[1]):
        norm0 = math.sqrt(max(float(basis[:, i] @ (weight @ basis[:, i])), 0.0))
        for _ in range(2):
            for j in range(i):
                basis[:, i] -= float(basis[:, j] @ (weight @ basis[:, i])) * basis[:, j]
        norm = math.sqrt(max(float(basis[:, i] @ (weight @ basis[:, i])), 0.0))
        if norm0 == 0.0 or norm <= tol * norm0:
            raise RankDeficiencyError(
                f"Vector {i} is linearly dependent on the previous {i} "
                f"(residual norm {norm:.3g}); the cluster is probably mis-identified"
            )
        basis[:, i] /= norm
    return basis


def _certify_pair(a: float, b: float) -> bool:
    """True for one cluster, False for distinct values; raises in the grey zone."""
    scale = max(abs(a), abs(b))
    if abs(a - b) <= CLUSTER_REL_GAP * scale + CLUSTER_ABS_TOL:
        return True
    if relative_gap(a, b) > SEPARATE_REL_GAP:
        return False
    raise PartitionError(
        f"cannot certify partition: eigenvalues {a:.10g} and {b:.10g} are neither equal "
        f"within {CLUSTER_REL_GAP:g} nor separated by {SEPARATE_REL_GAP:g} (relative)"
    )


@dataclass
class ClusterPartition:
    """Index set F split into clusters of equal eigenvalues with orthonormal bases."""

    clusters: List[Tuple[int, ...]]
    common_values: List[float]
    bases: List[np.ndarray] = field(default_factory=list)
    weight: Optional[object] = None

    @property
    def indices(self) -> Tuple[int, ...]:
        return tuple(j for cluster in self.clusters for j in cluster)

    @property
    def sizes(self) -> List[int]:
        return [len(cluster) for cluster in self.clusters]

    def values(self) -> List[float]:
        """lambda_j for j in F, each cluster contributing its common value."""
        return [value for cluster, value in zip(self.clusters, self.common_values)
                for _ in cluster]

    @classmethod
    def certify(cls, spectrum: DiscreteSpectrum, indices: Sequence[int], weight) -> "ClusterPartition":
        """
        Group ``indices`` into clusters and check every j in F against every l not in F.

        ``weight`` is the mass matrix the eigenvectors are normalised in (boundary
        mass for Steklov, interior mass for Neumann).
        """
        members = sorted(set(int(j) for j in indices))
        if not members or members[0] < 0:
            raise ValueError(f"indices must be non-negative and non-empty, got {list(indices)}")
        if members[-1] + 1 >= len(spectrum):
            raise PartitionError(
                f"Need eigenvalue {members[-1] + 1} to separate F from the rest; "
                f"compute at least {members[-1] + 2} eigenvalues"
            )

        values = spectrum.eigenvalues
        outside = [l for l in range(len(spectrum)) if l not in members]
        for j in members:
            for l in outside:
                if _certify_pair(values[j], values[l]):
                    raise PartitionError(
                        f"Eigenvalue {j} ({values[j]:.10g}) coincides with {l} outside F; "
                        f"F must contain whole clusters"
                    )

        clusters: List[List[int]] = [[members[0]]]
        for prev, j in zip(members, members[1:]):
            if j == prev + 1 and _certify_pair(values[prev], values[j]):
                clusters[-1].append(j)
            else:
                clusters.append([j])

        common = []
        for cluster in clusters:
            value = float(np.mean(values[list(cluster)]))
            common.append(0.0 if abs(value) <= CLUSTER_ABS_TOL else value)

        bases = [orthonormalize_boundary(spectrum.eigenvectors[:, list(c)], weight) for c in clusters]
        partition = cls([tuple(c) for c in clusters], common, bases, weight)
        logger.debug(f"Certified partition {partition.clusters} with values "
                     f"{[f'{v:.8g}' for v in common]}")
        return partition


def coefficient_ck(partition: ClusterPartition, h: int) -> np.ndarray:
    """
    c_k = sum over h_1 + ... + h_n = h of
          C(|F_k|-1, h_k-1) lambda_k^{h_k} prod_{j != k} C(|F_j|, h_j) lambda_j^{h_j}.
    """
    sizes = partition.sizes
    if not (1 <= h <= sum(sizes)):
        raise ValueError(f"order h must lie in [1, {sum(sizes)}], got {h}")
    values = partition.common_values
    coefficients = np.zeros(len(sizes))
    for orders in itertools.product(*(range(size + 1) for size in sizes)):
        if sum(orders) != h:
            continue
        for k, (size_k, h_k) in enumerate(zip(sizes, orders)):
            if h_k == 0:
                continue
            term = math.comb(size_k - 1, h_k - 1) * values[k] ** h_k
            for j, (size_j, h_j) in enumerate(zip(sizes, orders)):
                if j != k:
                    term *= math.comb(size_j, h_j) * values[j] ** h_j
            coefficients[k] += term
    return coefficients


def trace_integral(mesh: Mesh, trace: np.ndarray, weight: BoundaryFunction) -> float:
    """int (Tr u)^2 w dsigma with P1 u and w, integrated exactly edge by edge."""
    u = np.asarray(trace, dtype=float)[np.searchsorted(mesh.boundary_vertices(), mesh.boundary_edges)]
    w = weight.edge_values()
    a, b = w[:, 0], w[:, 1]
    u0, u1 = u[:, 0], u[:, 1]
    local = (3 * a + b) * u0 ** 2 + 2 * (a + b) * u0 * u1 + (a + 3 * b) * u1 ** 2
    return float(np.sum(mesh.edge_lengths() / 12.0 * local))


def _check_normalisation(partition: ClusterPartition, weight, what: str) -> None:
    for cluster, basis in zip(partition.clusters, partition.bases):
        gram = basis.T @ (weight @ basis)
        error = np.max(np.abs(gram - np.eye(len(cluster))))
        if error > 1e-6:
            raise PartitionError(
                f"Basis of cluster {cluster} is not orthonormal for this {what} "
                f"(Gram error {error:.3g}); was the partition computed at a different density?"
            )


def differential_sym(mesh: Mesh, rho: BoundaryFunction, partition: ClusterPartition, h: int,
                     rho_dot: BoundaryFunction) -> float:
    """dLambda_{F,h}[rho][rho_dot] for a Steklov partition certified at ``rho``."""
    _check_normalisation(partition, assemble_boundary_mass(mesh, rho.edge_values()), "density")
    boundary = mesh.boundary_vertices()
    coefficients = coefficient_ck(partition, h)
    total = 0.0
    for c_k, basis in zip(coefficients, partition.bases):
        if c_k == 0.0:
            continue
        total += c_k * sum(trace_integral(mesh, basis[boundary, l], rho_dot)
                           for l in range(basis.shape[1]))
    return -total


def _profile(partition: ClusterPartition, h: int, rows: np.ndarray) -> np.ndarray:
    coefficients = coefficient_ck(partition, h)
    profile = np.zeros(rows.size)
    for c_k, basis in zip(coefficients, partition.bases):
        profile += c_k * np.sum(basis[rows] ** 2, axis=1)
    return profile


def profile_deviation(profile: np.ndarray) -> float:
    """(max - min) / |mean|, 0 for an identically zero profile."""
    mean = float(np.mean(profile))
    spread = float(np.max(profile) - np.min(profile))
    if mean == 0.0:
        return 0.0 if spread == 0.0 else math.inf
    return spread / abs(mean)


def is_critical(deviation: float, threshold: float = CRITICAL_THRESHOLD) -> bool:
    return deviation <= threshold


def criticality_residual_steklov(mesh: Mesh, rho: BoundaryFunction, partition: ClusterPartition,
                                 h: int) -> Tuple[BoundaryFunction, float]:
    """Boundary profile sum_k c_k sum_l (Tr u_l)^2 and its relative spread."""
    _check_normalisation(partition, assemble_boundary_mass(mesh, rho.edge_values()), "density")
    profile = _profile(partition, h, mesh.boundary_vertices())
    return BoundaryFunction(mesh, profile), profile_deviation(profile)


def criticality_residual_neumann(mesh: Mesh, interior_rho, partition: ClusterPartition,
                                 h: int) -> Tuple[np.ndarray, float]:
    """Interior-vertex profile sum_k c_k sum_l u_l^2 and its relative spread."""
    _check_normalisation(partition, assemble_interior_mass(mesh, interior_rho), "interior density")
    profile = _profile(partition, h, mesh.interior_vertices())
    return profile, profile_deviation(profile)


def steklov_partition(mesh: Mesh, rho: BoundaryFunction, indices: Sequence[int],
                      extra: int = 2) -> ClusterPartition:
    """Solve the Steklov problem at ``rho`` and certify the clusters of ``indices``."""
    count = max(indices) + 1 + extra
    spectrum = steklov_fem(mesh, rho.edge_values(), count)
    weight = assemble_boundary_mass(mesh, rho.edge_values())
    return ClusterPartition.certify(spectrum, indices, weight)


def symmetric_function_at(mesh: Mesh, rho: BoundaryFunction, indices: Sequence[int], h: int) -> float:
    """Lambda_{F,h}[rho] from a fresh Steklov solve."""
    spectrum = steklov_fem(mesh, rho.edge_values(), max(indices) + 1)
    return symmetric_function([spectrum[j] for j in sorted(indices)], h)


def symmetric_function_fd(mesh: Mesh, rho: BoundaryFunction, indices: Sequence[int], h: int,
                          rho_dot: BoundaryFunction, step: float = FD_STEP, jobs: int = 1) -> float:
    """Central difference of t -> Lambda_{F,h}[rho + t rho_dot] at t = 0."""
    shifted = [rho + step * rho_dot, rho - step * rho_dot]
    if any(np.min(r.values) <= 0 for r in shifted):
        raise ValueError(f"rho +/- {step:g} rho_dot is not positive; use a smaller step")
    plus, minus = run_ordered(lambda r: symmetric_function_at(mesh, r, indices, h), shifted, jobs)
    return (plus - minus) / (2.0 * step)


def perturbation_directions(mesh: Mesh, count: int, seed=None, max_frequency: int = 3) -> List[BoundaryFunction]:
    """
    ``count`` test directions: random low-frequency trigonometric combinations,
    the last one a random-sign piecewise constant function on boundary arcs.
    """
    if count < 1:
        raise ValueError(f"count must be at least 1, got {count}")
    rng = np.random.default_rng(seed)
    theta = boundary_angles(mesh)
    directions = []
    for _ in range(count - 1):
        values = np.full(theta.size, rng.normal())
        for q in range(1, max_frequency + 1):
            values += rng.normal() * np.cos(q * theta) + rng.normal() * np.sin(q * theta)
        directions.append(BoundaryFunction(mesh, values))
    arcs = 8
    signs = rng.choice([-1.0, 1.0], size=arcs)
    arc = np.floor((theta % (2 * np.pi)) / (2 * np.pi) * arcs).astype(int) % arcs
    directions.append(BoundaryFunction(mesh, signs[arc]))
    return directions


@dataclass
class GradientCheck:
    """Constrained differentials dLambda[rho_dot] over mass-preserving directions."""

    differentials: np.ndarray
    ratios: np.ndarray
    threshold: float

    @property
    def max_ratio(self) -> float:
        return float(np.max(self.ratios))

    @property
    def passes(self) -> bool:
        return self.max_ratio <= self.threshold


def constrained_gradient_check(mesh: Mesh, rho: BoundaryFunction, partition: ClusterPartition,
                               h: int, directions: Sequence[BoundaryFunction],
                               threshold: float = CRITICAL_THRESHOLD) -> GradientCheck:
    """
    Evaluate dLambda_{F,h} on each direction projected onto Ker dM.

    Each value is scaled by |mean profile| * int |rho_dot| so that it is bounded by
    the profile deviation; rho is critical when all ratios stay below ``threshold``.
    """
    length = mesh.boundary_length()
    profile, _ = criticality_residual_steklov(mesh, rho, partition, h)
    scale = abs(float(np.mean(profile.values)))
    differentials, ratios = [], []
    for direction in directions:
        projected = direction - mass_differential(direction) / length
        value = differential_sym(mesh, rho, partition, h, projected)
        size = BoundaryFunction(mesh, np.abs(projected.values)).integrate()
        differentials.append(value)
        ratios.append(0.0 if size == 0.0 or scale == 0.0 else abs(value) / (scale * size))
    return GradientCheck(np.array(differentials), np.array(ratios), threshold)


def symmetric_density_sampler(mesh: Mesh, n: int, total_mass: float, seed=None,
                              modes: int = 3, amplitude: float = 0.5) -> BoundaryFunction:
    """
    Random boundary density invariant under rotation by 2 pi / n with mass ``total_mass``.

    rho(theta) = 1 + sum_q a_q cos(q n theta) + b_q sin(q n theta), clamped at 0.1
    and rescaled.
    """
    if n < 1:
        raise SamplerError(f"symmetry order n must be at least 1, got {n}")
    if not total_mass > 0:
        raise SamplerError(f"total mass must be positive, got {total_mass}")
    theta = boundary_angles(mesh)
    if theta.size % n:
        raise SamplerError(f"{theta.size} boundary vertices are not a multiple of n={n}")
    radius = np.linalg.norm(mesh.vertices[mesh.boundary_vertices()], axis=1)
    # circular distance from each rotated angle to the nearest boundary angle
    offset = (theta[:, None] + 2 * np.pi / n - theta[None, :] + np.pi) % (2 * np.pi) - np.pi
    mismatch = float(np.max(np.min(np.abs(offset), axis=1)))
    if np.ptp(radius) > 1e-9 or mismatch > 1e-9:
        raise SamplerError(f"Mesh boundary is not invariant under rotation by 2*pi/{n}")

    rng = np.random.default_rng(seed)
    values = np.ones(theta.size)
    for q in range(1, modes + 1):
        a, b = amplitude * rng.uniform(-1.0, 1.0, size=2) / q
        values += a * np.cos(q * n * theta) + b * np.sin(q * n * theta)
    rho = BoundaryFunction(mesh, np.maximum(values, SAMPLER_FLOOR))
    return rho * (total_mass / mass(rho))


@dataclass
class BandleHerschReport:
    """
    Per-trial comparison lambda_j[rho] <= lambda_j[const] + delta_h.

    Rows with j < n are checked; the j = n rows are kept as evidence only.
    """

    table: pd.DataFrame
    delta_h: float
    constant_eigenvalues: np.ndarray
    exact_eigenvalues: np.ndarray
    constant_equality: bool
    violating_densities: Dict[int, BoundaryFunction] = field(default_factory=dict)

    @property
    def violations(self) -> int:
        return int(self.table["violation"].sum())


def discretization_tolerance(mesh: Mesh, total_mass: float, count: int,
                             refined: Optional[Mesh] = None) -> Tuple[float, np.ndarray]:
    """
    delta_h for the constant density M / |dOmega_h|, measured by h-refinement.

    Twice the largest change of lambda_0..lambda_{count-1} between ``mesh`` and
    its uniform refinement (or ``refined``); the closed form is not consulted.
    Also returns the eigenvalues on ``mesh``.
    """
    refined = refine_mesh(mesh) if refined is None else refined
    coarse = steklov_fem(mesh, total_mass / mesh.boundary_length(), count).eigenvalues
    fine = steklov_fem(refined, total_mass / refined.boundary_length(), count).eigenvalues
    return REFINEMENT_SAFETY * float(np.max(np.abs(coarse - fine))), coarse


def bandle_hersch_check(mesh: Mesh, n: int, total_mass: float, trials: int, seed,
                        delta_h: Optional[float] = None, jobs: int = 1) -> BandleHerschReport:
    """
    Sample ``trials`` n-fold symmetric densities of mass M and compare lambda_0..lambda_n
    with the constant density.

    Indices count from lambda_0 = 0, and the inequality is checked for j = 0..n-1.
    lambda_n of a symmetric density can exceed the constant value, so the j = n
    rows are reported unchecked. The constant density is compared with the closed
    form lambda_j[M/2pi] within delta_h. Violations are report content, not errors.
    """
    if trials < 1:
        raise ValueError(f"trials must be at least 1, got {trials}")
    count = n + 1
    if delta_h is None:
        delta, constant = discretization_tolerance(mesh, total_mass, count)
    else:
        delta = float(delta_h)
        constant = steklov_fem(mesh, total_mass / mesh.boundary_length(), count).eigenvalues
    exact = steklov_ball_spectrum(BallProblem(2, total_mass), count).eigenvalues
    equality = bool(np.all(np.abs(constant - exact) <= delta))

    children = np.random.SeedSequence(seed).spawn(trials)

    def run_trial(child) -> Tuple[BoundaryFunction, np.ndarray]:
        rho = symmetric_density_sampler(mesh, n, total_mass, child)
        return rho, steklov_fem(mesh, rho.edge_values(), count).eigenvalues

    results = run_ordered(run_trial, children, jobs)

    rows, offenders = [], {}
    for trial, (rho, eigenvalues) in enumerate(results):
        for j in range(count):
            margin = constant[j] + delta - eigenvalues[j]
            checked = j < n
            violation = bool(checked and margin < 0)
            if violation:
                offenders[trial] = rho
            rows.append({
                "trial": trial,
                "j": j,
                "lambda_rho": float(eigenvalues[j]),
                "lambda_const": float(constant[j]),
                "margin": float(margin),
                "checked": checked,
                "violation": violation,
                "rho_min": float(rho.values.min()),
                "rho_max": float(rho.values.max()),
            })
    table = pd.DataFrame(rows)
    exceeded = int(((table["j"] == n) & (table["margin"] < 0)).sum())
    logger.info(f"Bandle-Hersch: {trials} trial(s), n={n}, delta_h={delta:.3g}, "
                f"{int(table['violation'].sum())} violation(s), lambda_{n} above constant in {exceeded}")
    return BandleHerschReport(table, delta, constant, exact, equality, offenders)

"""
P1 finite elements for the Steklov and weighted Neumann problems.

Both problems are pencils K u = lambda W u with K the stiffness matrix and W an
interior (Neumann) or boundary (Steklov) mass matrix. The boundary mass matrix is
only semidefinite, so the solver works with the definite pencil
(K + sigma W) u = (lambda + sigma) W u and discards directions in the kernel of W.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple, Union

import numpy as np
from scipy import linalg, sparse
from scipy.sparse.linalg import ArpackError, ArpackNoConvergence, eigsh

from .mesh import Mesh, generate_disk_mesh, layer_ring_count
from .spectrum import FEM_CLUSTER_GAP, Spectrum, cluster_indices
from .utils import NumericalError, logger

DEFAULT_SIGMA = 1.0
# Largest system solved with dense eigh; bigger ones go through ARPACK shift-invert
DENSE_LIMIT = 2000
# Smallest triangle area accepted, relative to the largest
DEGENERATE_AREA = 1e-12
DENSITY_FLOOR = 1e-12
# Error of an O(h^2) method from the change under one refinement step
RICHARDSON_FACTOR = 4.0 / 3.0

DensityInput = Union[float, np.ndarray, Callable]


class AssemblyError(ValueError):
    """Raised for degenerate elements and invalid densities."""
    pass


class SolverError(NumericalError):
    """Raised when the generalized eigenproblem cannot be solved."""
    pass


def _check_density(values: np.ndarray, size: int, what: str) -> np.ndarray:
    if values.shape[0] != size:
        raise AssemblyError(f"{what} density has {values.shape[0]} entries, expected {size}")
    if not np.all(np.isfinite(values)):
        raise AssemblyError(f"{what} density contains non-finite values")
    if np.any(values < DENSITY_FLOOR):
        raise AssemblyError(f"{what} density must be positive, got min {values.min():.3g}")
    return values


def interior_density_values(mesh: Mesh, density: DensityInput) -> np.ndarray:
    """
    Per-triangle density values.

    ``density`` may be a scalar, an array with one value per triangle, or a
    callable of the radius (e.g. a ``ConcentratedDensity``) evaluated at each
    triangle centroid.
    """
    if callable(density):
        radius = np.linalg.norm(mesh.centroids(), axis=1)
        values = np.asarray(density(radius), dtype=float)
    else:
        values = np.asarray(density, dtype=float)
    if values.ndim == 0:
        values = np.full(mesh.num_triangles, float(values))
    return _check_density(values, mesh.num_triangles, "Interior")


def boundary_density_values(mesh: Mesh, density: Union[float, np.ndarray]) -> np.ndarray:
    """Per-edge values (E,) or per-edge endpoint values (E, 2) of a boundary density."""
    values = np.asarray(density, dtype=float)
    if values.ndim == 0:
        values = np.full(len(mesh.boundary_edges), float(values))
    if values.ndim > 2 or (values.ndim == 2 and values.shape[1] != 2):
        raise AssemblyError(f"Boundary density must have shape (E,) or (E, 2), got {values.shape}")
    return _check_density(values, len(mesh.boundary_edges), "Boundary")


@dataclass
class DensityField:
    """Interior density per triangle and boundary density per edge."""

    interior: Optional[np.ndarray] = None
    boundary: Optional[np.ndarray] = None

    @classmethod
    def constant(cls, mesh: Mesh, interior: float = 1.0, boundary: float = 1.0) -> "DensityField":
        return cls(interior_density_values(mesh, interior), boundary_density_values(mesh, boundary))

    @classmethod
    def radial(cls, mesh: Mesh, func: Callable) -> "DensityField":
        """Interior density from a radial profile sampled at triangle centroids."""
        return cls(interior=interior_density_values(mesh, func))

    def require(self, part: str) -> np.ndarray:
        values = getattr(self, part)
        if values is None:
            raise AssemblyError(f"Density field has no {part} values")
        return values


def _element_geometry(mesh: Mesh) -> Tuple[np.ndarray, np.ndarray]:
    areas = mesh.areas()
    if np.any(areas <= DEGENERATE_AREA * np.max(np.abs(areas))):
        bad = int(np.argmin(areas))
        raise AssemblyError(f"Degenerate triangle {bad} (area {areas[bad]:.3g})")
    p = mesh.vertices[mesh.triangles]
    # edge opposite to local vertex i
    edges = np.stack([p[:, 2] - p[:, 1], p[:, 0] - p[:, 2], p[:, 1] - p[:, 0]], axis=1)
    return areas, edges


def _scatter(local: np.ndarray, dofs: np.ndarray, size: int) -> sparse.csr_matrix:
    n_local = dofs.shape[1]
    rows = np.repeat(dofs, n_local, axis=1).ravel()
    cols = np.tile(dofs, (1, n_local)).ravel()
    return sparse.coo_matrix((local.ravel(), (rows, cols)), shape=(size, size)).tocsr()


def assemble_stiffness(mesh: Mesh) -> sparse.csr_matrix:
    """P1 stiffness matrix, K_ij = sum_T (e_i . e_j) / (4 |T|)."""
    areas, edges = _element_geometry(mesh)
    local = np.einsum("tid,tjd->tij", edges, edges) / (4.0 * areas)[:, None, None]
    return _scatter(local, mesh.triangles, mesh.num_vertices)


_P1_TRIANGLE_MASS = (np.ones((3, 3)) + np.eye(3)) / 12.0


def assemble_interior_mass(mesh: Mesh, density: DensityInput = 1.0) -> sparse.csr_matrix:
    """Consistent P1 mass matrix weighted by a per-triangle density."""
    areas, _ = _element_geometry(mesh)
    rho = interior_density_values(mesh, density)
    local = (areas * rho)[:, None, None] * _P1_TRIANGLE_MASS
    return _scatter(local, mesh.triangles, mesh.num_vertices)


def assemble_boundary_mass(mesh: Mesh, density: Union[float, np.ndarray] = 1.0) -> sparse.csr_matrix:
    """
    Consistent 1D P1 mass matrix on the boundary edges.

    A density of shape (E,) is constant per edge (L/6 [[2,1],[1,2]] rho_e); shape
    (E, 2) holds endpoint values a, b of a P1 density and integrates the cubic
    products exactly (L/12 [[3a+b, a+b], [a+b, a+3b]]).
    """
    rho = boundary_density_values(mesh, density)
    lengths = mesh.edge_lengths()
    if np.any(lengths <= 0):
        raise AssemblyError("Boundary edge of zero length")
    if rho.ndim == 1:
        local = (lengths * rho)[:, None, None] * (np.array([[2.0, 1.0], [1.0, 2.0]]) / 6.0)
    else:
        a, b = rho[:, 0], rho[:, 1]
        local = np.empty((len(lengths), 2, 2))
        local[:, 0, 0] = 3.0 * a + b
        local[:, 1, 1] = a + 3.0 * b
        local[:, 0, 1] = local[:, 1, 0] = a + b
        local *= (lengths / 12.0)[:, None, None]
    return _scatter(local, mesh.boundary_edges, mesh.num_vertices)


def rayleigh_quotient(K, W, u: np.ndarray) -> float:
    """u^T K u / u^T W u."""
    u = np.asarray(u, dtype=float)
    denominator = float(u @ (W @ u))
    if denominator <= 0:
        raise ValueError("Rayleigh quotient undefined: u lies in the kernel of W")
    return float(u @ (K @ u)) / denominator


@dataclass
class DiscreteSpectrum:
    """Eigenpairs of K u = lambda W u with W-orthonormal eigenvectors (columns)."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    boundary_vertices: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    cluster_gap: float = FEM_CLUSTER_GAP

    def __len__(self) -> int:
        return int(self.eigenvalues.size)

    def __getitem__(self, j: int) -> float:
        return float(self.eigenvalues[j])

    @property
    def boundary_traces(self) -> np.ndarray:
        """Eigenvector values at the boundary vertices (rows follow ``boundary_vertices``)."""
        return self.eigenvectors[self.boundary_vertices]

    @property
    def clusters(self) -> List[Tuple[int, ...]]:
        return cluster_indices(self.eigenvalues, self.cluster_gap)

    def as_spectrum(self) -> Spectrum:
        return Spectrum(self.eigenvalues.copy(), cluster_gap=self.cluster_gap,
                        eigenvectors=self.eigenvectors)


def _lowdin(vectors: np.ndarray, W) -> np.ndarray:
    gram = vectors.T @ (W @ vectors)
    values, basis = linalg.eigh(gram)
    if np.min(values) <= 0:
        raise SolverError("Eigenvectors are linearly dependent in the W inner product")
    return vectors @ (basis @ np.diag(values ** -0.5) @ basis.T)


def solve_generalized(K, W, count: int, sigma: float = DEFAULT_SIGMA,
                      dense_limit: int = DENSE_LIMIT) -> DiscreteSpectrum:
    """
    Smallest ``count`` finite eigenpairs of K u = lambda W u.

    K and W are symmetric positive semidefinite and K + sigma W must be positive
    definite. Eigenvectors are returned W-orthonormal, eigenvalues ascending.

    Raises:
        SolverError: if K + sigma W is numerically singular or fewer than
            ``count`` finite eigenvalues exist
    """
    n = K.shape[0]
    if K.shape != W.shape:
        raise ValueError(f"K {K.shape} and W {W.shape} differ in shape")
    if not (1 <= count <= n):
        raise ValueError(f"count must lie in [1, {n}], got {count}")
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")

    if n <= dense_limit:
        logger.debug(f"Dense generalized solve: n={n}, count={count}, sigma={sigma:g}")
        shifted = K + sigma * W
        shifted = shifted.toarray() if sparse.issparse(shifted) else np.asarray(shifted)
        weight = W.toarray() if sparse.issparse(W) else np.asarray(W)
        try:
            # W v = mu (K + sigma W) v, mu = 1 / (lambda + sigma); largest mu first
            mu, vectors = linalg.eigh(weight, shifted, subset_by_index=[n - count, n - 1])
        except linalg.LinAlgError as e:
            raise SolverError(f"K + sigma*W is not positive definite for sigma={sigma:g} ({e}); "
                              f"retry with sigma={10 * sigma:g}")
        mu, vectors = mu[::-1], vectors[:, ::-1]
        # mu of an infinite eigenvalue is zero up to rounding
        finite = mu > 1e-12 * mu[0]
        if not np.all(finite):
            raise SolverError(f"Only {int(np.sum(finite))} finite eigenvalue(s) available, "
                              f"{count} requested")
        eigenvalues = 1.0 / mu - sigma
        vectors = vectors / np.sqrt(mu)
    else:
        logger.debug(f"Sparse shift-invert solve: n={n}, count={count}, sigma={sigma:g}")
        try:
            eigenvalues, vectors = eigsh(sparse.csc_matrix(K), k=count, M=sparse.csc_matrix(W),
                                         sigma=-sigma, which="LM")
        except (ArpackError, ArpackNoConvergence, RuntimeError) as e:
            raise SolverError(f"Shift-invert eigensolve failed for sigma={sigma:g} ({e}); "
                              f"retry with sigma={10 * sigma:g}")
        order = np.argsort(eigenvalues)
        eigenvalues, vectors = eigenvalues[order], _lowdin(vectors[:, order], W)

    return DiscreteSpectrum(np.asarray(eigenvalues, dtype=float), vectors)


def steklov_fem(mesh: Mesh, boundary_density: Union[float, np.ndarray, DensityField], count: int,
                sigma: float = DEFAULT_SIGMA) -> DiscreteSpectrum:
    """First ``count`` discrete Steklov eigenpairs for the given boundary density."""
    if isinstance(boundary_density, DensityField):
        boundary_density = boundary_density.require("boundary")
    boundary = mesh.boundary_vertices()
    if count > boundary.size:
        raise ValueError(f"At most {boundary.size} Steklov eigenvalues exist on this mesh, "
                         f"{count} requested")
    K = assemble_stiffness(mesh)
    B = assemble_boundary_mass(mesh, boundary_density)
    spectrum = solve_generalized(K, B, count, sigma)
    spectrum.boundary_vertices = boundary
    return spectrum


def neumann_fem(mesh: Mesh, interior_density: Union[DensityInput, DensityField], count: int,
                sigma: float = DEFAULT_SIGMA) -> DiscreteSpectrum:
    """First ``count`` eigenpairs of -Laplace u = lambda rho u with Neumann data."""
    if isinstance(interior_density, DensityField):
        interior_density = interior_density.require("interior")
    K = assemble_stiffness(mesh)
    M = assemble_interior_mass(mesh, interior_density)
    spectrum = solve_generalized(K, M, count, sigma)
    spectrum.boundary_vertices = mesh.boundary_vertices()
    return spectrum


def disk_steklov_linear_eigenvalue(boundary_vertex_count: int, density: float = 1.0) -> float:
    """
    Discrete Steklov eigenvalue of x and y on the polar disk mesh with constant density.

    With m boundary vertices and delta = 2 pi / m this is
    3 cos(delta/2) / (rho (2 + cos delta)) = (1 + delta^2/24 + ...) / rho.
    """
    if boundary_vertex_count < 3:
        raise ValueError(f"need at least 3 boundary vertices, got {boundary_vertex_count}")
    delta = 2.0 * math.pi / boundary_vertex_count
    return 3.0 * math.cos(delta / 2.0) / (density * (2.0 + math.cos(delta)))


def neumann_layer_estimate(refinement: int, layer_width: float, density: DensityInput, count: int,
                           layer_rings: int = 2,
                           sigma: float = DEFAULT_SIGMA) -> Tuple[np.ndarray, np.ndarray]:
    """
    Neumann eigenvalues on the layer-aligned disk mesh and a per-index error estimate.

    The estimate is 4/3 of the change under one refinement step that halves the
    mesh size in the core and in the layer alike.
    """
    layer = layer_ring_count(refinement, layer_width, layer_rings)

    def solve(level: int, rings: int) -> np.ndarray:
        mesh = generate_disk_mesh(level, layer_width=layer_width, layer_rings=rings)
        return neumann_fem(mesh, DensityField.radial(mesh, density), count, sigma).eigenvalues

    coarse = solve(refinement, layer)
    fine = solve(refinement + 1, 2 * layer)
    logger.debug(f"Layer estimate eps={layer_width:g}: refinement {refinement}, {layer} layer ring(s)")
    return coarse, RICHARDSON_FACTOR * np.abs(coarse - fine)

"""
Triangulated planar domains for the P1 solvers.

Plain-text mesh format, one record per line, 0-based indices::

    # comment
    v x y          vertex
    t i j k        triangle, counter-clockwise
    b i j          boundary edge, domain on the left (outward normal to the right)
"""

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np
from scipy.spatial import KDTree

from .utils import logger, validate_file_path

# Vertices on ring i of the polar disk mesh
RING_SECTORS = 6


class MeshError(ValueError):
    """Raised for invalid meshes and malformed mesh files."""
    pass


@dataclass
class Mesh:
    """Vertices (V, 2), triangles (T, 3) and boundary edges (E, 2)."""

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=float).reshape(-1, 2)
        self.triangles = np.ascontiguousarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        self.boundary_edges = np.ascontiguousarray(self.boundary_edges, dtype=np.int64).reshape(-1, 2)
        self.validate()

    @property
    def num_vertices(self) -> int:
        return int(self.vertices.shape[0])

    @property
    def num_triangles(self) -> int:
        return int(self.triangles.shape[0])

    def validate(self) -> None:
        """
        Check index ranges, positive orientation, and that the boundary edges are
        exactly the unshared triangle edges, forming closed loops.

        Raises:
            MeshError: listing every violation found
        """
        errors = []
        nv = self.num_vertices
        if self.num_triangles == 0:
            raise MeshError("Mesh has no triangles")
        for name, arr in (("triangle", self.triangles), ("boundary edge", self.boundary_edges)):
            if arr.size and (arr.min() < 0 or arr.max() >= nv):
                errors.append(f"{name} index out of range [0, {nv})")
        if errors:
            raise MeshError("Mesh validation failed: " + "; ".join(errors))

        areas = self.areas()
        bad = np.nonzero(areas <= 0)[0]
        if bad.size:
            errors.append(f"{bad.size} triangle(s) with non-positive area (first: {bad[0]})")

        # Directed triangle edges; an interior edge appears once in each direction
        tri = self.triangles
        directed = np.concatenate([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]])
        forward = directed[:, 0] * nv + directed[:, 1]
        backward = directed[:, 1] * nv + directed[:, 0]
        unshared = np.setdiff1d(forward, backward)
        declared = self.boundary_edges[:, 0] * nv + self.boundary_edges[:, 1]
        if np.unique(declared).size != declared.size:
            errors.append("duplicate boundary edges")
        if not np.array_equal(np.sort(declared), np.sort(unshared)):
            missing = np.setdiff1d(unshared, declared).size
            extra = np.setdiff1d(declared, unshared).size
            errors.append(f"boundary edges do not match unshared triangle edges "
                          f"({missing} missing, {extra} not on the boundary)")

        starts = np.sort(self.boundary_edges[:, 0])
        ends = np.sort(self.boundary_edges[:, 1])
        if not np.array_equal(starts, ends) or np.unique(starts).size != starts.size:
            errors.append("boundary edges do not form closed loops")

        if errors:
            raise MeshError("Mesh validation failed: " + "; ".join(errors))

    def areas(self) -> np.ndarray:
        """Signed triangle areas (positive for counter-clockwise triangles)."""
        p = self.vertices[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def total_area(self) -> float:
        return float(self.areas().sum())

    def centroids(self) -> np.ndarray:
        return self.vertices[self.triangles].mean(axis=1)

    def boundary_vertices(self) -> np.ndarray:
        """Sorted indices of the vertices on the boundary."""
        return np.unique(self.boundary_edges)

    def interior_vertices(self) -> np.ndarray:
        return np.setdiff1d(np.arange(self.num_vertices), self.boundary_vertices())

    def edge_lengths(self) -> np.ndarray:
        p = self.vertices[self.boundary_edges]
        return np.linalg.norm(p[:, 1] - p[:, 0], axis=1)

    def boundary_length(self) -> float:
        return float(self.edge_lengths().sum())

    def mesh_size(self) -> float:
        """Longest triangle edge."""
        p = self.vertices[self.triangles]
        lengths = np.linalg.norm(p - np.roll(p, -1, axis=1), axis=2)
        return float(lengths.max())

    def save(self, path: Union[str, Path]) -> Path:
        """Write the mesh in the plain-text format."""
        path = Path(path)
        lines = [f"# {self.num_vertices} vertices, {self.num_triangles} triangles, "
                 f"{len(self.boundary_edges)} boundary edges"]
        lines.extend(f"v {x:.17g} {y:.17g}" for x, y in self.vertices)
        lines.extend(f"t {i} {j} {k}" for i, j, k in self.triangles)
        lines.extend(f"b {i} {j}" for i, j in self.boundary_edges)
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        logger.debug(f"Wrote mesh to {path}")
        return path

    @classmethod
    def load(cls, path: Union[str, Path]) -> "Mesh":
        """
        Read a mesh in the plain-text format.

        Raises:
            FileNotFoundError: If the file does not exist
            MeshError: On malformed records or an invalid mesh
        """
        path = validate_file_path(path)
        vertices, triangles, edges = [], [], []
        arity = {"v": (2, float, vertices), "t": (3, int, triangles), "b": (2, int, edges)}

        with open(path, "r", encoding="utf-8") as f:
            for line_no, raw in enumerate(f, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                tag, *fields = line.split()
                if tag not in arity:
                    raise MeshError(f"{path}:{line_no}: unknown record type '{tag}'")
                count, kind, target = arity[tag]
                if len(fields) != count:
                    raise MeshError(f"{path}:{line_no}: '{tag}' expects {count} values, got {len(fields)}")
                try:
                    target.append([kind(x) for x in fields])
                except ValueError:
                    raise MeshError(f"{path}:{line_no}: cannot parse '{line}'")

        logger.debug(f"Loaded mesh {path}: {len(vertices)} vertices, {len(triangles)} triangles")
        return cls(np.array(vertices, dtype=float), np.array(triangles, dtype=np.int64),
                   np.array(edges, dtype=np.int64))


def _ring_offset(ring: int) -> int:
    # centre vertex, then 6, 12, ... vertices on rings 1, 2, ...
    return 1 + 3 * ring * (ring - 1)


def layer_ring_count(refinement: int, layer_width: float, layer_rings: int = 2) -> int:
    """Rings inside the boundary layer of ``generate_disk_mesh(refinement, layer_width)``."""
    rings = 2 ** (refinement - 1)
    if not (0.0 < layer_width < 1.0):
        raise MeshError(f"layer_width must lie in (0, 1), got {layer_width}")
    if layer_rings < 2:
        raise MeshError(f"layer_rings must be at least 2, got {layer_rings}")
    return max(layer_rings, math.ceil(layer_width * rings))


def _ring_points(radius: float, size: int) -> np.ndarray:
    # one division per vertex keeps angles bitwise identical across levels
    angles = 2.0 * np.pi * (np.arange(size) / size)
    return radius * np.column_stack([np.cos(angles), np.sin(angles)])


def generate_disk_mesh(refinement: int, layer_width: Optional[float] = None,
                       layer_rings: int = 2) -> Mesh:
    """
    Structured polar triangulation of the unit disk.

    Level r has n = 2^(r-1) rings; ring i carries 6i vertices on radius i/n and the
    mesh has 6n^2 triangles. Level r+1 contains every vertex of level r exactly.

    With ``layer_width`` the n rings fill the core of radius 1 - layer_width and
    L = max(layer_rings, ceil(layer_width * n)) further rings of 6n vertices each
    resolve the boundary layer. Layer vertices are radially aligned and every
    quadrilateral between two layer rings is split into two triangles, so the
    layer can be arbitrarily thin. Such meshes are not nested across levels.
    """
    if int(refinement) != refinement or refinement < 1:
        raise MeshError(f"refinement must be an integer >= 1, got {refinement}")

    rings = 2 ** (refinement - 1)
    layer = 0 if layer_width is None else layer_ring_count(refinement, layer_width, layer_rings)
    core_radius = 1.0 if layer_width is None else 1.0 - layer_width

    points = [np.zeros((1, 2))]
    for i in range(1, rings + 1):
        points.append(_ring_points(core_radius * i / rings, RING_SECTORS * i))

    triangles = []
    for i in range(1, rings + 1):
        outer, outer_size = _ring_offset(i), RING_SECTORS * i
        inner, inner_size = _ring_offset(i - 1), max(RING_SECTORS * (i - 1), 1)
        if i == 1:
            inner = 0
        for s in range(RING_SECTORS):
            for t in range(i):
                o0 = outer + (s * i + t) % outer_size
                o1 = outer + (s * i + t + 1) % outer_size
                c0 = inner + (s * (i - 1) + t) % inner_size
                triangles.append((o0, o1, c0))
                if t < i - 1:
                    c1 = inner + (s * (i - 1) + t + 1) % inner_size
                    triangles.append((c0, o1, c1))

    size = RING_SECTORS * rings
    outer = _ring_offset(rings)
    for k in range(1, layer + 1):
        points.append(_ring_points(core_radius + layer_width * k / layer, size))
        inner, outer = outer, _ring_offset(rings + 1) + (k - 1) * size
        for t in range(size):
            a0, a1 = inner + t, inner + (t + 1) % size
            b0, b1 = outer + t, outer + (t + 1) % size
            triangles.append((a0, b0, b1))
            triangles.append((a0, b1, a1))
    vertices = np.concatenate(points)

    j = np.arange(size)
    edges = np.column_stack([outer + j, outer + (j + 1) % size])

    mesh = Mesh(vertices, np.array(triangles, dtype=np.int64), edges)
    logger.debug(f"Disk mesh level {refinement}: {mesh.num_vertices} vertices, "
                 f"{mesh.num_triangles} triangles, h={mesh.mesh_size():.4g}")
    return mesh


def refine_mesh(mesh: Mesh, snap_tol: float = 1e-9) -> Mesh:
    """
    Uniform refinement: every triangle is split into four at its edge midpoints.

    If all boundary vertices lie on one circle about the origin, new boundary
    midpoints are pushed onto that circle.
    """
    tri = mesh.triangles
    nv = mesh.num_vertices
    local = np.concatenate([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]])
    keys = np.sort(local, axis=1)
    unique, inverse = np.unique(keys[:, 0] * nv + keys[:, 1], return_inverse=True)
    ends = np.column_stack([unique // nv, unique % nv])
    midpoints = 0.5 * (mesh.vertices[ends[:, 0]] + mesh.vertices[ends[:, 1]])

    boundary_keys = np.sort(mesh.boundary_edges, axis=1)
    boundary_mid = np.searchsorted(unique, boundary_keys[:, 0] * nv + boundary_keys[:, 1])
    radius = np.linalg.norm(mesh.vertices[mesh.boundary_vertices()], axis=1)
    if np.ptp(radius) <= snap_tol * radius.max():
        points = midpoints[boundary_mid]
        midpoints[boundary_mid] = points * (radius.mean() / np.linalg.norm(points, axis=1))[:, None]

    m = nv + inverse.reshape(3, -1).T  # midpoints of edges (0,1), (1,2), (2,0)
    a, b, c = tri[:, 0], tri[:, 1], tri[:, 2]
    triangles = np.concatenate([
        np.column_stack([a, m[:, 0], m[:, 2]]),
        np.column_stack([m[:, 0], b, m[:, 1]]),
        np.column_stack([m[:, 2], m[:, 1], c]),
        m,
    ])
    mid = nv + boundary_mid
    edges = np.concatenate([np.column_stack([mesh.boundary_edges[:, 0], mid]),
                            np.column_stack([mid, mesh.boundary_edges[:, 1]])])
    refined = Mesh(np.concatenate([mesh.vertices, midpoints]), triangles, edges)
    logger.debug(f"Refined mesh: {refined.num_vertices} vertices, {refined.num_triangles} triangles")
    return refined


def rotation_permutation(mesh: Mesh, angle: float, tol: float = 1e-9) -> np.ndarray:
    """
    Vertex relabeling induced by a rotation about the origin.

    Returns ``perm`` with vertex ``i`` rotated onto vertex ``perm[i]``.

    Raises:
        MeshError: if the rotation does not map the vertex set onto itself
    """
    c, s = math.cos(angle), math.sin(angle)
    rotated = mesh.vertices @ np.array([[c, s], [-s, c]])
    distance, perm = KDTree(mesh.vertices).query(rotated)
    if np.max(distance) > tol:
        raise MeshError(f"Rotation by {angle:.6g} rad is not a symmetry of the mesh "
                        f"(max mismatch {np.max(distance):.3g})")
    if np.unique(perm).size != perm.size:
        raise MeshError("Rotation maps two vertices onto the same vertex")
    return perm.astype(np.int64)

"""
Sorted eigenvalue lists with multiplicity clusters.
"""

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

# Relative gap below which two exact (Bessel) eigenvalues are one cluster
EXACT_CLUSTER_GAP = 1e-6
# Same for finite-element eigenvalues
FEM_CLUSTER_GAP = 1e-4
# Absolute slack so that rounding noise around 0 does not split the zero cluster
CLUSTER_ABS_TOL = 1e-10


def cluster_indices(values: Sequence[float],
                    rel_gap: float = EXACT_CLUSTER_GAP,
                    abs_tol: float = CLUSTER_ABS_TOL) -> List[Tuple[int, ...]]:
    """
    Partition the indices of an ascending sequence into multiplicity groups.

    Consecutive values a <= b share a group when b - a <= rel_gap * max(|a|, |b|) + abs_tol.
    """
    vals = np.asarray(values, dtype=float)
    if vals.size == 0:
        return []
    groups: List[List[int]] = [[0]]
    for i in range(1, vals.size):
        a, b = vals[i - 1], vals[i]
        if abs(b - a) <= rel_gap * max(abs(a), abs(b)) + abs_tol:
            groups[-1].append(i)
        else:
            groups.append([i])
    return [tuple(g) for g in groups]


@dataclass
class Spectrum:
    """Eigenvalues indexed j = 0, 1, ... in ascending order."""

    eigenvalues: np.ndarray
    labels: List[Tuple[int, int]] = field(default_factory=list)
    cluster_gap: float = EXACT_CLUSTER_GAP
    eigenvectors: Optional[np.ndarray] = None

    def __post_init__(self):
        self.eigenvalues = np.asarray(self.eigenvalues, dtype=float)
        if self.eigenvalues.ndim != 1:
            raise ValueError("Eigenvalues must be a one-dimensional array")
        if np.any(np.diff(self.eigenvalues) < -CLUSTER_ABS_TOL):
            raise ValueError("Eigenvalues must be sorted ascending")
        if self.labels and len(self.labels) != self.eigenvalues.size:
            raise ValueError("One (degree, radial index) label per eigenvalue is required")

    def __len__(self) -> int:
        return int(self.eigenvalues.size)

    def __getitem__(self, j: int) -> float:
        return float(self.eigenvalues[j])

    @property
    def clusters(self) -> List[Tuple[int, ...]]:
        return cluster_indices(self.eigenvalues, self.cluster_gap)

    def multiplicity(self, j: int) -> int:
        for group in self.clusters:
            if j in group:
                return len(group)
        raise IndexError(f"Eigenvalue index {j} out of range (size {len(self)})")

"""
Steklov Limits

Steklov eigenvalues of the Laplacian as limits of Neumann eigenvalues with mass
concentrated at the boundary, computed by two independent solvers.

This package provides both a programmatic API and command-line interface for:
- Exact spectra on balls and annuli from Bessel characteristic equations
- P1 finite-element spectra on triangulated planar domains
- Derivatives, symmetric-function differentials and criticality under fixed mass

Usage:
    from steklov_limits import BallProblem, ConcentratedDensity, neumann_ball_spectrum

    problem = BallProblem(dimension=2, total_mass=2 * math.pi)
    spectrum = neumann_ball_spectrum(ConcentratedDensity(0.05, problem), count=6)

Command Line:
    python -m steklov_limits convergence --eps 0.1 0.05 0.025 --out conv.csv
"""

__version__ = "1.0.0"
__license__ = "MIT"

from .ball import (BallProblem, ConcentratedDensity, derivative_formula, derivative_numeric,
                   neumann_ball_spectrum, niwa_annulus_lambda1, steklov_ball_spectrum)
from .config import ExperimentConfig
from .fem import neumann_fem, solve_generalized, steklov_fem
from .mesh import Mesh, generate_disk_mesh
from .perturb import BoundaryFunction, ClusterPartition, symmetric_function
from .records import ResultRecord
from .utils import logger

__all__ = [
    "BallProblem",
    "ConcentratedDensity",
    "steklov_ball_spectrum",
    "neumann_ball_spectrum",
    "derivative_formula",
    "derivative_numeric",
    "niwa_annulus_lambda1",
    "Mesh",
    "generate_disk_mesh",
    "steklov_fem",
    "neumann_fem",
    "solve_generalized",
    "BoundaryFunction",
    "ClusterPartition",
    "symmetric_function",
    "ExperimentConfig",
    "ResultRecord",
    "logger",
]

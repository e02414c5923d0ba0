"""
Test suite for steklov-limits

Test Structure:
- test_specfun.py: Bessel functions against arbitrary-precision values
- test_ball.py: exact ball/annulus spectra, derivatives and the annulus sweep
- test_mesh.py: disk meshes, mesh files and symmetry relabeling
- test_fem.py: assembly, the generalized eigensolver and FEM spectra
- test_perturb.py: symmetric functions, differentials and criticality
- test_config.py: configuration files, flags and validation
- test_main.py: command-line runs, exit codes and result records
- fixtures/: reference values, a small mesh and sample config files

Test Categories:
- unit: single operations on small inputs
- integration: full solver pipelines and CLI runs
- slow: refinement studies and derivative extrapolation (deselect with -m "not slow")

Usage:
    # Run all tests
    ./run-tests.sh

    # Skip the long refinement studies
    pytest -m "not slow"
"""

import json
import math
import shutil
import sys
import tempfile
from pathlib import Path
from typing import Any, Dict

# Add project root to Python path for imports
project_root = Path(__file__).parent.parent
if str(project_root) not in sys.path:
    sys.path.insert(0, str(project_root))

# Test configuration constants
TEST_DATA_DIR = Path(__file__).parent / "fixtures"

DISK_MASS = 2.0 * math.pi
BALL3_MASS = 4.0 * math.pi
EPS_GRID = [0.1, 0.05, 0.025, 0.0125]
NIWA_GRID = [0.5, 0.45, 0.4, 0.35, 0.3, 0.25, 0.2, 0.15, 0.1, 0.05]

# Closed-form targets
DISK_DERIVATIVE = 11.0 / 12.0
BALL3_DERIVATIVE = 4.0 / 5.0
DISK_NEUMANN_FIRST = 1.8411837813406593 ** 2


class TestDataManager:
    """Utility class for fixture files and scratch directories."""

    @staticmethod
    def get_fixture_path(filename: str) -> Path:
        """Get path to a test fixture file."""
        return TEST_DATA_DIR / filename

    @staticmethod
    def load_json_fixture(filename: str) -> Dict[str, Any]:
        with open(TEST_DATA_DIR / filename, "r", encoding="utf-8") as f:
            return json.load(f)

    @staticmethod
    def create_temp_dir() -> Path:
        """Create a temporary directory for test outputs."""
        return Path(tempfile.mkdtemp(prefix="steklov-test-"))

    @staticmethod
    def remove_temp_dir(path: Path) -> None:
        shutil.rmtree(path, ignore_errors=True)

    @staticmethod
    def create_temp_file(directory: Path, name: str, content: str) -> Path:
        """Create a file with given content."""
        file_path = directory / name
        file_path.write_text(content, encoding="utf-8")
        return file_path


__all__ = [
    "TEST_DATA_DIR",
    "DISK_MASS",
    "BALL3_MASS",
    "EPS_GRID",
    "NIWA_GRID",
    "DISK_DERIVATIVE",
    "BALL3_DERIVATIVE",
    "DISK_NEUMANN_FIRST",
    "TestDataManager",
]

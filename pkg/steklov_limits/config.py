"""
Configuration management for the experiment drivers.

Handles defaults, environment variables, config files, command-line arguments,
and validation. Later sources win: defaults < environment < config file < flags.
"""

import os
import json
import argparse
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional

import yaml

from .utils import logger, validate_file_path

EXPERIMENTS = ("steklov", "convergence", "derivative", "criticality", "bandle-hersch", "niwa")
# Experiments that need the planar finite-element solver
PLANAR_EXPERIMENTS = ("criticality", "bandle-hersch", "niwa")
FORMATS = ("csv", "json")

DEFAULT_EPS_GRID = [0.1, 0.05, 0.025, 0.0125]
DEFAULT_NIWA_GRID = [0.5, 0.45, 0.4, 0.35, 0.3, 0.25, 0.2, 0.15, 0.1, 0.05]

LIST_KEYS = ("eps_grid", "indices", "orders")
# store_true flags; an unset switch must not override the config file
SWITCHES = ("include_timing", "verbose", "quiet")
KEY_ALIASES = {"eps": "eps_grid", "epsilon": "eps_grid", "n": "symmetry", "cluster": "clusters"}


class ConfigError(ValueError):
    """Raised for invalid experiment configurations (exit code 2)."""
    pass


@dataclass
class ExperimentConfig:
    """Settings for one experiment run."""

    experiment: str

    # Problem
    dimension: int = 2
    mass: Optional[float] = None  # None: unit boundary density, M = |dOmega|
    eps_grid: Optional[List[float]] = None
    lambda_max: Optional[float] = None

    # Discretisation
    refinement: int = 5
    mesh: Optional[str] = None
    fem_check: bool = True

    # Selection
    indices: Optional[List[int]] = None
    count: int = 6
    clusters: List[List[int]] = field(default_factory=lambda: [[1, 2]])
    orders: Optional[List[int]] = None

    # Densities and sampling
    amplitude: float = 0.3
    symmetry: int = 3
    trials: int = 20
    seed: Optional[int] = None

    # Output and execution
    out: Optional[str] = None
    format: str = "csv"
    jobs: int = 1
    include_timing: bool = False
    verbose: bool = False
    quiet: bool = False

    def __post_init__(self):
        """Fill experiment-specific defaults, then validate."""
        if self.eps_grid is None:
            self.eps_grid = list(DEFAULT_NIWA_GRID if self.experiment == "niwa" else DEFAULT_EPS_GRID)
        self.validate()

    def validate(self) -> None:
        """Validate configuration settings."""
        errors = []

        if self.experiment not in EXPERIMENTS:
            errors.append(f"Experiment must be one of {', '.join(EXPERIMENTS)}")
        if not isinstance(self.dimension, int) or self.dimension < 2:
            errors.append("Dimension must be an integer >= 2")
        elif self.dimension != 2 and self.experiment in PLANAR_EXPERIMENTS:
            errors.append(f"Experiment '{self.experiment}' is planar; dimension must be 2")
        if self.mass is not None and not self.mass > 0:
            errors.append("Mass must be positive")
        if self.lambda_max is not None and not self.lambda_max > 0:
            errors.append("lambda_max must be positive")

        # Grid validation
        grid = self.eps_grid or []
        if not grid:
            errors.append("Epsilon grid cannot be empty")
        elif any(not isinstance(e, (int, float)) or isinstance(e, bool) for e in grid):
            errors.append("Epsilon grid must contain numbers")
        else:
            if any(e <= 0 for e in grid):
                errors.append("Epsilon grid values must be positive")
            if any(b >= a for a, b in zip(grid, grid[1:])):
                errors.append("Epsilon grid must be strictly decreasing")
            if self.experiment == "niwa" and any(e >= 1 for e in grid):
                errors.append("Annulus widths must be below 1")
            if self.experiment in ("convergence", "derivative") and any(e >= 0.25 for e in grid):
                errors.append("Concentration widths must be below 0.25")
        if self.experiment == "derivative" and len(grid) < 3:
            errors.append("Derivative extrapolation needs at least 3 epsilon values")

        # Numeric validation
        if self.refinement < 1:
            errors.append("Refinement must be at least 1")
        if self.count < 1:
            errors.append("Count must be at least 1")
        if self.trials < 1:
            errors.append("Trials must be at least 1")
        if self.symmetry < 1:
            errors.append("Symmetry order must be at least 1")
        if self.jobs < 1:
            errors.append("Jobs must be at least 1")
        if not (0 <= self.amplitude < 1):
            errors.append("Perturbation amplitude must lie in [0, 1)")
        if self.indices is not None and (not self.indices or min(self.indices) < 0):
            errors.append("Indices must be a non-empty list of non-negative integers")
        if not self.clusters or any(not c or min(c) < 0 for c in self.clusters):
            errors.append("Clusters must be non-empty lists of non-negative indices")
        if self.orders is not None and (not self.orders or min(self.orders) < 1):
            errors.append("Orders h must be positive integers")

        # Randomness and output
        if self.experiment == "bandle-hersch" and self.seed is None:
            errors.append("A seed is required for bandle-hersch")
        if self.seed is not None and not (0 <= self.seed < 2 ** 64):
            errors.append("Seed must be an unsigned 64-bit integer")
        if self.format not in FORMATS:
            errors.append("Format must be 'csv' or 'json'")
        if self.mesh is not None and not Path(self.mesh).is_file():
            errors.append(f"Mesh file not found: {self.mesh}")

        if errors:
            raise ConfigError(f"Configuration validation failed: {'; '.join(errors)}")

    def echo(self) -> Dict[str, Any]:
        """Inputs that determine the results (no output or logging settings)."""
        skipped = {"out", "format", "jobs", "include_timing", "verbose", "quiet"}
        return {k: v for k, v in asdict(self).items() if k not in skipped}

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "ExperimentConfig":
        """Create an ExperimentConfig from parsed arguments, a config file and the environment."""
        values: Dict[str, Any] = {}
        if os.getenv("STEKLOV_JOBS"):
            values["jobs"] = _env_int("STEKLOV_JOBS")
        if getattr(args, "config", None):
            values.update(load_config_file(args.config))

        for name in _field_names():
            flag = getattr(args, name, None)
            if flag is None or (flag is False and name in SWITCHES):
                continue
            values[name] = flag
        values["experiment"] = args.experiment
        return cls.from_dict(values)

    @classmethod
    def from_dict(cls, values: Dict[str, Any]) -> "ExperimentConfig":
        unknown = sorted(set(values) - set(_field_names()))
        if unknown:
            raise ConfigError(f"Unknown configuration key(s): {', '.join(unknown)}")
        try:
            return cls(**values)
        except TypeError as e:
            raise ConfigError(f"Configuration validation failed: {e}")


def _field_names() -> List[str]:
    return [f.name for f in fields(ExperimentConfig)]


def _env_int(name: str) -> int:
    try:
        return int(os.environ[name])
    except ValueError:
        raise ConfigError(f"Environment variable {name} must be an integer")


def _normalise_key(key: str) -> str:
    key = key.strip().lower().replace("-", "_")
    return KEY_ALIASES.get(key, key)


def _parse_scalar(text: str) -> Any:
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError:
        return text


def _parse_flat_value(key: str, text: str) -> Any:
    text = text.strip()
    if key in LIST_KEYS:
        return [_parse_scalar(item) for item in text.replace(",", " ").split()]
    if key == "clusters":
        return [[int(item) for item in group.replace(",", " ").split()]
                for group in text.split(";") if group.strip()]
    return _parse_scalar(text)


def parse_flat_config(text: str, source: str = "<config>") -> Dict[str, Any]:
    """
    Parse the flat ``key = value`` format.

    Lines starting with ``#`` are comments. List keys take comma or space separated
    values; ``clusters`` separates clusters with ``;`` (e.g. ``clusters = 1,2; 3,4``).
    """
    values: Dict[str, Any] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{line_no}: expected 'key = value', got '{raw.strip()}'")
        key, value = line.split("=", 1)
        key = _normalise_key(key)
        try:
            values[key] = _parse_flat_value(key, value)
        except ValueError:
            raise ConfigError(f"{source}:{line_no}: cannot parse value for '{key}'")
    return values


def load_config_file(path: str) -> Dict[str, Any]:
    """Load a YAML, JSON or flat key = value config file, chosen by suffix."""
    try:
        config_path = validate_file_path(path)
    except (FileNotFoundError, PermissionError, ValueError) as e:
        raise ConfigError(str(e))

    text = config_path.read_text(encoding="utf-8")
    suffix = config_path.suffix.lower()
    try:
        if suffix in (".yaml", ".yml"):
            data = yaml.safe_load(text) or {}
        elif suffix == ".json":
            data = json.loads(text)
        else:
            data = parse_flat_config(text, str(config_path))
    except (yaml.YAMLError, json.JSONDecodeError) as e:
        raise ConfigError(f"Failed to parse config file {config_path}: {e}")

    if not isinstance(data, dict):
        raise ConfigError(f"Config file {config_path} must contain a mapping")
    logger.debug(f"Loaded {len(data)} setting(s) from {config_path}")
    return {_normalise_key(k): v for k, v in data.items()}


def _add_global_arguments(parser: argparse.ArgumentParser, default: Any = None) -> None:
    """Options accepted both before and after the experiment name."""
    group = parser.add_argument_group("Global")
    group.add_argument("--config", default=default,
                       help="Config file (.yaml, .json or flat key = value)")
    group.add_argument("--out", default=default, help="Output file (default: standard output)")
    group.add_argument("--format", choices=FORMATS, default=default,
                       help="Output format (default: csv)")
    group.add_argument("--seed", type=int, default=default, help="Random seed (unsigned 64-bit)")
    group.add_argument("--jobs", type=int, default=default,
                       help="Worker threads for sweeps (or set STEKLOV_JOBS)")


def _add_common_arguments(parser: argparse.ArgumentParser) -> None:
    # a flag given after the experiment name overrides the same flag given before it
    _add_global_arguments(parser, default=argparse.SUPPRESS)

    io_group = parser.add_argument_group("Input/Output")
    io_group.add_argument("--include-timing", action="store_true",
                          help="Write wall-clock time into the outputs")
    io_group.add_argument("--mesh", help="Mesh file in the plain-text v/t/b format")

    run_group = parser.add_argument_group("Execution")
    run_group.add_argument("--verbose", "-v", action="store_true", help="Enable debug output")
    run_group.add_argument("--quiet", "-q", action="store_true", help="Only warnings and errors")

    problem_group = parser.add_argument_group("Problem")
    problem_group.add_argument("--dimension", type=int, help="Space dimension N (default: 2)")
    problem_group.add_argument("--mass", type=float, help="Total mass M (default: |dOmega|)")
    problem_group.add_argument("--eps", dest="eps_grid", type=float, nargs="+",
                               help="Strictly decreasing epsilon grid")
    problem_group.add_argument("--lambda-max", type=float, help="Upper end of the eigenvalue scan")
    problem_group.add_argument("--refinement", type=int, help="Disk mesh refinement level (default: 5)")
    problem_group.add_argument("--count", type=int, help="Number of eigenvalues (default: 6)")
    problem_group.add_argument("--indices", type=int, nargs="+", help="Eigenvalue indices j")


def create_parser() -> argparse.ArgumentParser:
    """Create command-line argument parser."""
    parser = argparse.ArgumentParser(
        prog="steklov-limits",
        description="Steklov eigenvalues as limits of mass-concentrated Neumann eigenvalues",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Closed-form and finite-element Steklov spectra of the disk
  steklov-limits steklov --count 5

  # Convergence of the concentrated Neumann eigenvalues, written as JSON
  steklov-limits convergence --eps 0.1 0.05 0.025 0.0125 --out conv.json --format json

  # Derivative at eps = 0 in the 3-ball
  steklov-limits derivative --dimension 3 --indices 1 2 3

  # Randomised maximality check with 20 threefold symmetric densities
  steklov-limits --seed 7 --jobs 4 bandle-hersch --symmetry 3 --trials 20

Environment Variables:
  STEKLOV_JOBS       - default worker threads
  STEKLOV_LOG_LEVEL  - DEBUG, INFO, WARNING or ERROR

Exit codes: 0 success, 1 numerical failure, 2 configuration error.
        """
    )
    _add_global_arguments(parser)
    subparsers = parser.add_subparsers(dest="experiment", metavar="EXPERIMENT", required=True)

    helps = {
        "steklov": "Closed-form and FEM Steklov spectra side by side",
        "convergence": "lambda_j(eps) against the Steklov limit over the epsilon grid",
        "derivative": "Extrapolated slope at eps = 0 against the closed form",
        "criticality": "Criticality profiles of symmetric functions under fixed mass",
        "bandle-hersch": "Randomised maximality of the constant density among n-fold symmetric ones",
        "niwa": "First Neumann eigenvalue of thin planar annuli",
    }
    for name in EXPERIMENTS:
        sub = subparsers.add_parser(name, help=helps[name], description=helps[name])
        _add_common_arguments(sub)
        if name == "convergence":
            sub.add_argument("--no-fem-check", dest="fem_check", action="store_const", const=False,
                             default=None, help="Skip the finite-element cross-check")
        if name == "criticality":
            sub.add_argument("--cluster", dest="clusters", type=int, nargs="+", action="append",
                             help="Index set F (repeatable)")
            sub.add_argument("--orders", type=int, nargs="+", help="Orders h (default: 1..|F|)")
            sub.add_argument("--amplitude", type=float, help="Perturbed density 1 + a cos(theta)")
        if name == "bandle-hersch":
            sub.add_argument("--symmetry", type=int, help="Rotational symmetry order n (default: 3)")
            sub.add_argument("--trials", type=int, help="Number of sampled densities (default: 20)")

    return parser


def parse_args(args: Optional[List[str]] = None) -> argparse.Namespace:
    """Parse command-line arguments."""
    parser = create_parser()
    parsed_args = parser.parse_args(args)

    # Handle verbose logging
    if parsed_args.verbose:
        logger.setLevel("DEBUG")
        logger.debug("Verbose logging enabled")
    elif parsed_args.quiet:
        logger.setLevel("WARNING")

    return parsed_args

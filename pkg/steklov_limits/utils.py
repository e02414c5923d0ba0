"""
Utility functions and classes shared by the Steklov toolkit.
"""

import os
import sys
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Callable, Iterable, List, TypeVar, Union

import numpy as np

T = TypeVar("T")
R = TypeVar("R")


class SteklovError(Exception):
    """Base exception for the toolkit."""
    pass


class NumericalError(SteklovError):
    """Raised when a root bracket, solve or extrapolation cannot be completed."""
    pass


class ColoredFormatter(logging.Formatter):
    """Custom formatter with colors for different log levels."""

    COLORS = {
        'DEBUG': '\033[36m',      # Cyan
        'INFO': '\033[32m',       # Green
        'WARNING': '\033[33m',    # Yellow
        'ERROR': '\033[31m',      # Red
        'CRITICAL': '\033[35m',   # Magenta
    }
    RESET = '\033[0m'

    def format(self, record):
        if hasattr(record, 'levelname') and record.levelname in self.COLORS:
            record.levelname = f"{self.COLORS[record.levelname]}{record.levelname}{self.RESET}"
        return super().format(record)


def setup_logger(name: str = "steklov_limits", level: str = "INFO") -> logging.Logger:
    """Set up a logger writing to stderr, coloured on a terminal."""
    logger = logging.getLogger(name)

    # Only add handler if logger doesn't already have one
    if not logger.handlers:
        # stdout is reserved for result tables
        handler = logging.StreamHandler(sys.stderr)

        if sys.stderr.isatty():
            formatter = ColoredFormatter(
                '%(asctime)s | %(levelname)s | %(message)s',
                datefmt='%H:%M:%S'
            )
        else:
            formatter = logging.Formatter(
                '%(asctime)s | %(levelname)s | %(message)s',
                datefmt='%H:%M:%S'
            )

        handler.setFormatter(formatter)
        logger.addHandler(handler)

    logger.setLevel(getattr(logging, level.upper(), logging.INFO))
    return logger


# Global logger instance
logger = setup_logger(level=os.getenv("STEKLOV_LOG_LEVEL", "INFO"))


def run_ordered(func: Callable[[T], R], items: Iterable[T], jobs: int = 1) -> List[R]:
    """
    Apply ``func`` to every item, concurrently when ``jobs > 1``.

    Results come back in input order regardless of completion order, so sweeps
    stay deterministic.

    Args:
        func: Callable applied to each item
        items: Inputs
        jobs: Worker threads (values below 2 run inline)

    Returns:
        List of results aligned with ``items``
    """
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [func(item) for item in items]

    workers = min(jobs, len(items))
    logger.debug(f"Running {len(items)} tasks on {workers} worker threads")
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))


def validate_file_path(file_path: Union[str, Path]) -> Path:
    """
    Validate that a file path exists and is readable.

    Args:
        file_path: Path to validate

    Returns:
        Path object if valid

    Raises:
        FileNotFoundError: If file doesn't exist
        PermissionError: If file isn't readable
        ValueError: If path is not a file
    """
    path = Path(file_path)

    if not path.exists():
        raise FileNotFoundError(f"File not found: {path}")

    if not path.is_file():
        raise ValueError(f"Path is not a file: {path}")

    if not os.access(path, os.R_OK):
        raise PermissionError(f"File is not readable: {path}")

    return path


def _json_default(value: Any) -> Any:
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def safe_json_dump(data: Any, indent: int = 2) -> str:
    """
    Safely serialize data to JSON string.

    Numpy scalars and arrays are converted to plain Python values and keys are
    sorted so that identical inputs always give identical text.

    Args:
        data: Data to serialize
        indent: JSON indentation

    Returns:
        JSON string
    """
    try:
        return json.dumps(data, indent=indent, ensure_ascii=False, sort_keys=True,
                          default=_json_default)
    except TypeError as e:
        logger.error(f"Failed to serialize data to JSON: {e}")
        raise


def relative_gap(a: float, b: float, abs_floor: float = 0.0) -> float:
    """|a - b| relative to the larger magnitude, with an absolute floor on the scale."""
    scale = max(abs(a), abs(b), abs_floor)
    if scale == 0.0:
        return 0.0
    return abs(a - b) / scale

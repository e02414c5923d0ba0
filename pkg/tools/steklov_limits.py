#!/usr/bin/env python3
"""
Standalone steklov-limits runner.

Runs the experiment drivers straight from a source checkout, without installing
the package. Accepts the same arguments as the ``steklov-limits`` command.
"""

import sys
from pathlib import Path

# Add the parent directory to Python path so we can import the package
sys.path.insert(0, str(Path(__file__).parent.parent))

REQUIRED_PACKAGES = {
    "numpy": "numpy",
    "scipy": "scipy",
    "pandas": "pandas",
    "yaml": "PyYAML",
    "jsonschema": "jsonschema",
}


def check_requirements() -> bool:
    """Report missing third-party packages instead of failing on import."""
    missing = []
    for module, package in REQUIRED_PACKAGES.items():
        try:
            __import__(module)
        except ImportError:
            missing.append(package)
    if missing:
        print(f"Missing required package(s): {', '.join(missing)}", file=sys.stderr)
        print(f"Install with: pip install {' '.join(missing)}", file=sys.stderr)
        return False
    return True


if __name__ == "__main__":
    if not check_requirements():
        sys.exit(1)

    from steklov_limits.main import run_cli

    sys.exit(run_cli(sys.argv[1:]))

"""
Main module for the steklov-limits command-line interface.
"""

import sys
from typing import List, Optional

from .config import ConfigError, ExperimentConfig, parse_args
from .experiments import run_experiment
from .mesh import MeshError
from .perturb import SamplerError
from .records import RecordValidationError
from .utils import NumericalError, logger

EXIT_OK = 0
EXIT_NUMERICAL = 1
EXIT_CONFIG = 2


def run_cli(argv: Optional[List[str]] = None) -> int:
    """
    Run the command-line interface and return the process exit code.

    0 success, 1 numerical failure, 2 configuration error.
    """
    config = None
    try:
        try:
            args = parse_args(argv)
        except SystemExit as e:
            # argparse exits with 2 on usage errors and 0 for --help
            return int(e.code or 0)

        config = ExperimentConfig.from_args(args)
        if config.verbose:
            logger.setLevel("DEBUG")
        elif config.quiet:
            logger.setLevel("WARNING")

        record = run_experiment(config)

        if config.out:
            record.write(config.out, config.format, config.include_timing)
        else:
            sys.stdout.write(record.render(config.format, config.include_timing))
            sys.stdout.flush()
        return EXIT_OK

    except (ConfigError, MeshError, SamplerError) as e:
        logger.error(f"[ERROR] {e}")
        return EXIT_CONFIG
    except NumericalError as e:
        logger.error(f"[ERROR] Numerical failure: {e}")
        return EXIT_NUMERICAL
    except KeyboardInterrupt:
        logger.info("Operation cancelled by user")
        return EXIT_NUMERICAL
    except RecordValidationError as e:
        logger.error(f"[ERROR] {e}")
        return EXIT_NUMERICAL
    except Exception as e:
        logger.error(f"Fatal error: {str(e)}")
        if config is not None and config.verbose:
            import traceback
            logger.error("Full traceback:")
            logger.error(traceback.format_exc())
        return EXIT_NUMERICAL


def main():
    """
    Main entry point for the package.

    Can be called as:
    - python -m steklov_limits
    - steklov-limits (if installed)
    """
    sys.exit(run_cli())


if __name__ == "__main__":
    main()

import logging
import sys
import time
from typing import Optional, Sequence

from ..common.config import EXIT_CODES, LOG_FORMAT, LOG_LEVEL
from ..common.errors import InertialDriftError, InvalidReportError
from .commands import create_command
from .config_parser import parse_config
from .output import prepare_output_dir, write_outputs

logger = logging.getLogger("InertialDrift")


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Parse, dispatch and write the artifacts of one invocation.

    Returns:
        int: 0 when every verdict check passes, 2 when some check fails.

    Raises:
        InertialDriftError: On invalid input or numerical failure.
        InvalidReportError: When too many trajectories were flagged.
    """
    config = parse_config(argv)
    command = create_command(config)
    echo = config.to_dict()
    report = command.new_report()
    directory = prepare_output_dir(config.output_dir, report.config_hash, config.force)
    logger.info(f"Running {config.command} (config hash {report.config_hash[:12]})")

    start = time.perf_counter()
    report = command.run()
    report.wall_seconds = time.perf_counter() - start
    write_outputs(report, directory, echo)
    logger.info(f"Finished {config.command} in {report.wall_seconds:.2f}s: verdict {report.verdict}")

    if not report.valid:
        raise InvalidReportError(
            f"{report.flagged_fraction:.2%} of trajectories were flagged; results in {directory} are invalid"
        )
    for name, ok in report.checks.items():
        if not ok:
            logger.warning(f"Check failed: {name}")
    return EXIT_CODES["pass"] if report.passed else EXIT_CODES["verdict_fail"]


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Entry point with the global error handler."""
    logging.basicConfig(level=LOG_LEVEL, format=LOG_FORMAT)
    try:
        return run(argv)
    except InertialDriftError as e:
        logger.error(f"{type(e).__name__}: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CODES["error"]
    except KeyboardInterrupt:
        logger.info("Run stopped by user")
        return EXIT_CODES["error"]
    except Exception as e:
        logger.error(f"Unhandled error: {e}")
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_CODES["error"]


if __name__ == "__main__":
    sys.exit(main())

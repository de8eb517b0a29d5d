"""
Periodic drift estimation - command-line entry point.

Wires the subcommands, configures logging and maps failures to exit codes:
0 on success, 2 on validation errors, 3 on numerical failures. Errors are
logged and printed to stderr as a JSON error document.
"""

import argparse
import sys
from typing import List, Optional

from pydantic import ValidationError

from app.cli.commands import fit, simulate, summarize
from app.core.config import get_settings
from app.core.logging import configure_logging, get_logger
from app.models.errors import DriftEstimationError, ErrorDetail, ErrorKind, ErrorsResponse, ExitCode

logger = get_logger(__name__)


def create_parser() -> argparse.ArgumentParser:
    """Create the argument parser with all subcommands."""
    parser = argparse.ArgumentParser(
        prog="drift-rj",
        description="Nonparametric Bayesian estimation of a periodic drift by reversible-jump MCMC.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    simulate.register(subparsers)
    fit.register(subparsers)
    summarize.register(subparsers)
    return parser


def _emit(response: ErrorsResponse) -> None:
    print(response.model_dump_json(exclude_none=True), file=sys.stderr)


def _validation_response(error: ValidationError) -> ErrorsResponse:
    details = [
        ErrorDetail(
            kind=ErrorKind.INVALID_ARGUMENT,
            message=item.get("msg", "invalid value"),
            parameters=[".".join(str(part) for part in item.get("loc", ()))] or None,
            reason=item.get("type"),
        )
        for item in error.errors()
    ]
    return ErrorsResponse(errors=details)


def main(argv: Optional[List[str]] = None) -> int:
    """
    Run one command.

    Args:
        argv: Arguments without the program name (defaults to sys.argv[1:])

    Returns:
        Process exit code
    """
    args = create_parser().parse_args(argv)
    settings = get_settings()
    configure_logging(settings)

    try:
        code: int = args.handler(args, settings)
        return code
    except DriftEstimationError as e:
        logger.error("Command failed", command=args.command, kind=e.kind, error=e.message)
        _emit(e.to_response())
        return e.exit_code
    except ValidationError as e:
        logger.error("Invalid configuration", command=args.command, errors=e.error_count())
        _emit(_validation_response(e))
        return ExitCode.VALIDATION
    except OSError as e:
        logger.error("I/O failure", command=args.command, error=str(e))
        _emit(
            ErrorsResponse(
                errors=[
                    ErrorDetail(
                        kind=ErrorKind.INVALID_ARGUMENT,
                        message=str(e),
                        parameters=[str(e.filename)] if e.filename else None,
                    )
                ]
            )
        )
        return ExitCode.VALIDATION


if __name__ == "__main__":
    sys.exit(main())

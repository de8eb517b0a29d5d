"""
``summarize``: merge several run outputs into one long-format CSV.
"""

import argparse

from app.cli.deps import default_label
from app.core.config import Settings
from app.core.logging import get_logger
from app.models.errors import ExitCode, InvalidArgumentError
from app.repositories.artifacts import merge_long

logger = get_logger(__name__)


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser(
        "summarize",
        help="Merge run outputs keyed by run label",
        description="Stack summary or chain CSVs of several runs with a label column.",
    )
    parser.add_argument("inputs", nargs="+", help="summary.csv or chain.csv files sharing one header")
    parser.add_argument("--out", required=True, help="Output CSV file")
    parser.add_argument("--labels", nargs="+", default=None, help="Labels, one per input")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace, settings: Settings) -> int:
    """Label each input (parent directory name unless overridden) and merge."""
    if args.labels is not None and len(args.labels) != len(args.inputs):
        raise InvalidArgumentError(
            ["labels"], f"got {len(args.labels)} labels for {len(args.inputs)} inputs"
        )
    labels = args.labels or [default_label(source) for source in args.inputs]
    logger.debug("Resolved run labels", labels=labels, inputs=args.inputs)
    merge_long(list(zip(labels, args.inputs)), args.out, provenance={"runs": len(labels)})
    return ExitCode.OK

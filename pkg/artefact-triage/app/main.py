# © 2025 artefact-triage contributors. Licensed under the MIT License; see LICENSE.md.

"""artefact-triage command-line entry point.

Exit codes: 0 success, 1 usage error, 2 unreadable or malformed input,
3 data that cannot be trained on or evaluated.
"""

import argparse
import logging
import sys
from typing import List, Optional

from dotenv import load_dotenv
from pydantic import ValidationError

# Load environment variables
load_dotenv()

from app import __version__
from app.commands import COMMANDS
from app.config import log_level
from app.errors import TriageError

logger = logging.getLogger(__name__)

EXIT_USAGE = 1
EXIT_IO = 2


class TriageArgumentParser(argparse.ArgumentParser):
    """Reports usage errors with exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = TriageArgumentParser(
        prog="artefact-triage",
        description="Rank file artefacts of a super timeline by learned relevancy",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", metavar="<command>", required=True)
    for command in COMMANDS:
        command.register(subparsers)
    return parser


def configure_logging(args: argparse.Namespace) -> None:
    level = log_level()
    if getattr(args, "verbose", False):
        level = "DEBUG"
    elif getattr(args, "quiet", False):
        level = "WARNING"
    # Configure logging
    logging.basicConfig(
        level=level,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        stream=sys.stderr,
    )
    logging.getLogger().setLevel(level)


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE
    configure_logging(args)

    try:
        return args.handler(args) or 0
    except TriageError as e:
        logger.error(f"❌ {e}", exc_info=args.verbose)
        return e.exit_code
    except (OSError, ValidationError) as e:
        logger.error(f"❌ {e}", exc_info=args.verbose)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())

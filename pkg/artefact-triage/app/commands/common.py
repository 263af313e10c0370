# © 2025 artefact-triage contributors. Licensed under the MIT License; see LICENSE.md.

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Optional

from app.config import load_run_settings, output_dir
from app.errors import MissingArgument
from app.schemas import ParsePolicy, RunSettings


def common_options() -> argparse.ArgumentParser:
    """Flags every subcommand accepts."""
    parser = argparse.ArgumentParser(add_help=False)
    parser.add_argument("--config", type=Path, help="JSON pipeline config; flags win over its values")
    parser.add_argument("--seed", type=int, help="Top-level random seed")
    parser.add_argument("--strict", action="store_true", default=None, help="Abort on the first malformed timeline row")
    parser.add_argument("--out", type=Path, help="Output directory (default: $TRIAGE_OUTPUT_DIR or ./triage-out)")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("--verbose", "-v", action="store_true", help="Debug logging and tracebacks")
    verbosity.add_argument("--quiet", "-q", action="store_true", help="Warnings and errors only")
    return parser


def run_settings(args: argparse.Namespace, **overrides) -> RunSettings:
    """The --config file with this subcommand's flags laid over it."""
    return load_run_settings(args.config, {"seed": args.seed, "strict": args.strict, **overrides})


def require(value: Optional[Path], what: str) -> Path:
    if value is None:
        raise MissingArgument(f"No {what} given on the command line or in the config")
    return value


def parse_policy(settings: RunSettings) -> ParsePolicy:
    return ParsePolicy.STRICT if settings.strict else ParsePolicy.LENIENT


def wants_output(args: argparse.Namespace, settings: RunSettings) -> bool:
    return args.out is not None or settings.output_dir is not None


def out_dir(args: argparse.Namespace, settings: Optional[RunSettings] = None) -> Path:
    path = output_dir(args.out or (settings.output_dir if settings else None))
    path.mkdir(parents=True, exist_ok=True)
    return path


def print_json(payload: Any, path: Optional[Path] = None) -> None:
    text = json.dumps(payload, indent=2) + "\n"
    sys.stdout.write(text)
    if path is not None:
        path.write_text(text, encoding="utf-8")

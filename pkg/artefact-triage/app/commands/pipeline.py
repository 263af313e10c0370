# © 2025 artefact-triage contributors. Licensed under the MIT License; see LICENSE.md.

"""`pipeline`: the full triage run from a JSON config plus flag overrides."""

import argparse
import logging

from app.commands.common import common_options, print_json
from app.config import load_pipeline_config
from app.schemas import LossKind
from app.services.pipeline import run_pipeline

logger = logging.getLogger(__name__)


def config_overrides(args: argparse.Namespace) -> dict:
    """Flag values that replace config file values; unset flags are None and ignored."""
    return {
        "timeline": args.timeline,
        "catalog": args.catalog,
        "catalog_db": args.catalog_db,
        "manifest": args.manifest,
        "artefacts": args.artefacts,
        "truth": args.truth,
        "seed": args.seed,
        "strict": args.strict,
        "fractions": args.fractions,
        "features": {"keywords": args.keywords, "top_k": args.top_k, "select_k": args.select_k},
        "model": {"loss_kind": args.loss},
    }


def run(args: argparse.Namespace) -> int:
    config = load_pipeline_config(args.config, config_overrides(args))
    result = run_pipeline(config, out_dir=args.out)
    benign, pertinent, unknown = result.partition.sizes
    print_json({
        "known_benign": benign,
        "known_pertinent": pertinent,
        "unknown": unknown,
        "features": len(result.schema),
        "report": str(result.outputs["report"]),
        "recall": result.report.recall,
    })
    return 0


def register(subparsers) -> None:
    parser = subparsers.add_parser("pipeline", parents=[common_options()], help="Run the full triage pipeline")
    parser.add_argument("--timeline", help="l2tcsv super timeline")
    parser.add_argument("--catalog", help="Known-hash catalog file")
    parser.add_argument("--catalog-db", help="SQLAlchemy URL of a persistent catalog")
    parser.add_argument("--manifest", help="Artefact manifest: <path> TAB <digest>")
    parser.add_argument("--artefacts", help="Artefact list with aliases")
    parser.add_argument("--truth", help="Labelled manifest used for recall")
    parser.add_argument("--keywords", nargs="+", help="Case keywords")
    parser.add_argument("--top-k", type=int, help="Event types and sources counted")
    parser.add_argument("--select-k", type=int, help="Keep this many features after selection")
    parser.add_argument("--loss", choices=[k.value for k in LossKind])
    parser.add_argument("--fractions", type=float, nargs="+", help="Review fractions for recall")
    parser.set_defaults(handler=run)

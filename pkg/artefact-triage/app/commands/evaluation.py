# © 2025 artefact-triage contributors. Licensed under the MIT License; see LICENSE.md.

"""`rank` and `eval`: ranked reports and recall by review fraction."""

import argparse
import logging
import sys

import pandas as pd

from app.commands.common import common_options, out_dir, require, run_settings, wants_output
from app.config import report_timestamp
from app.errors import InvalidConfig
from app.schemas import ArtefactId, Label
from app.services.hash_catalog import read_manifest
from app.services.ranking_eval import format_report_table, load_report, rank, with_recall, write_report

logger = logging.getLogger(__name__)


def ranked_truth(path, report) -> list:
    """Pertinent manifest artefacts present in the report; known ones were never ranked."""
    ranked = {item.path.lower() for item in report.items}
    pertinent = [e.artefact for e in read_manifest(path) if e.label is Label.PERTINENT]
    truth = [a for a in pertinent if a.canonical_path.lower() in ranked]
    if len(truth) < len(pertinent):
        logger.info(f"📊 {len(pertinent) - len(truth)} pertinent artefacts are not in the ranking and are left out of recall")
    return truth


def run_rank(args: argparse.Namespace) -> int:
    settings = run_settings(args, truth=args.truth, fractions=args.fractions)
    frame = pd.read_csv(args.scores, dtype={"artefact": str}, keep_default_na=False)
    if not {"artefact", "score"} <= set(frame.columns):
        raise InvalidConfig(f"{args.scores} needs artefact and score columns")
    probabilities = frame["probability"] if "probability" in frame.columns else [None] * len(frame)
    scored = [
        (ArtefactId.from_path(path), float(value), float(p) if p not in (None, "") else None)
        for path, value, p in zip(frame["artefact"], frame["score"], probabilities)
    ]
    report = rank(scored, generated_at=report_timestamp())
    if settings.truth:
        report = with_recall(report, ranked_truth(settings.truth, report), settings.fractions)
    write_report(report, out_dir(args, settings))
    sys.stdout.write(format_report_table(report))
    return 0


def run_eval(args: argparse.Namespace) -> int:
    settings = run_settings(args, truth=args.truth, fractions=args.fractions)
    truth = require(settings.truth, "ground-truth manifest")
    report = load_report(args.report)
    report = with_recall(report, ranked_truth(truth, report), settings.fractions)
    if wants_output(args, settings):
        write_report(report, out_dir(args, settings))
    sys.stdout.write(format_report_table(report.model_copy(update={"items": ()})))
    return 0


def register(subparsers) -> None:
    common = common_options()

    parser = subparsers.add_parser("rank", parents=[common], help="Order scored artefacts into a report")
    parser.add_argument("--scores", required=True, help="csv with artefact, score[, probability] columns")
    parser.add_argument("--truth", help="Labelled manifest; adds recall for its pertinent artefacts that were ranked")
    parser.add_argument("--fractions", type=float, nargs="+", help="Review fractions (default 0.1 0.2 0.3 0.5 1.0)")
    parser.set_defaults(handler=run_rank)

    parser = subparsers.add_parser("eval", parents=[common], help="Recall of a ranked report against ground truth")
    parser.add_argument("--report", required=True, help="report.json")
    parser.add_argument("--truth", help="Labelled manifest (default: the config's truth)")
    parser.add_argument("--fractions", type=float, nargs="+", help="Review fractions (default 0.1 0.2 0.3 0.5 1.0)")
    parser.set_defaults(handler=run_eval)

# © 2025 artefact-triage contributors. Licensed under the MIT License; see LICENSE.md.

"""`summarize` and `extract`: super timeline and file artefact timelines."""

import argparse
import logging

from app.commands.common import common_options, out_dir, parse_policy, print_json, require, run_settings, wants_output
from app.services.artefact_index import build_index, read_artefact_list, verify_index, write_artefact_timelines
from app.services.timeline_store import read_timeline, summarize, value_counts

logger = logging.getLogger(__name__)


def run_summarize(args: argparse.Namespace) -> int:
    settings = run_settings(args, timeline=args.timeline)
    timeline = read_timeline(require(settings.timeline, "timeline"), policy=parse_policy(settings))
    if args.field:
        print_json(value_counts(timeline, args.field))
        return 0
    summary = summarize(timeline).model_dump(mode="json")
    summary["skipped_rows"] = timeline.skipped_count
    print_json(summary, out_dir(args, settings) / "summary.json" if wants_output(args, settings) else None)
    logger.info(f"📊 {summary['event_count']} events, {summary['distinct_filename_count']} distinct filenames")
    return 0


def run_extract(args: argparse.Namespace) -> int:
    settings = run_settings(args, timeline=args.timeline, artefacts=args.artefacts)
    timeline = read_timeline(require(settings.timeline, "timeline"), policy=parse_policy(settings))
    index = build_index(timeline, read_artefact_list(require(settings.artefacts, "artefact list")))
    if args.verify:
        problems = verify_index(index, timeline)
        for problem in problems:
            logger.error(f"❌ {problem}")
        if problems:
            return 3
    written = write_artefact_timelines(index, timeline, out_dir(args, settings))
    print_json({path: str(file) for path, file in written.items()})
    return 0


def register(subparsers) -> None:
    common = common_options()

    parser = subparsers.add_parser("summarize", parents=[common], help="Summarize an l2tcsv super timeline")
    parser.add_argument("timeline", nargs="?", help="l2tcsv file (default: the config's timeline)")
    parser.add_argument("--field", help="Print the value counts of one column instead")
    parser.set_defaults(handler=run_summarize)

    parser = subparsers.add_parser("extract", parents=[common], help="Write one csv timeline per file artefact")
    parser.add_argument("timeline", nargs="?", help="l2tcsv file (default: the config's timeline)")
    parser.add_argument("--artefacts", help="Artefact list, one path (plus tab-separated aliases) per line")
    parser.add_argument("--verify", action="store_true", help="Re-scan every attributed event before writing")
    parser.set_defaults(handler=run_extract)

# © 2025 artefact-triage contributors. Licensed under the MIT License; see LICENSE.md.

"""`catalog`: load and validate known-hash catalogs, classify digests, partition manifests."""

import argparse
import logging

from app.commands.common import common_options, print_json, run_settings
from app.config import catalog_db_url
from app.database.database import get_session
from app.errors import InvalidConfig
from app.services.hash_catalog import (classify, import_catalog, load_catalog_from_db, manifest_pairs, partition,
                                       read_catalog, read_manifest)

logger = logging.getLogger(__name__)


def run_catalog(args: argparse.Namespace) -> int:
    settings = run_settings(args, catalog=args.catalog, catalog_db=args.db, manifest=args.manifest)
    if args.import_ and not (settings.catalog and settings.catalog_db):
        raise InvalidConfig("--import needs both --catalog and --db")

    if settings.catalog:
        catalog = read_catalog(settings.catalog)
        if args.import_:
            with get_session(catalog_db_url(settings.catalog_db)) as session:
                import_catalog(catalog, session)
    else:
        with get_session(catalog_db_url(settings.catalog_db)) as session:
            catalog = load_catalog_from_db(session)

    result = {"records": len(catalog), "by_label": catalog.counts()}
    if args.digest:
        result["classification"] = {digest: classify(catalog, digest).value for digest in args.digest}
    if settings.manifest:
        split = partition(catalog, manifest_pairs(read_manifest(settings.manifest)))
        result["partition"] = dict(zip(("known_benign", "known_pertinent", "unknown"), split.sizes))
    print_json(result)
    return 0


def register(subparsers) -> None:
    parser = subparsers.add_parser("catalog", parents=[common_options()], help="Inspect or import a known-hash catalog")
    parser.add_argument("--catalog", help="Text catalog: <digest> TAB <benign|pertinent> [TAB <note>]")
    parser.add_argument("--db", help="SQLAlchemy URL of the persistent catalog (default: $TRIAGE_CATALOG_DB)")
    parser.add_argument("--import", dest="import_", action="store_true", help="Store the text catalog in --db")
    parser.add_argument("--digest", action="append", help="Classify a digest (repeatable)")
    parser.add_argument("--manifest", help="Partition a manifest of <path> TAB <digest> lines")
    parser.set_defaults(handler=run_catalog)

# © 2025 artefact-triage contributors. Licensed under the MIT License; see LICENSE.md.

"""Known-file hash catalog and the known/unknown partition of a case.

Catalog lines are ``<digest><TAB><benign|pertinent>[<TAB><note>]``; SHA-1
(40 hex) and SHA-256 (64 hex) digests may be mixed. Manifest lines are
``<path><TAB><digest>``, optionally followed by a label and comma-separated
tags as written by the scenario generator.
"""

import logging
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, TextIO, Tuple, Union

from pydantic import ValidationError
from sqlalchemy.orm import Session

from app.errors import DuplicateConflictingDigest, InvalidDigest, MalformedLine
from app.models.models import HashRecordRow
from app.schemas import (ArtefactId, Classification, DIGEST_ALGORITHMS, HEX_DIGITS, HashRecord, Label,
                         LabeledPartition, ManifestEntry)

logger = logging.getLogger(__name__)


def normalize_digest(digest: str, context: str = "") -> str:
    """Lowercased digest; raises InvalidDigest unless it is 40 or 64 hex characters."""
    value = digest.strip().lower()
    if len(value) not in DIGEST_ALGORITHMS or not set(value) <= HEX_DIGITS:
        raise InvalidDigest(digest, context)
    return value


class HashCatalog:
    """Digest -> HashRecord map. Treat as read-only once loaded."""

    def __init__(self, records: Iterable[HashRecord] = ()):
        self._records: Dict[str, HashRecord] = {}
        for record in records:
            self.add(record)

    def add(self, record: HashRecord) -> None:
        existing = self._records.get(record.digest)
        if existing is not None:
            if existing.label != record.label:
                raise DuplicateConflictingDigest(record.digest, existing.label.value, record.label.value)
            return
        self._records[record.digest] = record

    def get(self, digest: str) -> Optional[HashRecord]:
        return self._records.get(digest)

    def __len__(self) -> int:
        return len(self._records)

    def __iter__(self) -> Iterator[HashRecord]:
        return iter(self._records.values())

    def __contains__(self, digest: str) -> bool:
        return digest in self._records

    def __eq__(self, other) -> bool:
        return isinstance(other, HashCatalog) and self._records == other._records

    def counts(self) -> Dict[str, int]:
        counts = {label.value: 0 for label in Label}
        for record in self._records.values():
            counts[record.label.value] += 1
        return counts


def load_catalog(stream: Iterable[str]) -> HashCatalog:
    catalog = HashCatalog()
    for line_no, line in enumerate(stream, start=1):
        line = line.rstrip("\r\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split("\t", 2)
        if len(parts) < 2:
            raise MalformedLine(line_no, "expected <digest><TAB><label>")
        digest, label = parts[0].strip(), parts[1].strip().lower()
        if label not in {l.value for l in Label}:
            raise MalformedLine(line_no, f"unknown label {parts[1]!r}")
        try:
            record = HashRecord(digest=digest, label=Label(label), note=parts[2] if len(parts) > 2 else "")
        except ValidationError:
            raise MalformedLine(line_no, f"invalid digest {digest!r}")
        catalog.add(record)
    logger.info(f"📚 Loaded hash catalog with {len(catalog)} records {catalog.counts()}")
    return catalog


def read_catalog(path: Union[str, Path]) -> HashCatalog:
    with open(path, "r", encoding="utf-8") as handle:
        return load_catalog(handle)


def save_catalog(catalog: HashCatalog, output: TextIO) -> None:
    """Writes the text format, sorted by digest."""
    for record in sorted(catalog, key=lambda r: r.digest):
        fields = [record.digest, record.label.value]
        if record.note:
            fields.append(record.note)
        output.write("\t".join(fields) + "\n")


def classify(catalog: HashCatalog, digest: str) -> Classification:
    record = catalog.get(normalize_digest(digest))
    if record is None:
        return Classification.UNKNOWN
    return Classification(record.label.value)


def partition(catalog: HashCatalog, manifest: Sequence[Tuple[ArtefactId, str]]) -> LabeledPartition:
    """Splits manifest artefacts into known benign, known pertinent and unknown, keeping manifest order."""
    groups: Dict[Classification, List[ArtefactId]] = {c: [] for c in Classification}
    for artefact, digest in manifest:
        record = catalog.get(normalize_digest(digest, context=artefact.canonical_path))
        groups[Classification(record.label.value) if record else Classification.UNKNOWN].append(artefact)
    result = LabeledPartition(
        known_benign=tuple(groups[Classification.BENIGN]),
        known_pertinent=tuple(groups[Classification.PERTINENT]),
        unknown=tuple(groups[Classification.UNKNOWN]),
    )
    benign, pertinent, unknown = result.sizes
    logger.info(f"📊 Partitioned {len(manifest)} artefacts: {benign} known benign, {pertinent} known pertinent, {unknown} unknown")
    return result


def load_manifest(stream: Iterable[str]) -> List[ManifestEntry]:
    entries = []
    seen = set()
    for line_no, line in enumerate(stream, start=1):
        line = line.rstrip("\r\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) < 2:
            raise MalformedLine(line_no, "expected <path><TAB><digest>")
        artefact = ArtefactId.from_path(parts[0])
        digest = normalize_digest(parts[1], context=artefact.canonical_path)
        label = None
        if len(parts) > 2 and parts[2].strip():
            try:
                label = Label(parts[2].strip().lower())
            except ValueError:
                raise MalformedLine(line_no, f"unknown label {parts[2]!r}")
        tags = tuple(tag for tag in parts[3].split(",") if tag) if len(parts) > 3 else ()
        key = artefact.canonical_path.lower()
        if key in seen:
            raise MalformedLine(line_no, f"duplicate artefact {artefact.canonical_path}")
        seen.add(key)
        entries.append(ManifestEntry(artefact=artefact, digest=digest, label=label, tags=tags))
    return entries


def read_manifest(path: Union[str, Path]) -> List[ManifestEntry]:
    with open(path, "r", encoding="utf-8") as handle:
        return load_manifest(handle)


def write_manifest(entries: Iterable[ManifestEntry], output: TextIO) -> None:
    for entry in entries:
        label = entry.label.value if entry.label else ""
        output.write("\t".join([entry.artefact.canonical_path, entry.digest, label, ",".join(entry.tags)]) + "\n")


def manifest_pairs(entries: Iterable[ManifestEntry]) -> List[Tuple[ArtefactId, str]]:
    return [(entry.artefact, entry.digest) for entry in entries]


# Database-backed catalog

def import_catalog(catalog: HashCatalog, session: Session) -> int:
    """Upserts catalog records; returns how many were new."""
    added = 0
    for record in catalog:
        row = session.get(HashRecordRow, record.digest)
        if row is not None:
            if row.label != record.label.value:
                raise DuplicateConflictingDigest(record.digest, row.label, record.label.value)
            continue
        session.add(HashRecordRow(
            digest=record.digest, algorithm=record.algorithm, label=record.label.value, note=record.note,
        ))
        added += 1
    session.flush()
    logger.info(f"✅ Imported {added} new hash records ({len(catalog) - added} already stored)")
    return added


def load_catalog_from_db(session: Session) -> HashCatalog:
    rows = session.query(HashRecordRow).order_by(HashRecordRow.digest).all()
    catalog = HashCatalog(HashRecord(digest=row.digest, label=Label(row.label), note=row.note or "") for row in rows)
    logger.info(f"📚 Loaded {len(catalog)} hash records from database")
    return catalog

# © 2025 artefact-triage contributors. Licensed under the MIT License; see LICENSE.md.

"""Attribution of timeline events to file artefacts.

A name matches a field when it occurs case-insensitively (backslashes read
as forward slashes) with a boundary on both sides: before it the start of
the field, a path separator, a quote, whitespace or a colon (volume prefixes
such as ``NTFS:`` or ``C:``); after it the end of the field, a separator, a
quote or whitespace. So ``a.txt`` never matches inside ``data.txt``.
"""

import logging
import re
import string
from collections import defaultdict
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Set, TextIO, Tuple, Union

from app.errors import UnknownArtefact
from app.schemas import ArtefactId, ArtefactIndex, ArtefactTimeline, MatchField, sha256_hex
from app.services.timeline_store import Timeline, TimelineEvent, format_date, format_time, write_csv_rows

logger = logging.getLogger(__name__)

LEFT_BOUNDARY = frozenset("/\"':") | frozenset(string.whitespace)
RIGHT_BOUNDARY = frozenset("/\"'") | frozenset(string.whitespace)
# Runs between delimiters; every right boundary is a delimiter, so a match always ends a segment
_SEGMENT = re.compile(r"[^/\s\"':]+")

EXPORT_COLUMNS = ["inode", "date", "time", "MACB", "filename", "type", "source", "sourcetype", "datetime", "desc"]


def fold(text: str) -> str:
    return text.replace("\\", "/").lower()


def _bounded(text: str, start: int, end: int) -> bool:
    return (start == 0 or text[start - 1] in LEFT_BOUNDARY) and (end == len(text) or text[end] in RIGHT_BOUNDARY)


def name_occurs(name: str, text: str) -> bool:
    """Exhaustive boundary-rule check of one name against one field value."""
    name, text = fold(name), fold(text)
    if not name:
        return False
    start = text.find(name)
    while start != -1:
        if _bounded(text, start, start + len(name)):
            return True
        start = text.find(name, start + 1)
    return False


class _NameMatcher:
    """Finds which artefacts a field mentions, keyed by each name's last segment."""

    def __init__(self, artefacts: Sequence[ArtefactId]):
        # last segment -> [(artefact position, folded name, chars after the segment)]
        self.by_segment: Dict[str, List[Tuple[int, str, int]]] = defaultdict(list)
        self.unkeyed: List[Tuple[int, str]] = []
        for position, artefact in enumerate(artefacts):
            for name in artefact.names:
                folded = fold(name)
                segments = list(_SEGMENT.finditer(folded))
                if not segments:
                    self.unkeyed.append((position, folded))
                    continue
                last = segments[-1]
                self.by_segment[last.group()].append((position, folded, len(folded) - last.end()))
        self._cache: Dict[str, Set[int]] = {}

    def match(self, text: str, cache: bool = False) -> Set[int]:
        if cache and text in self._cache:
            return self._cache[text]
        folded = fold(text)
        found: Set[int] = set()
        for segment in _SEGMENT.finditer(folded):
            candidates = self.by_segment.get(segment.group())
            if not candidates:
                continue
            for position, name, tail in candidates:
                end = segment.end() + tail
                start = end - len(name)
                if start >= 0 and folded[start:end] == name and _bounded(folded, start, end):
                    found.add(position)
        for position, name in self.unkeyed:
            if name_occurs(name, folded):
                found.add(position)
        if cache:
            self._cache[text] = found
        return found


def _dedupe(artefacts: Iterable[ArtefactId]) -> List[ArtefactId]:
    unique: Dict[str, ArtefactId] = {}
    for artefact in artefacts:
        key = artefact.canonical_path.lower()
        if key in unique:
            logger.warning(f"⚠️ Duplicate artefact ignored: {artefact.canonical_path}")
            continue
        unique[key] = artefact
    return list(unique.values())


def build_index(timeline: Timeline, artefacts: Sequence[ArtefactId]) -> ArtefactIndex:
    """Builds one ArtefactTimeline per artefact from the desc and filename columns.

    When both columns mention the artefact the event is recorded under desc,
    the column naming the acted-on file for filesystem records.
    """
    artefacts = _dedupe(artefacts)
    matcher = _NameMatcher(artefacts)
    rows: List[List[int]] = [[] for _ in artefacts]
    fields: List[List[MatchField]] = [[] for _ in artefacts]

    for event in timeline.events:
        in_desc = matcher.match(event.desc)
        # filename values repeat heavily ($MFT, browser history databases)
        in_filename = matcher.match(event.filename, cache=True)
        for position in in_desc:
            rows[position].append(event.row_id)
            fields[position].append(MatchField.DESC)
        for position in in_filename - in_desc:
            rows[position].append(event.row_id)
            fields[position].append(MatchField.FILENAME)

    timelines = {
        artefact.canonical_path.lower(): ArtefactTimeline(
            artefact=artefact, row_ids=tuple(rows[i]), match_fields=tuple(fields[i]),
        )
        for i, artefact in enumerate(artefacts)
    }
    matched = sum(1 for row_ids in rows if row_ids)
    logger.info(f"📊 Indexed {len(artefacts)} artefacts, {matched} with at least one event")
    return ArtefactIndex(source_label=timeline.source_label, timelines=timelines)


def exhaustive_index(timeline: Timeline, artefacts: Sequence[ArtefactId]) -> ArtefactIndex:
    """Reference attribution checking every event against every artefact name."""
    timelines = {}
    for artefact in _dedupe(artefacts):
        row_ids, fields = [], []
        for event in timeline.events:
            if any(name_occurs(name, event.desc) for name in artefact.names):
                row_ids.append(event.row_id)
                fields.append(MatchField.DESC)
            elif any(name_occurs(name, event.filename) for name in artefact.names):
                row_ids.append(event.row_id)
                fields.append(MatchField.FILENAME)
        timelines[artefact.canonical_path.lower()] = ArtefactTimeline(
            artefact=artefact, row_ids=tuple(row_ids), match_fields=tuple(fields),
        )
    return ArtefactIndex(source_label=timeline.source_label, timelines=timelines)


def verify_index(index: ArtefactIndex, timeline: Timeline) -> List[str]:
    """Re-scans every indexed event; returns a description of each unsound entry."""
    events = timeline.by_row_id()
    problems = []
    for entry in index.timelines.values():
        for row_id, match_field in zip(entry.row_ids, entry.match_fields):
            event = events.get(row_id)
            if event is None:
                problems.append(f"{entry.artefact.canonical_path}: row {row_id} not in timeline")
                continue
            text = event.desc if match_field is MatchField.DESC else event.filename
            if not any(name_occurs(name, text) for name in entry.artefact.names):
                problems.append(f"{entry.artefact.canonical_path}: row {row_id} {match_field.value} lacks the name")
    return problems


def artefact_timeline_events(index: ArtefactIndex, artefact: ArtefactId, parent: Timeline) -> List[TimelineEvent]:
    entry = index.get(artefact)
    if entry is None:
        raise UnknownArtefact(artefact.canonical_path)
    if not entry.row_ids:
        return []
    events = parent.by_row_id()
    return [events[row_id] for row_id in entry.row_ids]


def events_by_artefact(index: ArtefactIndex, parent: Timeline) -> Dict[str, List[TimelineEvent]]:
    """Dereferences every artefact timeline at once, keyed like ``index.timelines``."""
    events = parent.by_row_id()
    return {key: [events[row_id] for row_id in entry.row_ids] for key, entry in index.timelines.items()}


def export_artefact_timeline(events: Sequence[TimelineEvent], output: TextIO) -> None:
    write_csv_rows(output, EXPORT_COLUMNS, (
        [
            event.inode, format_date(event.date), format_time(event.time), event.macb_string,
            event.filename, event.event_type, event.source, event.sourcetype,
            event.timestamp.isoformat(), event.desc,
        ]
        for event in events
    ))


def timeline_filename(artefact: ArtefactId) -> str:
    """Deterministic, filesystem-safe csv name for an artefact's timeline."""
    safe = re.sub(r"[^A-Za-z0-9._-]+", "_", artefact.canonical_path).strip("_.") or "artefact"
    return f"{safe[-80:]}-{sha256_hex(artefact.canonical_path.lower())[:8]}.csv"


def write_artefact_timelines(index: ArtefactIndex, parent: Timeline, out_dir: Union[str, Path]) -> Dict[str, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = {}
    for key, events in events_by_artefact(index, parent).items():
        artefact = index.timelines[key].artefact
        path = out_dir / timeline_filename(artefact)
        with open(path, "w", encoding="utf-8", newline="") as handle:
            export_artefact_timeline(events, handle)
        written[artefact.canonical_path] = path
    logger.info(f"✅ Wrote {len(written)} artefact timelines to {out_dir}")
    return written


def load_artefact_list(stream: Iterable[str]) -> List[ArtefactId]:
    """Reads ``<path>[<TAB><alias>...]`` lines; blank and ``#`` lines are ignored."""
    artefacts = []
    for line in stream:
        line = line.rstrip("\r\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        path, *aliases = line.split("\t")
        artefacts.append(ArtefactId.from_path(path, [alias for alias in aliases if alias.strip()]))
    return artefacts


def read_artefact_list(path: Union[str, Path]) -> List[ArtefactId]:
    with open(path, "r", encoding="utf-8") as handle:
        return load_artefact_list(handle)


def write_artefact_list(artefacts: Iterable[ArtefactId], output: TextIO) -> None:
    for artefact in artefacts:
        output.write("\t".join(artefact.names) + "\n")


def merge_aliases(artefacts: Sequence[ArtefactId], extra: Optional[Sequence[ArtefactId]]) -> List[ArtefactId]:
    """Adds aliases from a second artefact list to matching canonical paths."""
    if not extra:
        return list(artefacts)
    by_path = {a.canonical_path.lower(): a for a in extra}
    merged = []
    for artefact in artefacts:
        other = by_path.get(artefact.canonical_path.lower())
        if other is not None:
            artefact = ArtefactId.from_path(artefact.canonical_path, artefact.aliases + other.aliases)
        merged.append(artefact)
    return merged

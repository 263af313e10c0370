# © 2025 artefact-triage contributors. Licensed under the MIT License; see LICENSE.md.

"""Parsing, serialization and summaries of l2tcsv super timelines.

Events are slotted dataclasses rather than pydantic models: a disk image
timeline routinely holds millions of rows.
"""

import csv
import logging
import re
import sys
from dataclasses import dataclass
from datetime import date, datetime, time
from functools import lru_cache
from itertools import product
from operator import attrgetter
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Optional, TextIO, Tuple, Union

import pandas as pd

from app.errors import MalformedRow, MissingHeader, UnknownField
from app.schemas import ParsePolicy, TimelineSummary

logger = logging.getLogger(__name__)

L2TCSV_COLUMNS = [
    "date", "time", "timezone", "MACB", "source", "sourcetype", "type", "user", "host",
    "short", "desc", "version", "filename", "inode", "notes", "format", "extra",
]

MACB_PATTERN = re.compile(r"^[M.][A.][C.][B.]$")
# All sixteen legal MACB strings mapped to their flags
_MACB_FLAGS: Dict[str, Tuple[bool, bool, bool, bool]] = {
    "".join(letter if flag else "." for letter, flag in zip("MACB", flags)): flags
    for flags in product((False, True), repeat=4)
}
_L2T_DATE = re.compile(r"^(\d{2})/(\d{2})/(\d{4})$")
_ISO_DATE = re.compile(r"^(\d{4})-(\d{2})-(\d{2})$")
_TIME = re.compile(r"^(\d{2}):(\d{2}):(\d{2})$")
_LOGGED_SKIPS = 20

# Plaso desc and extra fields can exceed the csv module default of 128 KiB
csv.field_size_limit(16 * 1024 * 1024)


@dataclass(frozen=True, slots=True)
class TimelineEvent:
    """One l2tcsv row."""
    row_id: int
    date: date
    time: time
    timezone: str
    macb: Tuple[bool, bool, bool, bool]
    source: str
    sourcetype: str
    event_type: str
    user: str
    host: str
    short_desc: str
    desc: str
    version: str
    filename: str
    inode: str
    notes: str
    format: str
    extra: str

    @property
    def macb_string(self) -> str:
        return "".join(letter if flag else "." for letter, flag in zip("MACB", self.macb))

    @property
    def timestamp(self) -> datetime:
        """Local date-time in the row's stated timezone."""
        return datetime.combine(self.date, self.time)

    @property
    def is_created(self) -> bool:
        return self.macb[3]


@dataclass(frozen=True, slots=True)
class SkippedRow:
    row_id: int
    reason: str


@dataclass(frozen=True)
class Timeline:
    events: Tuple[TimelineEvent, ...] = ()
    source_label: str = ""
    skipped: Tuple[SkippedRow, ...] = ()

    def __len__(self) -> int:
        return len(self.events)

    @property
    def skipped_count(self) -> int:
        return len(self.skipped)

    def by_row_id(self) -> Dict[int, TimelineEvent]:
        return {event.row_id: event for event in self.events}


def format_date(value: date) -> str:
    return f"{value.month:02d}/{value.day:02d}/{value.year:04d}"


def format_time(value: time) -> str:
    return f"{value.hour:02d}:{value.minute:02d}:{value.second:02d}"


@lru_cache(maxsize=16384)
def _parse_date(text: str, allow_iso: bool) -> date:
    match = _L2T_DATE.match(text)
    if match:
        month, day, year = match.groups()
    else:
        match = _ISO_DATE.match(text) if allow_iso else None
        if not match:
            raise ValueError(f"unparseable date {text!r}")
        year, month, day = match.groups()
    try:
        return date(int(year), int(month), int(day))
    except ValueError:
        raise ValueError(f"invalid date {text!r}")


@lru_cache(maxsize=100000)
def _parse_time(text: str) -> time:
    match = _TIME.match(text)
    if not match:
        raise ValueError(f"unparseable time {text!r}")
    try:
        return time(*(int(part) for part in match.groups()))
    except ValueError:
        raise ValueError(f"invalid time {text!r}")


def _build_event(row_id: int, row: List[str], allow_iso: bool) -> TimelineEvent:
    if len(row) != len(L2TCSV_COLUMNS):
        raise ValueError(f"expected {len(L2TCSV_COLUMNS)} columns, found {len(row)}")
    (raw_date, raw_time, timezone, macb, source, sourcetype, event_type, user, host,
     short_desc, desc, version, filename, inode, notes, parser_format, extra) = row
    flags = _MACB_FLAGS.get(macb)
    if flags is None:
        raise ValueError(f"bad MACB value {macb!r}")
    intern = sys.intern
    return TimelineEvent(
        row_id=row_id,
        date=_parse_date(raw_date, allow_iso),
        time=_parse_time(raw_time),
        timezone=intern(timezone),
        macb=flags,
        source=intern(source),
        sourcetype=intern(sourcetype),
        event_type=intern(event_type),
        user=intern(user),
        host=intern(host),
        short_desc=short_desc,
        desc=desc,
        version=intern(version),
        filename=intern(filename),
        inode=inode,
        notes=notes,
        format=intern(parser_format),
        extra=extra,
    )


def parse_timeline(
    stream: Iterable[str],
    policy: ParsePolicy = ParsePolicy.LENIENT,
    source_label: str = "<stream>",
) -> Timeline:
    """Parses an l2tcsv character stream into an immutable Timeline.

    Row ids are the 1-based ordinals of non-blank data rows, so skipped
    rows leave gaps. Lenient mode also accepts ISO dates and records every
    malformed row in ``Timeline.skipped``; strict mode raises MalformedRow
    on the first one.
    """
    policy = ParsePolicy(policy)
    strict = policy is ParsePolicy.STRICT
    reader = csv.reader(stream)
    header = next(reader, None)
    if header is None:
        raise MissingHeader()
    if header and header[0].startswith("\ufeff"):
        header[0] = header[0][1:]
    if [column.strip() for column in header] != L2TCSV_COLUMNS:
        raise MissingHeader(found=",".join(header))

    events: List[TimelineEvent] = []
    skipped: List[SkippedRow] = []
    row_id = 0
    rows = iter(reader)
    while True:
        try:
            row = next(rows, None)
        except csv.Error as e:
            raise MalformedRow(row_id + 1, f"unreadable csv: {e}")
        if row is None:
            break
        if not row:
            continue
        row_id += 1
        try:
            events.append(_build_event(row_id, row, allow_iso=not strict))
        except ValueError as e:
            if strict:
                raise MalformedRow(row_id, str(e))
            skipped.append(SkippedRow(row_id, str(e)))
            if len(skipped) <= _LOGGED_SKIPS:
                logger.warning(f"⚠️ Skipping row {row_id} of {source_label}: {e}")
            else:
                logger.debug(f"Skipping row {row_id} of {source_label}: {e}")

    if skipped:
        logger.info(f"📊 Parsed {len(events)} events from {source_label}, skipped {len(skipped)} malformed rows")
    else:
        logger.info(f"📊 Parsed {len(events)} events from {source_label}")
    return Timeline(events=tuple(events), source_label=source_label, skipped=tuple(skipped))


def read_timeline(path: Union[str, Path], policy: ParsePolicy = ParsePolicy.LENIENT) -> Timeline:
    with open(path, "r", encoding="utf-8", newline="") as handle:
        return parse_timeline(handle, policy=policy, source_label=str(path))


def event_row(event: TimelineEvent) -> List[str]:
    """The 17 l2tcsv column values of an event, in header order."""
    return [
        format_date(event.date), format_time(event.time), event.timezone, event.macb_string,
        event.source, event.sourcetype, event.event_type, event.user, event.host,
        event.short_desc, event.desc, event.version, event.filename, event.inode,
        event.notes, event.format, event.extra,
    ]


def write_csv_rows(output: TextIO, header: List[str], rows: Iterable[List[str]]) -> None:
    """LF line endings, RFC-4180 quoting.

    Rows holding a CR or LF inside a field are written fully quoted; the
    minimal csv dialect only quotes characters of its own line terminator.
    """
    minimal = csv.writer(output, lineterminator="\n")
    quoted = csv.writer(output, lineterminator="\n", quoting=csv.QUOTE_ALL)
    minimal.writerow(header)
    for row in rows:
        if any("\r" in field or "\n" in field for field in row):
            quoted.writerow(row)
        else:
            minimal.writerow(row)


def write_timeline(timeline: Timeline, output: TextIO) -> None:
    """Writes the header and one row per event."""
    write_csv_rows(output, L2TCSV_COLUMNS, (event_row(event) for event in timeline.events))


def save_timeline(timeline: Timeline, path: Union[str, Path]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        write_timeline(timeline, handle)


# Column name -> serialized column value
FIELD_GETTERS: Dict[str, Callable[[TimelineEvent], str]] = {
    "date": lambda e: format_date(e.date),
    "time": lambda e: format_time(e.time),
    "timezone": attrgetter("timezone"),
    "MACB": attrgetter("macb_string"),
    "source": attrgetter("source"),
    "sourcetype": attrgetter("sourcetype"),
    "type": attrgetter("event_type"),
    "user": attrgetter("user"),
    "host": attrgetter("host"),
    "short": attrgetter("short_desc"),
    "desc": attrgetter("desc"),
    "version": attrgetter("version"),
    "filename": attrgetter("filename"),
    "inode": attrgetter("inode"),
    "notes": attrgetter("notes"),
    "format": attrgetter("format"),
    "extra": attrgetter("extra"),
}
# Attribute names accepted as aliases of their column
_FIELD_ALIASES = {"event_type": "type", "short_desc": "short", "macb": "MACB"}


def value_counts(timeline: Timeline, field_name: str) -> Dict[str, int]:
    """Frequency table of one column, by count descending then value ascending."""
    column = _FIELD_ALIASES.get(field_name, field_name)
    getter = FIELD_GETTERS.get(column)
    if getter is None:
        raise UnknownField(field_name)
    series = pd.Series([getter(event) for event in timeline.events], dtype=object)
    frame = series.value_counts(sort=False).rename_axis("value").reset_index(name="count")
    frame = frame.sort_values(["count", "value"], ascending=[False, True], kind="mergesort")
    return {value: int(count) for value, count in zip(frame["value"], frame["count"])}


def summarize(timeline: Timeline) -> TimelineSummary:
    return TimelineSummary(
        event_count=len(timeline.events),
        distinct_filename_count=len({event.filename for event in timeline.events}),
        counts_by_event_type=value_counts(timeline, "type"),
        counts_by_source=value_counts(timeline, "source"),
        counts_by_sourcetype=value_counts(timeline, "sourcetype"),
    )


def latest_timestamp(timeline: Timeline) -> Optional[datetime]:
    if not timeline.events:
        return None
    return max(event.timestamp for event in timeline.events)

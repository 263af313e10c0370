# © 2025 artefact-triage contributors. Licensed under the MIT License; see LICENSE.md.

import io
from datetime import date, time

import pytest

from app.schemas import Action, PopulationEntry, ScenarioSpec
from app.services.timeline_store import L2TCSV_COLUMNS, TimelineEvent, parse_timeline

HEADER = ",".join(L2TCSV_COLUMNS)


def l2t_row(**fields) -> str:
    """One l2tcsv line; unspecified columns get plausible defaults."""
    values = {
        "date": "01/06/2020", "time": "10:30:00", "timezone": "UTC", "MACB": ".A..", "source": "FILE",
        "sourcetype": "NTFS $MFT", "type": "Last Access Time", "user": "-", "host": "host1", "short": "-",
        "desc": "-", "version": "2", "filename": "-", "inode": "42", "notes": "-", "format": "mft", "extra": "-",
    }
    values.update(fields)
    return ",".join(_quote(values[column]) for column in L2TCSV_COLUMNS)


def _quote(value: str) -> str:
    if any(ch in value for ch in ',"\r\n'):
        return '"' + value.replace('"', '""') + '"'
    return value


@pytest.fixture
def l2t_text():
    def build(*rows: str) -> str:
        return "\n".join([HEADER, *rows]) + "\n"
    return build


@pytest.fixture
def make_event():
    def build(row_id: int, desc: str = "-", filename: str = "-", event_type: str = "Last Access Time",
              source: str = "FILE", macb=(False, True, False, False), when=(2020, 1, 6, 10, 30, 0)) -> TimelineEvent:
        year, month, day, hour, minute, second = when
        return TimelineEvent(
            row_id=row_id, date=date(year, month, day), time=time(hour, minute, second), timezone="UTC",
            macb=tuple(macb), source=source, sourcetype="NTFS $MFT", event_type=event_type, user="-",
            host="host1", short_desc="-", desc=desc, version="2", filename=filename, inode="-", notes="-",
            format="mft", extra="-",
        )
    return build


@pytest.fixture
def parse():
    def run(text: str, **kwargs):
        return parse_timeline(io.StringIO(text, newline=""), **kwargs)
    return run


@pytest.fixture
def small_spec() -> ScenarioSpec:
    """A few files of each label with little background noise."""
    return ScenarioSpec(
        name="small",
        benign_population=[
            PopulationEntry(file_type="pdf", actions=[Action.DOWNLOAD], count=12),
            PopulationEntry(file_type="txt", actions=[Action.CREATION], count=6),
            PopulationEntry(file_type="py", actions=[Action.CREATION, Action.ACCESS, Action.EXECUTE], count=4),
        ],
        pertinent_population=[
            PopulationEntry(file_type="py", actions=[Action.CREATION, Action.UNZIP, Action.ACCESS, Action.EXECUTE], count=4),
            PopulationEntry(file_type="pdf", actions=[Action.CREATION, Action.EDIT, Action.LATE_ACCESS], count=3),
        ],
        benign_keywords=["report", "holiday"],
        pertinent_keywords=["hack", "invoice"],
        start_date=date(2020, 1, 1),
        end_date=date(2020, 1, 31),
        seed=7,
        noise_events=300,
    )

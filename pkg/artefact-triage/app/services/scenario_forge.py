# © 2025 artefact-triage contributors. Licensed under the MIT License; see LICENSE.md.

"""Deterministic synthetic super timelines with ground truth.

Every declared file becomes a cluster of events realizing its actions
(filesystem $MFT records, Chrome download/visit records, prefetch execution
records) at seeded pseudo-random times, interleaved with OS background noise
that mentions no declared file. File names carry a unique five digit index
so no name is a bounded substring of another.
"""

import json
import logging
import math
from dataclasses import dataclass
from datetime import date, datetime, time, timedelta
from pathlib import Path
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np
from pydantic import ValidationError

from app.config import stage_seed
from app.errors import InvalidSpec
from app.schemas import (Action, ArtefactId, GroundTruthManifest, HashRecord, Label, ManifestEntry,
                         PopulationEntry, ScenarioComposition, ScenarioSpec, sha256_hex)
from app.services.artefact_index import write_artefact_list
from app.services.hash_catalog import HashCatalog, save_catalog, write_manifest
from app.services.timeline_store import Timeline, TimelineEvent, save_timeline, value_counts

logger = logging.getLogger(__name__)

MFT_FILENAME = "\\$MFT"
CHROME_HISTORY = "\\Users\\{user}\\AppData\\Local\\Google\\Chrome\\User Data\\Default\\History"
PREFETCH_FILENAME = "\\Windows\\Prefetch\\PYTHON.EXE-6E7C4A1B.pf"
DOWNLOAD_HOST = "downloads.example.com"

FILE_STEMS = {"pdf": "document", "txt": "notes", "png": "image", "jpg": "photo", "gif": "animation", "py": "script"}
TYPE_DIRECTORIES = {"pdf": "Documents", "txt": "Documents", "png": "Pictures", "jpg": "Pictures", "gif": "Pictures", "py": "Projects"}

DEFAULT_START = date(2020, 1, 1)
DEFAULT_END = date(2020, 3, 31)
DEFAULT_BENIGN_KEYWORDS = ["report", "meeting", "holiday", "budget", "recipe"]
# Pertinent file counts by type, shared by every built-in case
PERTINENT_COUNTS = [("txt", 6), ("py", 6), ("jpg", 13), ("png", 4), ("gif", 1), ("pdf", 1)]

# Share of the date range before which every non-late action happens
_ACTIVE_SHARE = 0.8
_LATE_SHARE = 0.9


@dataclass(frozen=True)
class _Template:
    source: str
    sourcetype: str
    event_type: str
    macb: Tuple[bool, bool, bool, bool]
    parser: str


def _macb(text: str) -> Tuple[bool, bool, bool, bool]:
    return tuple(ch != "." for ch in text)


FILE_CREATED = _Template("FILE", "NTFS $MFT", "Creation Time", _macb("...B"), "mft")
FILE_ACCESSED = _Template("FILE", "NTFS $MFT", "Last Access Time", _macb(".A.."), "mft")
FILE_MODIFIED = _Template("FILE", "NTFS $MFT", "Content Modification Time", _macb("M..."), "mft")
FILE_CHANGED = _Template("FILE", "NTFS $MFT", "Metadata Modification Time", _macb("..C."), "mft")
WEB_DOWNLOADED = _Template("WEBHIST", "Chrome History", "File Downloaded", _macb("...."), "chrome_27")
WEB_VISITED = _Template("WEBHIST", "Chrome History", "Last Visited Time", _macb(".A.."), "chrome_27")
EXECUTED = _Template("LOG", "WinPrefetch", "Last Time Executed", _macb("...."), "prefetch")
PREVIOUSLY_EXECUTED = _Template("LOG", "WinPrefetch", "Previous Last Time Executed", _macb("...."), "prefetch")
REGISTRY_WRITTEN = _Template("REG", "Registry Key", "Content Modification Time", _macb("M..."), "winreg_default")
SERVICE_EVENT = _Template("EVT", "WinEVTX", "Creation Time", _macb("...B"), "winevtx")

_NOISE_FILE_TEMPLATES = [FILE_CREATED, FILE_ACCESSED, FILE_MODIFIED, FILE_CHANGED]
# (kind, probability): filesystem, registry, event log
_NOISE_MIX = [("file", 0.6), ("registry", 0.25), ("evtx", 0.15)]


@dataclass
class _PendingEvent:
    offset: int
    order: int
    template: _Template
    desc: str
    filename: str
    short_desc: str
    user: str
    inode: str


@dataclass(frozen=True)
class _DeclaredFile:
    label: Label
    file_type: str
    actions: Tuple[Action, ...]


def _entries(file_types: Sequence[Tuple[str, Sequence[Action], int]]) -> List[PopulationEntry]:
    return [PopulationEntry(file_type=ft, actions=list(actions), count=count) for ft, actions, count in file_types]


def benign_population() -> List[PopulationEntry]:
    """Files of an ordinary workstation user."""
    return _entries([
        ("pdf", [Action.DOWNLOAD], 999),
        ("txt", [Action.CREATION], 100),
        ("png", [Action.DOWNLOAD], 100),
        ("py", [Action.CREATION, Action.ACCESS, Action.EXECUTE], 63),
    ])


def pertinent_population(profiles: Dict[str, Sequence[Action]]) -> List[PopulationEntry]:
    """The baseline pertinent files (31, mixed types) with per-type action profiles."""
    return _entries([(file_type, profiles[file_type], count) for file_type, count in PERTINENT_COUNTS])


def default_scenario(seed: int = 42) -> ScenarioSpec:
    """The baseline case: ordinary files plus every kind of pertinent file."""
    return ScenarioSpec(
        name="paper-baseline",
        benign_population=benign_population(),
        pertinent_population=pertinent_population({
            "txt": [Action.CREATION, Action.ACCESS, Action.EDIT],
            "py": [Action.CREATION, Action.UNZIP, Action.ACCESS, Action.MOVE, Action.COPY],
            "jpg": [Action.CREATION, Action.ACCESS],
            "png": [Action.DOWNLOAD, Action.ACCESS],
            "gif": [Action.DOWNLOAD, Action.ACCESS],
            "pdf": [Action.DOWNLOAD],
        }),
        benign_keywords=DEFAULT_BENIGN_KEYWORDS,
        pertinent_keywords=["chrome", "child", "png", "jpg", "mft", "hack", "python", "py", "txt", "zip",
                            "unzip", "pdf", "invoice", "email", "fraud"],
        start_date=DEFAULT_START,
        end_date=DEFAULT_END,
        seed=seed,
    )


def builtin_scenarios(seed: int = 42) -> List[ScenarioSpec]:
    """Media download (A), hacking scripts (B) and invoice fraud (C) cases.

    All three share the baseline populations; they differ in how the
    pertinent files were handled and in the case vocabulary.
    """
    common = dict(
        benign_population=benign_population(),
        benign_keywords=DEFAULT_BENIGN_KEYWORDS,
        start_date=DEFAULT_START,
        end_date=DEFAULT_END,
        seed=seed,
    )
    downloaded = [Action.DOWNLOAD, Action.ACCESS]
    return [
        ScenarioSpec(
            name="A-media-download",
            pertinent_population=pertinent_population({
                "txt": downloaded,
                "py": downloaded,
                "jpg": [Action.DOWNLOAD, Action.ACCESS, Action.COPY, Action.MOVE],
                "png": downloaded,
                "gif": downloaded,
                "pdf": [Action.DOWNLOAD],
            }),
            pertinent_keywords=["chrome", "child", "png", "jpg", "MFT"],
            **common,
        ),
        ScenarioSpec(
            name="B-hacking-scripts",
            pertinent_population=pertinent_population({
                "txt": [Action.CREATION, Action.UNZIP, Action.ACCESS, Action.EDIT],
                "py": [Action.CREATION, Action.UNZIP, Action.ACCESS, Action.MOVE, Action.COPY, Action.EXECUTE],
                "jpg": [Action.CREATION, Action.UNZIP, Action.ACCESS],
                "png": [Action.CREATION, Action.UNZIP, Action.ACCESS],
                "gif": [Action.CREATION, Action.UNZIP],
                "pdf": [Action.DOWNLOAD, Action.ACCESS],
            }),
            pertinent_keywords=["hack", "python", "py", "txt", "zip", "unzip"],
            **common,
        ),
        ScenarioSpec(
            name="C-invoice-fraud",
            pertinent_population=pertinent_population({
                "txt": [Action.CREATION, Action.EDIT, Action.LATE_ACCESS],
                "py": [Action.CREATION, Action.ACCESS, Action.LATE_ACCESS],
                "jpg": [Action.CREATION, Action.ACCESS, Action.LATE_ACCESS],
                "png": [Action.CREATION, Action.EDIT, Action.LATE_ACCESS],
                "gif": [Action.DOWNLOAD, Action.LATE_ACCESS],
                "pdf": [Action.CREATION, Action.EDIT, Action.LATE_ACCESS],
            }),
            pertinent_keywords=["pdf", "invoice", "email", "fraud"],
            feature_event_types=["Last Access Time", "Creation Time"],
            **common,
        ),
    ]


def find_scenario(name: str, seed: int = 42) -> ScenarioSpec:
    specs = {spec.name: spec for spec in [default_scenario(seed)] + builtin_scenarios(seed)}
    if name not in specs:
        raise InvalidSpec(f"Unknown built-in scenario '{name}' (choose from {', '.join(specs)})")
    return specs[name]


def load_spec(path: Union[str, Path]) -> ScenarioSpec:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            return ScenarioSpec.model_validate(json.load(handle))
    except json.JSONDecodeError as e:
        raise InvalidSpec(f"Scenario spec {path} is not valid JSON: {e}")
    except ValidationError as e:
        raise InvalidSpec(f"Scenario spec {path} is invalid: {e}")


def scaled_counts(counts: Sequence[int], target: int) -> List[int]:
    """Rescales counts to sum to target, largest remainder first (ties by position)."""
    total = sum(counts)
    if total == 0:
        return list(counts)
    exact = [count * target / total for count in counts]
    scaled = [math.floor(value) for value in exact]
    by_remainder = sorted(range(len(counts)), key=lambda i: (-(exact[i] - scaled[i]), i))
    for i in by_remainder[:target - sum(scaled)]:
        scaled[i] += 1
    return scaled


def _benign_counts(spec: ScenarioSpec) -> List[int]:
    counts = [entry.count for entry in spec.benign_population]
    if spec.pertinent_fraction_override is None:
        return counts
    pertinent = sum(entry.count for entry in spec.pertinent_population)
    if pertinent == 0 or sum(counts) == 0:
        raise InvalidSpec("pertinent_fraction_override needs both benign and pertinent files")
    fraction = spec.pertinent_fraction_override
    target = max(1, round(pertinent * (1 - fraction) / fraction))
    return scaled_counts(counts, target)


def _declared_files(spec: ScenarioSpec) -> List[_DeclaredFile]:
    files = []
    for entry, count in zip(spec.benign_population, _benign_counts(spec)):
        files += [_DeclaredFile(Label.BENIGN, entry.file_type.lower(), tuple(entry.actions))] * count
    for entry in spec.pertinent_population:
        files += [_DeclaredFile(Label.PERTINENT, entry.file_type.lower(), tuple(entry.actions))] * entry.count
    return files


def artefact_path(file_type: str, index: int, actions: Sequence[Action], user: str) -> str:
    """Windows path of a declared file; downloads land in the Downloads folder."""
    directory = "Downloads" if Action.DOWNLOAD in actions else TYPE_DIRECTORIES.get(file_type, "Files")
    stem = FILE_STEMS.get(file_type, "file")
    return f"\\Users\\{user}\\{directory}\\{stem}_{index:05d}.{file_type}"


def synthetic_digest(seed: int, canonical_path: str) -> str:
    return sha256_hex(f"{seed}:{canonical_path}")


class _ClusterWriter:
    """Turns one declared file's actions into pending events."""

    def __init__(self, spec: ScenarioSpec, rng: np.random.Generator, span: int):
        self.spec = spec
        self.rng = rng
        self.span = span
        self.pending: List[_PendingEvent] = []
        self.history = CHROME_HISTORY.format(user=spec.user)

    def _decorate(self, text: str, label: Label) -> str:
        spec, rng = self.spec, self.rng
        words = []
        if spec.benign_keywords and label is Label.BENIGN and rng.random() < spec.benign_vocabulary_rate:
            words.append(spec.benign_keywords[int(rng.integers(len(spec.benign_keywords)))])
        rate = spec.pertinent_keyword_rate if label is Label.PERTINENT else spec.benign_keyword_rate
        if spec.pertinent_keywords and rng.random() < rate:
            words.append(spec.pertinent_keywords[int(rng.integers(len(spec.pertinent_keywords)))])
        return f"{text} ({' '.join(words)})" if words else text

    def _emit(self, offset: int, template: _Template, desc: str, filename: str, short_desc: str,
              label: Label, inode: str = "-", user: str = "-") -> None:
        offset = min(max(offset, 0), self.span)
        self.pending.append(_PendingEvent(
            offset=offset, order=len(self.pending), template=template, desc=self._decorate(desc, label),
            filename=filename, short_desc=short_desc, user=user, inode=inode,
        ))

    def write(self, declared: _DeclaredFile, path: str, inode: str) -> int:
        rng, span = self.rng, self.span
        label = declared.label
        mft_desc = f"NTFS:{path} Type: file"
        active_end = int(span * _ACTIVE_SHARE)
        clock = int(rng.integers(0, max(active_end, 1)))
        before = len(self.pending)
        created = False

        def file_event(template: _Template, offset: int) -> None:
            self._emit(offset, template, mft_desc, MFT_FILENAME, path, label, inode=inode)

        for step, action in enumerate(declared.actions):
            if step and action is not Action.LATE_ACCESS:
                clock = min(clock + int(rng.integers(60, 2 * 86400)), int(span * _LATE_SHARE) - 1)
            if action is Action.DOWNLOAD:
                name = path.rsplit("\\", 1)[-1]
                url = f"https://{DOWNLOAD_HOST}/files/{name}"
                self._emit(clock - 5, WEB_VISITED, f"{url} -> {path} [count: 1]", self.history, url, label, user=self.spec.user)
                self._emit(clock, WEB_DOWNLOADED, f"{url} -> {path} Received: complete", self.history, path, label, user=self.spec.user)
                if not created:
                    file_event(FILE_CREATED, clock + 1)
                    created = True
            elif action is Action.CREATION:
                if not created:
                    file_event(FILE_CREATED, clock)
                    created = True
            elif action is Action.ACCESS:
                file_event(FILE_ACCESSED, clock)
            elif action is Action.EDIT:
                file_event(FILE_MODIFIED, clock)
                file_event(FILE_CHANGED, clock)
            elif action is Action.EXECUTE:
                previous = clock - int(rng.integers(3600, 86400))
                desc = f"Prefetch [PYTHON.EXE] was executed - run count 2 path hints: {path}"
                self._emit(previous, PREVIOUSLY_EXECUTED, desc, PREFETCH_FILENAME, "PYTHON.EXE", label, user=self.spec.user)
                self._emit(clock, EXECUTED, desc, PREFETCH_FILENAME, "PYTHON.EXE", label, user=self.spec.user)
            elif action in (Action.UNZIP, Action.MOVE):
                file_event(FILE_CHANGED, clock)
            elif action is Action.COPY:
                file_event(FILE_CHANGED, clock)
                file_event(FILE_ACCESSED, clock)
            elif action is Action.LATE_ACCESS:
                file_event(FILE_ACCESSED, int(rng.integers(math.ceil(span * _LATE_SHARE), span + 1)))
        return len(self.pending) - before


def _noise_events(spec: ScenarioSpec, rng: np.random.Generator, span: int, count: int, start_order: int) -> List[_PendingEvent]:
    offsets = rng.integers(0, span + 1, size=count)
    kinds = rng.choice(len(_NOISE_MIX), size=count, p=[p for _, p in _NOISE_MIX])
    file_kinds = rng.integers(0, len(_NOISE_FILE_TEMPLATES), size=count)
    events = []
    for i in range(count):
        kind = _NOISE_MIX[kinds[i]][0]
        if kind == "file":
            name = f"\\Windows\\System32\\sysfile_{i:07d}.dll"
            template = _NOISE_FILE_TEMPLATES[file_kinds[i]]
            desc, filename, short_desc, inode = f"NTFS:{name} Type: file", MFT_FILENAME, name, str(500000 + i)
        elif kind == "registry":
            key = f"[HKEY_LOCAL_MACHINE\\Software\\Vendor\\Component{i:07d}]"
            template = REGISTRY_WRITTEN
            desc, filename, short_desc, inode = f"{key} Value: enabled", "\\Windows\\System32\\config\\SOFTWARE", key, "-"
        else:
            template = SERVICE_EVENT
            desc = f"[7036 / 0x1b7c] Source Name: Service Control Manager Strings: ['svc{i:07d}', 'running']"
            filename, short_desc, inode = "\\Windows\\System32\\winevt\\Logs\\System.evtx", "Service Control Manager", "-"
        events.append(_PendingEvent(int(offsets[i]), start_order + i, template, desc, filename, short_desc, "-", inode))
    return events


def generate(spec: ScenarioSpec) -> Tuple[Timeline, GroundTruthManifest]:
    """Builds the timeline and manifest of a scenario; output depends only on the scenario spec."""
    if not isinstance(spec, ScenarioSpec):
        raise InvalidSpec("generate expects a ScenarioSpec")
    declared = _declared_files(spec)
    rng = np.random.default_rng(stage_seed(spec.seed, "gen"))
    start = datetime.combine(spec.start_date, time(0, 0, 0))
    span = int((datetime.combine(spec.end_date, time(23, 59, 59)) - start).total_seconds())

    # indices are shuffled so a file's name says nothing about its label
    indices = rng.permutation(len(declared)) + 1
    writer = _ClusterWriter(spec, rng, span)
    entries: List[ManifestEntry] = []
    for declared_file, index in zip(declared, indices):
        path = artefact_path(declared_file.file_type, int(index), declared_file.actions, spec.user)
        artefact = ArtefactId.from_path(path)
        writer.write(declared_file, path, inode=str(10000 + int(index)))
        tags = tuple(dict.fromkeys([declared_file.file_type] + [a.value for a in declared_file.actions]))
        entries.append(ManifestEntry(
            artefact=artefact,
            digest=synthetic_digest(spec.seed, artefact.canonical_path),
            label=declared_file.label,
            tags=tags,
        ))

    artefact_events = len(writer.pending)
    noise_count = spec.noise_events if spec.noise_events is not None else int(round(spec.noise_ratio * artefact_events))
    pending = writer.pending + _noise_events(spec, rng, span, noise_count, artefact_events)
    pending.sort(key=lambda event: (event.offset, event.order))

    events = []
    for row_id, item in enumerate(pending, start=1):
        moment = start + timedelta(seconds=item.offset)
        t = item.template
        events.append(TimelineEvent(
            row_id=row_id, date=moment.date(), time=moment.time(), timezone=spec.timezone, macb=t.macb,
            source=t.source, sourcetype=t.sourcetype, event_type=t.event_type, user=item.user, host=spec.host,
            short_desc=item.short_desc, desc=item.desc, version="2", filename=item.filename, inode=item.inode,
            notes="-", format=t.parser, extra="-",
        ))
    timeline = Timeline(events=tuple(events), source_label=f"scenario:{spec.name}")

    composition = ScenarioComposition(
        event_count=len(events),
        artefact_event_count=artefact_events,
        noise_event_count=noise_count,
        counts_by_event_type=value_counts(timeline, "type"),
        counts_by_source=value_counts(timeline, "source"),
    )
    manifest = GroundTruthManifest(
        entries=tuple(sorted(entries, key=lambda e: e.artefact.canonical_path)),
        composition=composition,
    )
    pertinent = len(manifest.with_label(Label.PERTINENT))
    logger.info(f"🧪 Generated scenario '{spec.name}': {len(entries)} files ({pertinent} pertinent), "
                f"{len(events)} events ({noise_count} noise)")
    return timeline, manifest


def _known_count(size: int, fraction: float) -> int:
    known = math.floor(fraction * size + 0.5)
    if size >= 2 and 0 < fraction < 1:
        known = min(max(known, 1), size - 1)
    return known


def known_catalog(spec: ScenarioSpec, manifest: GroundTruthManifest) -> HashCatalog:
    """Hash catalog covering a seeded share of each label's files."""
    rng = np.random.default_rng(stage_seed(spec.seed, "catalog"))
    records = []
    for label, fraction in ((Label.BENIGN, spec.known_benign_fraction), (Label.PERTINENT, spec.known_pertinent_fraction)):
        entries = manifest.with_label(label)
        chosen = sorted(rng.permutation(len(entries))[:_known_count(len(entries), fraction)].tolist())
        records += [HashRecord(digest=entries[i].digest, label=label, note=f"scenario {spec.name}") for i in chosen]
    return HashCatalog(records)


def pipeline_config(spec: ScenarioSpec) -> Dict:
    """Pipeline config for the files written by write_scenario_outputs."""
    return {
        "timeline": "timeline.csv",
        "catalog": "catalog.tsv",
        "manifest": "manifest.tsv",
        "artefacts": "artefacts.txt",
        "truth": "manifest.tsv",
        "features": {"keywords": list(spec.pertinent_keywords), "event_types": list(spec.feature_event_types)},
        "seed": spec.seed,
        "schema_name": spec.name,
    }


def write_scenario_outputs(
    spec: ScenarioSpec,
    timeline: Timeline,
    manifest: GroundTruthManifest,
    out_dir: Union[str, Path],
) -> Dict[str, Path]:
    """Writes timeline.csv, manifest.tsv, catalog.tsv, artefacts.txt, scenario.json and pipeline.json."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {name: out_dir / name for name in
             ("timeline.csv", "manifest.tsv", "catalog.tsv", "artefacts.txt", "scenario.json", "pipeline.json")}

    save_timeline(timeline, paths["timeline.csv"])
    with open(paths["manifest.tsv"], "w", encoding="utf-8", newline="") as handle:
        write_manifest(manifest.entries, handle)
    with open(paths["catalog.tsv"], "w", encoding="utf-8", newline="") as handle:
        save_catalog(known_catalog(spec, manifest), handle)
    with open(paths["artefacts.txt"], "w", encoding="utf-8", newline="") as handle:
        write_artefact_list((entry.artefact for entry in manifest.entries), handle)
    with open(paths["scenario.json"], "w", encoding="utf-8", newline="") as handle:
        summary = {"spec": spec.model_dump(mode="json"), "composition": manifest.composition.model_dump(mode="json")}
        handle.write(json.dumps(summary, indent=2) + "\n")
    with open(paths["pipeline.json"], "w", encoding="utf-8", newline="") as handle:
        handle.write(json.dumps(pipeline_config(spec), indent=2) + "\n")
    logger.info(f"✅ Wrote scenario '{spec.name}' to {out_dir}")
    return paths

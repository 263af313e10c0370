# © 2025 artefact-triage contributors. Licensed under the MIT License; see LICENSE.md.

import json
from datetime import date
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from cryptography.hazmat.primitives import hashes
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

MODEL_FORMAT_VERSION = 1
HEX_DIGITS = frozenset("0123456789abcdef")
DIGEST_ALGORITHMS = {40: "sha1", 64: "sha256"}


def sha256_hex(text: str) -> str:
    """SHA-256 hex digest of a UTF-8 string."""
    digest = hashes.Hash(hashes.SHA256())
    digest.update(text.encode("utf-8"))
    return digest.finalize().hex()


# Enumerations
class Label(str, Enum):
    BENIGN = "benign"
    PERTINENT = "pertinent"


class Classification(str, Enum):
    BENIGN = "benign"
    PERTINENT = "pertinent"
    UNKNOWN = "unknown"


class ParsePolicy(str, Enum):
    STRICT = "strict"
    LENIENT = "lenient"


class MatchField(str, Enum):
    FILENAME = "filename"
    DESC = "desc"


class FeatureKind(str, Enum):
    EVENT_COUNT = "event_count"
    SPECIAL_EVENT_FLAG = "special_event_flag"
    DATETIME_CATEGORY = "datetime_category"
    KEYWORD_COUNT = "keyword_count"


class TimeBucket(str, Enum):
    LATE_NIGHT = "late_night"
    EARLY_MORNING = "early_morning"
    MORNING = "morning"
    AFTERNOON = "afternoon"
    NIGHT = "night"


class LossKind(str, Enum):
    LOGISTIC = "logistic"
    HINGE = "hinge"


class SelectionMethod(str, Enum):
    FREQUENCY = "frequency"
    COEFFICIENT = "coefficient"


class Action(str, Enum):
    CREATION = "creation"
    DOWNLOAD = "download"
    ACCESS = "access"
    EDIT = "edit"
    EXECUTE = "execute"
    UNZIP = "unzip"
    COPY = "copy"
    MOVE = "move"
    LATE_ACCESS = "late_access"


# Timeline summary
class TimelineSummary(BaseModel):
    event_count: int = Field(0, ge=0)
    distinct_filename_count: int = Field(0, ge=0)
    counts_by_event_type: Dict[str, int] = {}
    counts_by_source: Dict[str, int] = {}
    counts_by_sourcetype: Dict[str, int] = {}

    @model_validator(mode="after")
    def check_conservation(self):
        for name in ("counts_by_event_type", "counts_by_source", "counts_by_sourcetype"):
            if sum(getattr(self, name).values()) != self.event_count:
                raise ValueError(f"{name} does not sum to event_count")
        if self.distinct_filename_count > self.event_count:
            raise ValueError("distinct_filename_count exceeds event_count")
        return self


# Artefact schemas
class ArtefactId(BaseModel):
    """A file artefact: its canonical path plus historical or alternate names."""
    model_config = ConfigDict(frozen=True)

    canonical_path: str = Field(..., min_length=1)
    aliases: Tuple[str, ...] = ()

    @model_validator(mode="after")
    def check_aliases(self):
        folded = [alias.lower() for alias in self.aliases]
        if len(set(folded)) != len(folded):
            raise ValueError("aliases must not contain duplicates")
        if self.canonical_path.lower() in folded:
            raise ValueError("aliases must not repeat the canonical path")
        return self

    @classmethod
    def from_path(cls, path: str, aliases=()) -> "ArtefactId":
        """Builds a normalized ArtefactId, dropping repeated aliases."""
        canonical = normalize_path(path)
        kept = []
        seen = {canonical.lower()}
        for alias in aliases:
            alias = normalize_path(alias)
            if alias and alias.lower() not in seen:
                seen.add(alias.lower())
                kept.append(alias)
        return cls(canonical_path=canonical, aliases=tuple(kept))

    @property
    def names(self) -> Tuple[str, ...]:
        return (self.canonical_path,) + self.aliases


def normalize_path(path: str) -> str:
    """Maps backslashes to forward slashes and trims whitespace and trailing separators."""
    normalized = path.strip().replace("\\", "/")
    if len(normalized) > 1:
        normalized = normalized.rstrip("/")
    return normalized


class ArtefactTimeline(BaseModel):
    model_config = ConfigDict(frozen=True)

    artefact: ArtefactId
    row_ids: Tuple[int, ...] = ()
    match_fields: Tuple[MatchField, ...] = ()

    @model_validator(mode="after")
    def check_rows(self):
        if len(self.row_ids) != len(self.match_fields):
            raise ValueError("row_ids and match_fields must align")
        if any(a >= b for a, b in zip(self.row_ids, self.row_ids[1:])):
            raise ValueError("row_ids must be strictly increasing")
        return self


class ArtefactIndex(BaseModel):
    model_config = ConfigDict(frozen=True)

    source_label: str = ""
    # keyed by lowercased canonical path, in artefact input order
    timelines: Dict[str, ArtefactTimeline] = {}

    def get(self, artefact: ArtefactId) -> Optional[ArtefactTimeline]:
        return self.timelines.get(artefact.canonical_path.lower())

    @property
    def artefacts(self) -> List[ArtefactId]:
        return [entry.artefact for entry in self.timelines.values()]


# Feature schemas
class FeatureDef(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str = Field(..., min_length=1)
    kind: FeatureKind
    parameter: str = ""


class FeatureSchema(BaseModel):
    """Ordered feature definitions; the order is the vector layout."""
    model_config = ConfigDict(frozen=True)

    name: str = "default"
    features: Tuple[FeatureDef, ...] = ()

    @field_validator("features")
    @classmethod
    def unique_names(cls, features):
        names = [feature.name for feature in features]
        if len(set(names)) != len(names):
            raise ValueError("feature names must be unique")
        return features

    def __len__(self) -> int:
        return len(self.features)

    @property
    def names(self) -> List[str]:
        return [feature.name for feature in self.features]

    @property
    def fingerprint(self) -> str:
        payload = [[f.name, f.kind.value, f.parameter] for f in self.features]
        return sha256_hex(json.dumps(payload, separators=(",", ":")))

    @classmethod
    def generic(cls, size: int, name: str = "generic") -> "FeatureSchema":
        """Anonymous count features x0..x{size-1}, for raw matrices."""
        return cls(name=name, features=tuple(
            FeatureDef(name=f"x{i}", kind=FeatureKind.EVENT_COUNT, parameter=f"x{i}")
            for i in range(size)
        ))


class FeatureVector(BaseModel):
    model_config = ConfigDict(frozen=True)

    artefact: ArtefactId
    values: Tuple[float, ...]
    schema_fingerprint: str = ""


class DatetimeCategory(BaseModel):
    model_config = ConfigDict(frozen=True)

    month: int = Field(..., ge=1, le=12)
    weekday: int = Field(..., ge=0, le=6)
    is_workday: bool
    time_bucket: TimeBucket


class ScalingParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    means: Tuple[float, ...]
    stds: Tuple[float, ...]
    constant_flags: Tuple[bool, ...]

    @model_validator(mode="after")
    def check_params(self):
        if not len(self.means) == len(self.stds) == len(self.constant_flags):
            raise ValueError("scaling parameter lengths differ")
        if any(std <= 0 for std in self.stds):
            raise ValueError("standard deviations must be positive")
        return self

    @classmethod
    def identity(cls, size: int) -> "ScalingParams":
        return cls(means=(0.0,) * size, stds=(1.0,) * size, constant_flags=(False,) * size)


class FeatureConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    keywords: List[str] = []
    top_k: int = Field(5, ge=0, description="Most frequent event types and sources to count")
    event_types: List[str] = Field([], description="Event types always counted, beyond the top-k")
    auto_discover: bool = True
    discover_limit: int = Field(10, ge=0)
    min_token_length: int = Field(3, ge=1)
    select_k: Optional[int] = Field(None, ge=1)
    select_method: SelectionMethod = SelectionMethod.COEFFICIENT


# Model schemas
class Hyperparams(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    learning_rate: float = Field(0.1, gt=0)
    epochs: int = Field(500, gt=0)
    l2_lambda: float = Field(0.01, ge=0)
    positive_class_weight: Optional[float] = Field(None, gt=0, description="Defaults to N_neg/N_pos")
    seed: int = 0
    batch_size: Optional[int] = Field(None, ge=1, description="Full batch when unset")


class ModelConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    loss_kind: LossKind = LossKind.LOGISTIC
    hyperparams: Hyperparams = Hyperparams()


class LinearModel(BaseModel):
    model_config = ConfigDict(frozen=True)

    version: int = MODEL_FORMAT_VERSION
    loss_kind: LossKind
    feature_names: Tuple[str, ...]
    weights: Tuple[float, ...]
    bias: float
    scaling: ScalingParams
    hyperparams: Hyperparams
    training_seed: int
    schema_fingerprint: str

    @model_validator(mode="after")
    def check_lengths(self):
        if not len(self.weights) == len(self.feature_names) == len(self.scaling.means):
            raise ValueError("weights, feature_names and scaling must have equal length")
        return self


class Score(BaseModel):
    decision: float
    probability: Optional[float] = None


# Hash catalog schemas
class HashRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    digest: str
    label: Label
    note: str = ""

    @field_validator("digest")
    @classmethod
    def validate_digest(cls, v):
        v = v.strip().lower()
        if len(v) not in DIGEST_ALGORITHMS or not set(v) <= HEX_DIGITS:
            raise ValueError("digest must be 40 (SHA-1) or 64 (SHA-256) hex characters")
        return v

    @property
    def algorithm(self) -> str:
        return DIGEST_ALGORITHMS[len(self.digest)]


class LabeledPartition(BaseModel):
    model_config = ConfigDict(frozen=True)

    known_benign: Tuple[ArtefactId, ...] = ()
    known_pertinent: Tuple[ArtefactId, ...] = ()
    unknown: Tuple[ArtefactId, ...] = ()

    @model_validator(mode="after")
    def check_disjoint(self):
        groups = [self.known_benign, self.known_pertinent, self.unknown]
        paths = [a.canonical_path.lower() for group in groups for a in group]
        if len(set(paths)) != len(paths):
            raise ValueError("partition groups must be disjoint")
        return self

    @property
    def sizes(self) -> Tuple[int, int, int]:
        return len(self.known_benign), len(self.known_pertinent), len(self.unknown)


# Ranking schemas
class ReportModelInfo(BaseModel):
    schema_fingerprint: str
    schema_name: str
    loss_kind: LossKind


class RankedItem(BaseModel):
    rank: int = Field(..., ge=1)
    path: str
    score: float
    probability: Optional[float] = None


class RankedReport(BaseModel):
    model: Optional[ReportModelInfo] = None
    generated_at: Optional[str] = None
    items: Tuple[RankedItem, ...] = ()
    recall: Optional[Dict[str, float]] = None

    @model_validator(mode="after")
    def check_order(self):
        for before, after in zip(self.items, self.items[1:]):
            if after.score > before.score or (after.score == before.score and after.path < before.path):
                raise ValueError("items must be ordered by score desc, then path asc")
        if self.recall:
            values = [self.recall[key] for key in sorted(self.recall, key=float)]
            if any(not 0.0 <= value <= 1.0 for value in values):
                raise ValueError("recall values must lie in [0, 1]")
            if any(a > b for a, b in zip(values, values[1:])):
                raise ValueError("recall must be non-decreasing in review fraction")
        return self


# Scenario schemas
class PopulationEntry(BaseModel):
    model_config = ConfigDict(extra="forbid")

    file_type: str = Field(..., min_length=1)
    actions: List[Action] = Field(..., min_length=1)
    count: int = Field(..., ge=0)


class ScenarioSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str = Field(..., min_length=1)
    benign_population: List[PopulationEntry] = []
    pertinent_population: List[PopulationEntry] = []
    benign_keywords: List[str] = []
    pertinent_keywords: List[str] = []
    feature_event_types: List[str] = Field([], description="Event types the case model counts explicitly")
    start_date: date
    end_date: date
    seed: int
    pertinent_fraction_override: Optional[float] = Field(None, gt=0, lt=1)
    noise_ratio: float = Field(10.0, ge=0, description="Noise events per artefact event")
    noise_events: Optional[int] = Field(None, ge=0, description="Explicit noise count, overrides noise_ratio")
    pertinent_keyword_rate: float = Field(0.9, ge=0, le=1)
    benign_keyword_rate: float = Field(0.02, ge=0, le=1)
    benign_vocabulary_rate: float = Field(0.5, ge=0, le=1)
    known_benign_fraction: float = Field(0.5, ge=0, le=1)
    known_pertinent_fraction: float = Field(0.5, ge=0, le=1)
    user: str = "alice"
    host: str = "WORKSTATION-01"
    timezone: str = "UTC"

    @model_validator(mode="after")
    def check_range(self):
        if self.end_date < self.start_date:
            raise ValueError("date range is empty")
        return self


class ManifestEntry(BaseModel):
    model_config = ConfigDict(frozen=True)

    artefact: ArtefactId
    digest: str
    label: Optional[Label] = None
    tags: Tuple[str, ...] = ()


class ScenarioComposition(BaseModel):
    event_count: int = 0
    artefact_event_count: int = 0
    noise_event_count: int = 0
    counts_by_event_type: Dict[str, int] = {}
    counts_by_source: Dict[str, int] = {}


class GroundTruthManifest(BaseModel):
    entries: Tuple[ManifestEntry, ...] = ()
    composition: Optional[ScenarioComposition] = None

    @field_validator("entries")
    @classmethod
    def unique_paths(cls, entries):
        paths = [entry.artefact.canonical_path.lower() for entry in entries]
        if len(set(paths)) != len(paths):
            raise ValueError("manifest paths must be unique")
        return entries

    def with_label(self, label: Label) -> List[ManifestEntry]:
        return [entry for entry in self.entries if entry.label == label]


# Pipeline configuration
class RunSettings(BaseModel):
    """The JSON config file as any subcommand reads it; flags win over file values."""
    model_config = ConfigDict(extra="forbid")

    timeline: Optional[Path] = None
    catalog: Optional[Path] = None
    manifest: Optional[Path] = None
    artefacts: Optional[Path] = None
    truth: Optional[Path] = None
    catalog_db: Optional[str] = None
    output_dir: Optional[Path] = None
    features: FeatureConfig = FeatureConfig()
    model: ModelConfig = ModelConfig()
    fractions: List[float] = [0.1, 0.2, 0.3, 0.5, 1.0]
    strict: bool = False
    seed: int = 42
    schema_name: str = "triage"

    @field_validator("fractions")
    @classmethod
    def validate_fractions(cls, v):
        if not v or any(not 0 < f <= 1 for f in v):
            raise ValueError("fractions must lie in (0, 1]")
        return sorted(set(v))


class PipelineConfig(RunSettings):
    """Everything the `pipeline` subcommand needs."""

    timeline: Path
    manifest: Path

    @model_validator(mode="after")
    def check_catalog_source(self):
        if self.catalog is None and self.catalog_db is None:
            raise ValueError("either catalog or catalog_db is required")
        return self

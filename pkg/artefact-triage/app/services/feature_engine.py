# © 2025 artefact-triage contributors. Licensed under the MIT License; see LICENSE.md.

import json
import logging
import re
from collections import Counter
from datetime import datetime
from functools import lru_cache
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Pattern, Sequence, TextIO, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import ValidationError

from app.errors import CorruptModel, DegenerateLabels, EmptyConfig, SchemaMismatch
from app.schemas import (ArtefactId, ArtefactTimeline, DatetimeCategory, FeatureConfig, FeatureDef,
                         FeatureKind, FeatureSchema, FeatureVector, Hyperparams, LossKind, ScalingParams,
                         SelectionMethod, TimeBucket)
from app.services.timeline_store import Timeline, TimelineEvent, value_counts

logger = logging.getLogger(__name__)

SPECIAL_EVENTS = [
    "File Downloaded",
    "Previous Last Time Executed",
    "Last Time Executed",
    "Document Creation Time",
    "Content Deletion Time",
]

# (first hour, bucket); each bucket runs until the next one starts
TIME_BUCKETS = [
    (0, TimeBucket.LATE_NIGHT),
    (4, TimeBucket.EARLY_MORNING),
    (8, TimeBucket.MORNING),
    (12, TimeBucket.AFTERNOON),
    (18, TimeBucket.NIGHT),
]

_TOKEN = re.compile(r"[^\W_]+")


def tokenize(text: str) -> List[str]:
    """Lowercased alphanumeric runs of a field value."""
    return _TOKEN.findall(text.lower())


def time_bucket(hour: int) -> TimeBucket:
    bucket = TIME_BUCKETS[0][1]
    for start, candidate in TIME_BUCKETS:
        if hour >= start:
            bucket = candidate
    return bucket


def categorize_datetime(timestamp: datetime) -> DatetimeCategory:
    weekday = timestamp.weekday()
    return DatetimeCategory(
        month=timestamp.month,
        weekday=weekday,
        is_workday=weekday < 5,
        time_bucket=time_bucket(timestamp.hour),
    )


def datetime_features() -> List[FeatureDef]:
    kind = FeatureKind.DATETIME_CATEGORY
    features = [FeatureDef(name=f"month:{m}", kind=kind, parameter=f"month={m}") for m in range(1, 13)]
    features += [FeatureDef(name=f"weekday:{d}", kind=kind, parameter=f"weekday={d}") for d in range(7)]
    features += [
        FeatureDef(name="day:workday", kind=kind, parameter="workday=1"),
        FeatureDef(name="day:weekend", kind=kind, parameter="workday=0"),
    ]
    features += [FeatureDef(name=f"bucket:{b.value}", kind=kind, parameter=f"bucket={b.value}") for _, b in TIME_BUCKETS]
    return features


def _datetime_parameters(category: DatetimeCategory) -> set:
    return {
        f"month={category.month}",
        f"weekday={category.weekday}",
        f"workday={1 if category.is_workday else 0}",
        f"bucket={category.time_bucket.value}",
    }


def normalize_keyword(keyword: str) -> str:
    return keyword.strip().lower()


@lru_cache(maxsize=1024)
def keyword_pattern(keyword: str) -> Optional[Pattern]:
    """Boundary-substring pattern for keywords with non-alphanumerics, None for plain tokens."""
    keyword = normalize_keyword(keyword)
    if _TOKEN.fullmatch(keyword):
        return None
    left = r"(?<![^\W_])" if _TOKEN.match(keyword[0]) else ""
    right = r"(?![^\W_])" if _TOKEN.match(keyword[-1]) else ""
    return re.compile(left + re.escape(keyword) + right)


def count_keyword(keyword: str, texts: Iterable[str]) -> int:
    keyword = normalize_keyword(keyword)
    pattern = keyword_pattern(keyword)
    if pattern is None:
        return sum(tokenize(text).count(keyword) for text in texts)
    return sum(len(pattern.findall(text.lower())) for text in texts)


def discover_keywords(
    timelines: Sequence[Sequence[TimelineEvent]],
    limit: int,
    min_length: int = 3,
    exclude: Iterable[str] = (),
) -> List[str]:
    """Tokens found in the most pertinent timelines (ties alphabetical).

    Tokens containing digits are identifiers, not keywords, and are skipped.
    """
    if limit <= 0:
        return []
    excluded = {normalize_keyword(word) for word in exclude}
    doc_freq: Counter = Counter()
    for events in timelines:
        tokens = set()
        for event in events:
            tokens.update(tokenize(event.desc))
            tokens.update(tokenize(event.filename))
        doc_freq.update(
            token for token in tokens
            if len(token) >= min_length and not any(ch.isdigit() for ch in token) and token not in excluded
        )
    ranked = sorted(doc_freq.items(), key=lambda item: (-item[1], item[0]))
    return [token for token, _ in ranked[:limit]]


def build_schema(
    config: FeatureConfig,
    pertinent_timelines: Sequence[ArtefactTimeline],
    parent: Timeline,
    name: str = "default",
) -> FeatureSchema:
    """Assembles the feature layout.

    Order: total event count, top-k event types, explicitly requested event
    types, top-k sources, special-event flags, datetime one-hots, configured
    keywords, discovered keywords. Top-k values come from the pertinent
    timelines, or from the whole timeline when no pertinent events exist.
    """
    if not config.keywords and config.top_k == 0:
        raise EmptyConfig("Feature config needs keywords or a positive top_k")

    rows = parent.by_row_id() if pertinent_timelines else {}
    pertinent_events = [[rows[row_id] for row_id in entry.row_ids] for entry in pertinent_timelines]
    pool = Timeline(events=tuple(event for events in pertinent_events for event in events))
    if not pool.events:
        pool = parent

    features = [FeatureDef(name="event_count", kind=FeatureKind.EVENT_COUNT)]
    event_types = list(value_counts(pool, "type"))[:config.top_k] if config.top_k else []
    for event_type in config.event_types:
        if event_type not in event_types:
            event_types.append(event_type)
    for event_type in event_types:
        features.append(FeatureDef(name=f"type:{event_type}", kind=FeatureKind.EVENT_COUNT, parameter=f"type={event_type}"))
    sources = list(value_counts(pool, "source"))[:config.top_k] if config.top_k else []
    for source in sources:
        features.append(FeatureDef(name=f"source:{source}", kind=FeatureKind.EVENT_COUNT, parameter=f"source={source}"))
    for special in SPECIAL_EVENTS:
        features.append(FeatureDef(name=f"flag:{special}", kind=FeatureKind.SPECIAL_EVENT_FLAG, parameter=special))
    features.extend(datetime_features())

    keywords: List[str] = []
    for keyword in config.keywords:
        keyword = normalize_keyword(keyword)
        if keyword and keyword not in keywords:
            keywords.append(keyword)
    if config.auto_discover and pertinent_events:
        discovered = discover_keywords(pertinent_events, config.discover_limit, config.min_token_length, keywords)
        logger.info(f"🔍 Discovered keywords from pertinent timelines: {discovered}")
        keywords.extend(discovered)
    for keyword in keywords:
        features.append(FeatureDef(name=f"keyword:{keyword}", kind=FeatureKind.KEYWORD_COUNT, parameter=keyword))

    schema = FeatureSchema(name=name, features=tuple(features))
    logger.info(f"📊 Built feature schema '{name}' with {len(schema)} features")
    return schema


def extract(events: Sequence[TimelineEvent], schema: FeatureSchema, artefact: ArtefactId) -> FeatureVector:
    """Feature vector of one artefact's events.

    Events are ordered by row id first, so only the datetime one-hots depend
    on event order and the result never depends on list position.
    """
    events = sorted(events, key=lambda event: event.row_id)
    type_counts = Counter(event.event_type for event in events)
    source_counts = Counter(event.source for event in events)
    texts = [event.desc for event in events] + [event.filename for event in events]
    datetime_params: set = set()
    if events:
        anchor = next((event for event in events if event.is_created), events[0])
        datetime_params = _datetime_parameters(categorize_datetime(anchor.timestamp))

    values = []
    for feature in schema.features:
        if feature.kind is FeatureKind.EVENT_COUNT:
            column, _, value = feature.parameter.partition("=")
            if column == "type":
                values.append(float(type_counts[value]))
            elif column == "source":
                values.append(float(source_counts[value]))
            else:
                values.append(float(len(events)))
        elif feature.kind is FeatureKind.SPECIAL_EVENT_FLAG:
            values.append(1.0 if type_counts[feature.parameter] else 0.0)
        elif feature.kind is FeatureKind.DATETIME_CATEGORY:
            values.append(1.0 if feature.parameter in datetime_params else 0.0)
        else:
            values.append(float(count_keyword(feature.parameter, texts)))
    return FeatureVector(artefact=artefact, values=tuple(values), schema_fingerprint=schema.fingerprint)


def as_matrix(matrix: Union[Sequence[FeatureVector], np.ndarray]) -> np.ndarray:
    if isinstance(matrix, np.ndarray):
        return matrix.astype(float)
    return np.array([vector.values for vector in matrix], dtype=float)


def standardize(matrix: Union[Sequence[FeatureVector], np.ndarray]) -> Tuple[np.ndarray, ScalingParams]:
    """Zero-mean, unit-variance columns (population stddev).

    Constant columns keep their values (mean 0, scale 1) and are flagged.
    """
    data = as_matrix(matrix)
    means = data.mean(axis=0)
    stds = data.std(axis=0)
    constant = stds == 0
    means = np.where(constant, 0.0, means)
    stds = np.where(constant, 1.0, stds)
    if constant.any():
        logger.debug(f"Constant feature columns left unscaled: {np.flatnonzero(constant).tolist()}")
    params = ScalingParams(
        means=tuple(float(m) for m in means),
        stds=tuple(float(s) for s in stds),
        constant_flags=tuple(bool(c) for c in constant),
    )
    return apply_scaling(data, params), params


def apply_scaling(matrix: Union[Sequence[FeatureVector], np.ndarray], params: ScalingParams) -> np.ndarray:
    data = as_matrix(matrix)
    return (data - np.asarray(params.means)) / np.asarray(params.stds)


def project(vectors: Sequence[FeatureVector], schema: FeatureSchema, reduced: FeatureSchema) -> List[FeatureVector]:
    """Re-aligns vectors built against ``schema`` to the layout of ``reduced``."""
    positions = {name: i for i, name in enumerate(schema.names)}
    picks = [positions[name] for name in reduced.names]
    fingerprint = reduced.fingerprint
    return [
        FeatureVector(artefact=v.artefact, values=tuple(v.values[i] for i in picks), schema_fingerprint=fingerprint)
        for v in vectors
    ]


def select_features(
    matrix: Sequence[FeatureVector],
    labels: Sequence,
    k: int,
    method: SelectionMethod,
    schema: FeatureSchema,
    loss_kind: LossKind = LossKind.LOGISTIC,
    hyperparams: Optional[Hyperparams] = None,
) -> FeatureSchema:
    """Keeps at most k features, in their original schema order.

    frequency: highest share of rows with a nonzero value; all-zero columns
    are dropped while any other column has a nonzero value.
    coefficient: largest |weight| of a model trained on the standardized
    matrix. Ties go to the earlier feature.
    """
    from app.services.relevancy_model import encode_labels, train

    if not matrix:
        raise ValueError("select_features needs a nonempty matrix")
    if len(labels) != len(matrix):
        raise ValueError("labels must align with the matrix rows")
    if k >= len(schema):
        return schema

    data = as_matrix(matrix)
    method = SelectionMethod(method)
    if method is SelectionMethod.FREQUENCY:
        strength = (data != 0).mean(axis=0)
        candidates = [i for i in range(len(schema)) if strength[i] > 0] or list(range(len(schema)))
    else:
        y = encode_labels(labels)
        if len(set(y.tolist())) < 2:
            raise DegenerateLabels("Coefficient selection needs both benign and pertinent rows")
        standardized, scaling = standardize(data)
        model = train(standardized, y, loss_kind, hyperparams or Hyperparams(), schema=schema, scaling=scaling)
        strength = np.abs(np.asarray(model.weights))
        candidates = list(range(len(schema)))

    ranked = sorted(candidates, key=lambda i: (-strength[i], i))
    keep = sorted(ranked[:k])
    reduced = FeatureSchema(name=schema.name, features=tuple(schema.features[i] for i in keep))
    logger.info(f"📊 Selected {len(reduced)} of {len(schema)} features by {method.value}: {reduced.names}")
    return reduced


def write_feature_matrix(vectors: Sequence[FeatureVector], schema: FeatureSchema, output: TextIO) -> None:
    """CSV with the artefact path first, then one column per feature."""
    frame = pd.DataFrame([v.values for v in vectors], columns=schema.names)
    frame.insert(0, "artefact", [v.artefact.canonical_path for v in vectors])
    frame.to_csv(output, index=False, lineterminator="\n")


def read_feature_matrix(source: Union[str, Path, TextIO], schema: FeatureSchema) -> List[FeatureVector]:
    """Reads a matrix written by write_feature_matrix; columns must match the schema."""
    frame = pd.read_csv(source, dtype={"artefact": str}, keep_default_na=False)
    if list(frame.columns) != ["artefact"] + schema.names:
        raise SchemaMismatch(f"Feature matrix columns do not match schema '{schema.name}'")
    fingerprint = schema.fingerprint
    values = frame[schema.names].to_numpy(dtype=float)
    return [
        FeatureVector(artefact=ArtefactId.from_path(path), values=tuple(float(v) for v in row), schema_fingerprint=fingerprint)
        for path, row in zip(frame["artefact"], values)
    ]


def save_schema(schema: FeatureSchema, path: Union[str, Path]) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(schema.model_dump_json(indent=2) + "\n")


def load_schema(path: Union[str, Path]) -> FeatureSchema:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            return FeatureSchema.model_validate(json.load(handle))
    except (json.JSONDecodeError, ValidationError) as e:
        raise CorruptModel(f"Feature schema {path} is unreadable: {e}")


def schema_summary(schema: FeatureSchema) -> Dict[str, int]:
    return dict(Counter(feature.kind.value for feature in schema.features))

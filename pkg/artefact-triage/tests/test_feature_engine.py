# © 2025 artefact-triage contributors. Licensed under the MIT License; see LICENSE.md.

import io
import random
from datetime import datetime, timedelta

import numpy as np
import pytest

from app.errors import CorruptModel, DegenerateLabels, EmptyConfig, SchemaMismatch
from app.schemas import (ArtefactId, ArtefactTimeline, FeatureConfig, FeatureKind, FeatureSchema, FeatureVector,
                         Hyperparams, Label, MatchField, SelectionMethod, TimeBucket)
from app.services.feature_engine import (build_schema, categorize_datetime, count_keyword, discover_keywords, extract,
                                         load_schema, project, read_feature_matrix, save_schema, schema_summary,
                                         select_features, standardize, tokenize, write_feature_matrix)
from app.services.relevancy_model import coefficients, train
from app.services.timeline_store import Timeline

ARTEFACT = ArtefactId.from_path("/home/u/invoice.pdf")


def pertinent_entry(timeline: Timeline, path: str = "/home/u/invoice.pdf") -> ArtefactTimeline:
    row_ids = tuple(event.row_id for event in timeline.events)
    return ArtefactTimeline(artefact=ArtefactId.from_path(path), row_ids=row_ids, match_fields=(MatchField.DESC,) * len(row_ids))


def vectors(rows, schema=None):
    schema = schema or FeatureSchema.generic(len(rows[0]))
    return [
        FeatureVector(artefact=ArtefactId.from_path(f"/f{i}"), values=tuple(float(v) for v in row), schema_fingerprint=schema.fingerprint)
        for i, row in enumerate(rows)
    ]


# Datetime categories

def test_monday_morning():
    category = categorize_datetime(datetime(2020, 6, 1, 10, 30))
    assert (category.month, category.weekday, category.is_workday) == (6, 0, True)
    assert category.time_bucket is TimeBucket.MORNING


def test_bucket_boundaries_are_inclusive_left():
    assert categorize_datetime(datetime(2020, 6, 1, 0, 0, 0)).time_bucket is TimeBucket.LATE_NIGHT
    assert categorize_datetime(datetime(2020, 6, 1, 3, 59, 59)).time_bucket is TimeBucket.LATE_NIGHT
    assert categorize_datetime(datetime(2020, 6, 1, 4, 0, 0)).time_bucket is TimeBucket.EARLY_MORNING
    assert categorize_datetime(datetime(2020, 6, 1, 18, 0, 0)).time_bucket is TimeBucket.NIGHT


def test_saturday_noon():
    category = categorize_datetime(datetime(2020, 6, 6, 12, 0))
    assert category.weekday == 5
    assert category.is_workday is False
    assert category.time_bucket is TimeBucket.AFTERNOON


def test_every_minute_of_a_week_falls_in_exactly_one_bucket():
    expected = [(0, 4, TimeBucket.LATE_NIGHT), (4, 8, TimeBucket.EARLY_MORNING), (8, 12, TimeBucket.MORNING),
                (12, 18, TimeBucket.AFTERNOON), (18, 24, TimeBucket.NIGHT)]
    start = datetime(2020, 6, 1)
    for minute in range(7 * 24 * 60):
        moment = start + timedelta(minutes=minute)
        category = categorize_datetime(moment)
        matching = [bucket for low, high, bucket in expected if low <= moment.hour < high]
        assert matching == [category.time_bucket]
        assert category.is_workday == (moment.weekday() < 5)


# Keywords

def test_tokenize_splits_on_non_alphanumerics():
    assert tokenize("NTFS:\\Users\\a\\copy_of-Script.PY (hack)") == ["ntfs", "users", "a", "copy", "of", "script", "py", "hack"]


def test_plain_keyword_matches_whole_tokens_only():
    assert count_keyword("py", ["copy of script.py"]) == 1
    assert count_keyword("PY", ["script.py", "other.py"]) == 2
    assert count_keyword("py", ["copy happy python"]) == 0


def test_keyword_with_punctuation_uses_boundary_substring():
    assert count_keyword(".py", ["copy of script.py", "script.pyc", "a.py b.py"]) == 3


def test_discovery_ranks_by_document_frequency(make_event):
    timelines = [
        [make_event(1, desc="unzip hack tool"), make_event(2, desc="unzip again")],
        [make_event(3, desc="hack file_01 zz")],
        [make_event(4, desc="hack")],
    ]
    assert discover_keywords(timelines, limit=2) == ["hack", "again"]
    assert discover_keywords(timelines, limit=10, exclude=["hack"]) == ["again", "file", "tool", "unzip"]
    assert discover_keywords(timelines, limit=0) == []


# Schema construction

def test_minimal_schema_size(make_event):
    parent = Timeline(events=(make_event(1),))
    schema = build_schema(FeatureConfig(keywords=["x"], top_k=0), [], parent)

    assert len(schema) == 1 + 5 + 26 + 1
    assert schema_summary(schema) == {"event_count": 1, "special_event_flag": 5, "datetime_category": 26, "keyword_count": 1}
    assert schema.names[0] == "event_count"
    assert schema.names[-1] == "keyword:x"


def test_empty_config_is_rejected(make_event):
    with pytest.raises(EmptyConfig):
        build_schema(FeatureConfig(top_k=0), [], Timeline(events=(make_event(1),)))


def test_media_case_keywords_become_features(make_event):
    config = FeatureConfig(keywords=["chrome", "child", "png", "jpg", "MFT"], top_k=0)
    schema = build_schema(config, [], Timeline(events=(make_event(1),)))
    keywords = [f.parameter for f in schema.features if f.kind is FeatureKind.KEYWORD_COUNT]
    assert keywords == ["chrome", "child", "png", "jpg", "mft"]


def test_discovered_keyword_added_once(make_event):
    parent = Timeline(events=(make_event(1, desc="NTFS:/home/u/invoice.pdf unzip"), make_event(2, desc="unzip done /home/u/invoice.pdf")))
    for keywords in ([], ["unzip"], ["UNZIP"]):
        schema = build_schema(FeatureConfig(keywords=keywords, top_k=2), [pertinent_entry(parent)], parent)
        assert schema.names.count("keyword:unzip") == 1


def test_top_k_event_types_and_sources_from_pertinent_events(make_event):
    parent = Timeline(events=(
        make_event(1, desc="/home/u/invoice.pdf", event_type="Creation Time"),
        make_event(2, desc="/home/u/invoice.pdf", event_type="Creation Time"),
        make_event(3, desc="/home/u/invoice.pdf", event_type="File Downloaded", source="WEBHIST"),
        make_event(4, desc="/sys/noise.dll", event_type="Registry Key", source="REG"),
    ))
    entry = ArtefactTimeline(artefact=ARTEFACT, row_ids=(1, 2, 3), match_fields=(MatchField.DESC,) * 3)
    config = FeatureConfig(top_k=1, event_types=["Last Access Time", "Creation Time"], auto_discover=False)
    schema = build_schema(config, [entry], parent)

    assert schema.names[:4] == ["event_count", "type:Creation Time", "type:Last Access Time", "source:FILE"]


def test_repeated_event_types_are_counted_once(make_event):
    parent = Timeline(events=(make_event(1, desc="/home/u/invoice.pdf", event_type="Creation Time"),))
    config = FeatureConfig(top_k=1, event_types=["Creation Time", "File Downloaded", "File Downloaded"],
                           auto_discover=False)
    schema = build_schema(config, [pertinent_entry(parent)], parent)

    type_names = [name for name in schema.names if name.startswith("type:")]
    assert type_names == ["type:Creation Time", "type:File Downloaded"]


# Extraction

@pytest.fixture
def schema(make_event):
    return build_schema(FeatureConfig(keywords=["invoice", ".py"], top_k=0), [], Timeline(events=(make_event(1),)))


def value(vector, schema, name):
    return vector.values[schema.names.index(name)]


def test_no_events_give_all_zero_vector(schema):
    vector = extract([], schema, ARTEFACT)
    assert vector.values == (0.0,) * len(schema)
    assert vector.schema_fingerprint == schema.fingerprint


def test_counts_and_special_flags(schema, make_event):
    events = [make_event(1), make_event(2, event_type="File Downloaded", source="WEBHIST"), make_event(3)]
    vector = extract(events, schema, ARTEFACT)

    assert value(vector, schema, "event_count") == 3
    assert value(vector, schema, "flag:File Downloaded") == 1
    assert value(vector, schema, "flag:Last Time Executed") == 0


def test_keyword_counts_across_rows(schema, make_event):
    events = [make_event(1, desc="Invoice draft"), make_event(2, desc="sent invoice to script.py"), make_event(3, desc="invoices")]
    vector = extract(events, schema, ARTEFACT)

    assert value(vector, schema, "keyword:invoice") == 2
    assert value(vector, schema, "keyword:.py") == 1


def test_datetime_one_hots_follow_creation_event(schema, make_event):
    events = [
        make_event(1, when=(2020, 6, 6, 12, 0, 0)),
        make_event(2, macb=(False, False, False, True), when=(2020, 6, 1, 10, 30, 0)),
    ]
    vector = extract(events, schema, ARTEFACT)
    hot = {name for name, v in zip(schema.names, vector.values) if v and name.split(":")[0] in ("month", "weekday", "day", "bucket")}
    assert hot == {"month:6", "weekday:0", "day:workday", "bucket:morning"}


def test_extraction_ignores_list_order(schema, make_event):
    events = [make_event(i, desc=f"invoice {i}", event_type=random.choice(["A", "File Downloaded"]),
                         when=(2020, 1 + i % 12, 1 + i, i, 0, 0)) for i in range(1, 20)]
    expected = extract(events, schema, ARTEFACT)
    rng = random.Random(5)
    for _ in range(10):
        shuffled = events[:]
        rng.shuffle(shuffled)
        assert extract(shuffled, schema, ARTEFACT) == expected


# Scaling

def test_standardize_uses_population_stddev():
    data, params = standardize(np.array([[1.0, 5.0], [3.0, 5.0]]))
    assert data[:, 0].tolist() == [-1.0, 1.0]
    assert data[:, 1].tolist() == [5.0, 5.0]
    assert params.constant_flags == (False, True)
    assert params.means == (2.0, 0.0)
    assert params.stds == (1.0, 1.0)


# Selection

def test_selection_returns_schema_when_k_covers_it():
    rows = vectors([[1, 0], [0, 1]])
    schema = FeatureSchema.generic(2)
    assert select_features(rows, [Label.BENIGN, Label.PERTINENT], 2, SelectionMethod.FREQUENCY, schema) is schema


def test_frequency_never_picks_all_zero_column():
    schema = FeatureSchema.generic(3)
    rows = vectors([[0, 1, 0], [0, 1, 2], [0, 0, 0], [0, 3, 0]], schema)
    labels = [Label.BENIGN, Label.PERTINENT, Label.BENIGN, Label.PERTINENT]

    assert select_features(rows, labels, 2, SelectionMethod.FREQUENCY, schema).names == ["x1", "x2"]
    assert select_features(rows, labels, 1, SelectionMethod.FREQUENCY, schema).names == ["x1"]


def test_coefficient_selection_keeps_separating_feature():
    schema = FeatureSchema.generic(2)
    # x1 separates the labels; x2 sums to zero within each class
    rows = vectors([[1, 1], [1, -1], [1, 0], [-1, 1], [-1, -1], [-1, 0]], schema)
    labels = [Label.PERTINENT] * 3 + [Label.BENIGN] * 3
    reduced = select_features(rows, labels, 1, SelectionMethod.COEFFICIENT, schema, hyperparams=Hyperparams(epochs=200))
    assert reduced.names == ["x0"]


@pytest.mark.parametrize("k", [1, 3, 5])
def test_coefficient_selection_agrees_with_reported_coefficients(k):
    rng = np.random.default_rng(31)
    data = rng.normal(size=(40, 7)) * np.array([1.0, 3.0, 0.5, 2.0, 1.0, 4.0, 1.0])
    labels = np.where(data[:, 1] - 0.5 * data[:, 3] + 0.2 * rng.normal(size=40) > 0, 1, -1)
    schema = FeatureSchema.generic(7)
    hyperparams = Hyperparams(epochs=300)

    standardized, scaling = standardize(data)
    model = train(standardized, labels, hyperparams=hyperparams, schema=schema, scaling=scaling)
    pairs, _ = coefficients(model)
    ranked = sorted(range(len(pairs)), key=lambda i: (-abs(pairs[i][1]), i))
    expected = [pairs[i][0] for i in sorted(ranked[:k])]

    reduced = select_features(vectors(data.tolist(), schema), labels.tolist(), k, SelectionMethod.COEFFICIENT, schema,
                              hyperparams=hyperparams)
    assert reduced.names == expected


def test_coefficient_selection_needs_both_labels():
    schema = FeatureSchema.generic(2)
    with pytest.raises(DegenerateLabels):
        select_features(vectors([[1, 2], [3, 4]], schema), [Label.BENIGN] * 2, 1, SelectionMethod.COEFFICIENT, schema)


def test_project_realigns_values():
    schema = FeatureSchema.generic(3)
    reduced = FeatureSchema(name=schema.name, features=(schema.features[2], schema.features[0]))
    projected = project(vectors([[1, 2, 3]], schema), schema, reduced)

    assert projected[0].values == (3.0, 1.0)
    assert projected[0].schema_fingerprint == reduced.fingerprint


# Persistence

def test_schema_save_and_load(schema, tmp_path):
    path = tmp_path / "schema.json"
    save_schema(schema, path)
    loaded = load_schema(path)
    assert loaded == schema
    assert loaded.fingerprint == schema.fingerprint


def test_corrupt_schema_file(tmp_path):
    path = tmp_path / "schema.json"
    path.write_text("{not json")
    with pytest.raises(CorruptModel):
        load_schema(path)


def test_feature_matrix_written_and_read_back():
    schema = FeatureSchema.generic(2)
    rows = vectors([[1, 2.5], [0, 4]], schema)
    sink = io.StringIO()
    write_feature_matrix(rows, schema, sink)

    assert sink.getvalue().splitlines()[0] == "artefact,x0,x1"
    assert read_feature_matrix(io.StringIO(sink.getvalue()), schema) == rows
    with pytest.raises(SchemaMismatch):
        read_feature_matrix(io.StringIO(sink.getvalue()), FeatureSchema.generic(3))

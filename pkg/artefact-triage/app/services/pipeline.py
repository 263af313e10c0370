# © 2025 artefact-triage contributors. Licensed under the MIT License; see LICENSE.md.

"""The six triage steps: partition, index, features, training, scoring, ranking.

Each step runs inside a named stage; a TriageError raised inside it surfaces
as PipelineStageError with the stage name and the original exit code.
"""

import json
import logging
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterator, List, Optional

from app.config import catalog_db_url, output_dir, report_timestamp, stage_seed
from app.database.database import get_session
from app.errors import EmptyTruth, PipelineStageError, SingleClass, TriageError
from app.schemas import (ArtefactId, FeatureSchema, Label, LabeledPartition, LinearModel, ParsePolicy,
                         PipelineConfig, RankedReport, ReportModelInfo)
from app.services import feature_engine, hash_catalog, ranking_eval, relevancy_model
from app.services.artefact_index import build_index, events_by_artefact, merge_aliases, read_artefact_list, write_artefact_timelines
from app.services.timeline_store import latest_timestamp, read_timeline

logger = logging.getLogger(__name__)


@dataclass
class PipelineResult:
    partition: LabeledPartition
    schema: FeatureSchema
    model: LinearModel
    report: RankedReport
    outputs: Dict[str, Path] = field(default_factory=dict)


@contextmanager
def stage(name: str) -> Iterator[None]:
    logger.info(f"🚀 Stage '{name}'")
    try:
        yield
    except PipelineStageError:
        raise
    except TriageError as e:
        raise PipelineStageError(name, e) from e


def _partition_json(partition: LabeledPartition) -> str:
    payload = {
        "known_benign": [a.canonical_path for a in partition.known_benign],
        "known_pertinent": [a.canonical_path for a in partition.known_pertinent],
        "unknown": [a.canonical_path for a in partition.unknown],
    }
    return json.dumps(payload, indent=2) + "\n"


def _load_catalog(config: PipelineConfig) -> hash_catalog.HashCatalog:
    if config.catalog is not None:
        return hash_catalog.read_catalog(config.catalog)
    with get_session(catalog_db_url(config.catalog_db)) as session:
        return hash_catalog.load_catalog_from_db(session)


def _truth(config: PipelineConfig, partition: LabeledPartition) -> Optional[List[ArtefactId]]:
    """Pertinent artefacts of the truth manifest that were ranked (known ones are excluded)."""
    if config.truth is None:
        return None
    unknown = {a.canonical_path.lower() for a in partition.unknown}
    truth = [
        entry.artefact for entry in hash_catalog.read_manifest(config.truth)
        if entry.label is Label.PERTINENT and entry.artefact.canonical_path.lower() in unknown
    ]
    if not truth:
        raise EmptyTruth("Ground truth holds no pertinent artefact among the unknown files")
    return truth


def _require_both_classes(partition: LabeledPartition) -> None:
    benign, pertinent, _ = partition.sizes
    if not benign or not pertinent:
        raise SingleClass(f"Catalog matched {benign} benign and {pertinent} pertinent artefacts; training needs both")


def run_pipeline(config: PipelineConfig, out_dir: Optional[Path] = None) -> PipelineResult:
    out = output_dir(out_dir or config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    outputs: Dict[str, Path] = {}
    policy = ParsePolicy.STRICT if config.strict else ParsePolicy.LENIENT

    with stage("load"):
        timeline = read_timeline(config.timeline, policy=policy)
        manifest = hash_catalog.read_manifest(config.manifest)
        catalog = _load_catalog(config)

    with stage("partition"):
        pairs = hash_catalog.manifest_pairs(manifest)
        if config.artefacts is not None:
            merged = merge_aliases([artefact for artefact, _ in pairs], read_artefact_list(config.artefacts))
            pairs = [(artefact, digest) for artefact, (_, digest) in zip(merged, pairs)]
        partition = hash_catalog.partition(catalog, pairs)
        outputs["partition"] = out / "partition.json"
        outputs["partition"].write_text(_partition_json(partition), encoding="utf-8")

    with stage("index"):
        index = build_index(timeline, [artefact for artefact, _ in pairs])
        write_artefact_timelines(index, timeline, out / "timelines")
        outputs["timelines"] = out / "timelines"
        grouped = events_by_artefact(index, timeline)

    with stage("features"):
        pertinent_timelines = [index.get(a) for a in partition.known_pertinent]
        schema = feature_engine.build_schema(config.features, pertinent_timelines, timeline, name=config.schema_name)
        known = list(partition.known_benign) + list(partition.known_pertinent)
        labels = [Label.BENIGN] * len(partition.known_benign) + [Label.PERTINENT] * len(partition.known_pertinent)

        def vectors(artefacts):
            return [feature_engine.extract(grouped[a.canonical_path.lower()], schema, a) for a in artefacts]

        known_vectors, unknown_vectors = vectors(known), vectors(partition.unknown)

    hyperparams = config.model.hyperparams
    if config.features.select_k is not None:
        with stage("select"):
            _require_both_classes(partition)
            select_params = hyperparams.model_copy(update={"seed": stage_seed(config.seed, "select")})
            reduced = feature_engine.select_features(
                known_vectors, labels, config.features.select_k, config.features.select_method, schema,
                loss_kind=config.model.loss_kind, hyperparams=select_params,
            )
            known_vectors = feature_engine.project(known_vectors, schema, reduced)
            unknown_vectors = feature_engine.project(unknown_vectors, schema, reduced)
            schema = reduced

    feature_engine.save_schema(schema, out / "schema.json")
    outputs["schema"] = out / "schema.json"
    for name, rows in (("features_known", known_vectors), ("features_unknown", unknown_vectors)):
        outputs[name] = out / f"{name}.csv"
        with open(outputs[name], "w", encoding="utf-8", newline="") as handle:
            feature_engine.write_feature_matrix(rows, schema, handle)

    with stage("train"):
        _require_both_classes(partition)
        standardized, scaling = feature_engine.standardize(known_vectors)
        train_params = hyperparams.model_copy(update={"seed": stage_seed(config.seed, "train")})
        model = relevancy_model.train(
            standardized, labels, config.model.loss_kind, train_params,
            schema=schema, scaling=scaling,
        )
        outputs["model"] = out / "model.json"
        relevancy_model.save_model(model, outputs["model"])

    with stage("score"):
        scores = relevancy_model.score_all(model, unknown_vectors)
        generated_at = report_timestamp()
        if generated_at is None:
            latest = latest_timestamp(timeline)
            generated_at = latest.isoformat() if latest else None
        info = ReportModelInfo(schema_fingerprint=schema.fingerprint, schema_name=schema.name, loss_kind=model.loss_kind)
        report = ranking_eval.rank(
            [(vector.artefact, s) for vector, s in zip(unknown_vectors, scores)],
            model=info, generated_at=generated_at,
        )

    with stage("evaluate"):
        truth = _truth(config, partition)
        if truth is not None:
            report = ranking_eval.with_recall(report, truth, config.fractions)
        outputs["report"], outputs["report_text"] = ranking_eval.write_report(report, out)

    logger.info(f"✅ Pipeline finished: ranked {len(report.items)} unknown artefacts into {out}")
    return PipelineResult(partition=partition, schema=schema, model=model, report=report, outputs=outputs)

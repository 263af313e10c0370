# © 2025 artefact-triage contributors. Licensed under the MIT License; see LICENSE.md.

"""`train` and `score`: relevancy models over exported feature matrices."""

import argparse
import json
import logging
from pathlib import Path
from typing import Dict

import pandas as pd

from app.commands.common import common_options, out_dir, print_json, run_settings
from app.config import stage_seed
from app.errors import InvalidConfig
from app.schemas import Label, LossKind
from app.services.feature_engine import load_schema, read_feature_matrix, standardize
from app.services.hash_catalog import read_manifest
from app.services.relevancy_model import coefficients, load_model, save_model, score_all, train

logger = logging.getLogger(__name__)


def read_labels(path: Path) -> Dict[str, Label]:
    """Artefact labels from a partition JSON (known sets) or a labelled manifest."""
    if str(path).endswith(".json"):
        with open(path, "r", encoding="utf-8") as handle:
            payload = json.load(handle)
        labels = {p.lower(): Label.BENIGN for p in payload.get("known_benign", [])}
        labels.update({p.lower(): Label.PERTINENT for p in payload.get("known_pertinent", [])})
        return labels
    return {e.artefact.canonical_path.lower(): e.label for e in read_manifest(path) if e.label is not None}


def run_train(args: argparse.Namespace) -> int:
    settings = run_settings(args, model={
        "loss_kind": args.loss,
        "hyperparams": {
            "learning_rate": args.learning_rate, "epochs": args.epochs, "l2_lambda": args.l2,
            "positive_class_weight": args.positive_weight, "batch_size": args.batch_size,
        },
    })
    schema = load_schema(args.schema)
    vectors = read_feature_matrix(args.features, schema)
    known = read_labels(args.labels)
    rows = [v for v in vectors if v.artefact.canonical_path.lower() in known]
    if len(rows) < len(vectors):
        logger.warning(f"⚠️ {len(vectors) - len(rows)} feature rows have no label and are left out")
    if not rows:
        raise InvalidConfig("No feature row carries a label")
    labels = [known[v.artefact.canonical_path.lower()] for v in rows]

    hyperparams = settings.model.hyperparams.model_copy(update={"seed": stage_seed(settings.seed, "train")})
    standardized, scaling = standardize(rows)
    model = train(standardized, labels, settings.model.loss_kind, hyperparams, schema=schema, scaling=scaling)
    path = out_dir(args, settings) / "model.json"
    save_model(model, path)
    named, bias = coefficients(model)
    print_json({"model": str(path), "bias": bias, "coefficients": dict(named)})
    return 0


def run_score(args: argparse.Namespace) -> int:
    settings = run_settings(args)
    model = load_model(args.model)
    vectors = read_feature_matrix(args.features, load_schema(args.schema))
    scores = score_all(model, vectors)
    frame = pd.DataFrame({
        "artefact": [v.artefact.canonical_path for v in vectors],
        "score": [s.decision for s in scores],
        "probability": [s.probability for s in scores],
    })
    path = out_dir(args, settings) / "scores.csv"
    frame.to_csv(path, index=False, lineterminator="\n")
    logger.info(f"✅ Scored {len(vectors)} artefacts into {path}")
    return 0


def register(subparsers) -> None:
    common = common_options()

    parser = subparsers.add_parser("train", parents=[common], help="Train a relevancy model on labelled features")
    parser.add_argument("--features", required=True, help="Feature matrix csv")
    parser.add_argument("--schema", required=True, help="Feature schema JSON")
    parser.add_argument("--labels", required=True, help="partition.json or a labelled manifest")
    parser.add_argument("--loss", choices=[k.value for k in LossKind], help="Loss kind (default: logistic)")
    parser.add_argument("--learning-rate", type=float, help="Gradient step (default 0.1)")
    parser.add_argument("--epochs", type=int, help="Passes over the training rows (default 500)")
    parser.add_argument("--l2", type=float, help="L2 penalty (default 0.01)")
    parser.add_argument("--positive-weight", type=float, help="Pertinent class weight (default N_neg/N_pos)")
    parser.add_argument("--batch-size", type=int, help="Mini-batch size (default: full batch)")
    parser.set_defaults(handler=run_train)

    parser = subparsers.add_parser("score", parents=[common], help="Score a feature matrix with a trained model")
    parser.add_argument("--model", required=True, help="model.json")
    parser.add_argument("--features", required=True, help="Feature matrix csv")
    parser.add_argument("--schema", required=True, help="Feature schema JSON")
    parser.set_defaults(handler=run_score)

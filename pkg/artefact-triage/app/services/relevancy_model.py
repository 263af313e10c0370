# © 2025 artefact-triage contributors. Licensed under the MIT License; see LICENSE.md.

"""Linear relevancy models: class-weighted logistic regression and hinge-loss SVM.

Both minimize

    mean_i cw_i * loss(y_i * (w.x_i + b)) + l2_lambda * ||w||^2

with labels encoded as -1 (benign) / +1 (pertinent) and cw_i the class
weight of row i (positive_class_weight for pertinent rows, 1 otherwise).
The relevancy score is the decision value w.x + b on standardized features.
"""

import json
import logging
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import ValidationError

from app.errors import CorruptModel, NonFiniteLoss, SchemaMismatch, SingleClass, VersionMismatch
from app.schemas import (FeatureSchema, FeatureVector, Hyperparams, Label, LinearModel, LossKind,
                         MODEL_FORMAT_VERSION, ScalingParams, Score)
from app.services.feature_engine import apply_scaling, as_matrix

logger = logging.getLogger(__name__)

_PERTINENT = {Label.PERTINENT, Label.PERTINENT.value, 1, True}
_BENIGN = {Label.BENIGN, Label.BENIGN.value, 0, -1, False}


def encode_labels(labels: Sequence) -> np.ndarray:
    """Maps labels (Label, "benign"/"pertinent", 0/-1/1) to -1/+1."""
    encoded = []
    for label in labels:
        if isinstance(label, np.generic):
            label = label.item()
        if label in _PERTINENT:
            encoded.append(1.0)
        elif label in _BENIGN:
            encoded.append(-1.0)
        else:
            raise ValueError(f"Unrecognised label: {label!r}")
    return np.array(encoded, dtype=float)


def sigmoid(x):
    # tanh form stays finite for any input
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(x, dtype=float)))


def class_weights(y: np.ndarray, positive_class_weight: Optional[float] = None) -> np.ndarray:
    """Per-row weights; pertinent rows default to N_neg/N_pos."""
    if positive_class_weight is None:
        positives = float(np.sum(y > 0))
        negatives = float(np.sum(y < 0))
        positive_class_weight = negatives / positives if positives else 1.0
    return np.where(y > 0, positive_class_weight, 1.0)


def loss_and_gradient(
    weights: np.ndarray,
    bias: float,
    X: np.ndarray,
    y: np.ndarray,
    loss_kind: LossKind,
    l2_lambda: float,
    weights_per_row: Optional[np.ndarray] = None,
) -> Tuple[float, np.ndarray]:
    """Objective value and gradient at (weights, bias).

    The gradient has len(weights) + 1 entries, the last one for the bias.
    Hinge uses the subgradient that is zero wherever the margin is >= 1.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if X.shape[0] == 0:
        raise ValueError("loss_and_gradient needs a nonempty batch")
    cw = np.ones(len(y)) if weights_per_row is None else np.asarray(weights_per_row, dtype=float)
    margins = y * (X @ weights + bias)

    if LossKind(loss_kind) is LossKind.LOGISTIC:
        losses = np.logaddexp(0.0, -margins)
        # d/dm log(1 + e^-m) = -sigmoid(-m)
        slopes = -sigmoid(-margins)
    else:
        losses = np.maximum(0.0, 1.0 - margins)
        slopes = np.where(margins < 1.0, -1.0, 0.0)

    n = X.shape[0]
    loss = float(np.mean(cw * losses) + l2_lambda * np.dot(weights, weights))
    coefficient = cw * slopes * y / n
    gradient = np.empty(len(weights) + 1)
    gradient[:-1] = X.T @ coefficient + 2.0 * l2_lambda * weights
    gradient[-1] = np.sum(coefficient)
    return loss, gradient


def train(
    matrix: Union[np.ndarray, Sequence[FeatureVector]],
    labels: Sequence,
    loss_kind: LossKind = LossKind.LOGISTIC,
    hyperparams: Optional[Hyperparams] = None,
    schema: Optional[FeatureSchema] = None,
    scaling: Optional[ScalingParams] = None,
) -> LinearModel:
    """Epoch-wise gradient descent from w = 0, b = 0.

    Full batch by default; with ``batch_size`` the rows are reshuffled each
    epoch by a generator seeded from ``hyperparams.seed``.
    """
    hyperparams = hyperparams or Hyperparams()
    loss_kind = LossKind(loss_kind)
    X = as_matrix(matrix)
    y = encode_labels(labels)
    if X.ndim != 2 or X.shape[0] != len(y):
        raise ValueError("matrix rows and labels must align")
    if X.shape[0] < 2 or len(np.unique(y)) < 2:
        raise SingleClass("Training needs at least one benign and one pertinent artefact")
    schema = schema or FeatureSchema.generic(X.shape[1])
    if len(schema) != X.shape[1]:
        raise SchemaMismatch(f"Schema has {len(schema)} features, matrix has {X.shape[1]} columns")
    scaling = scaling or ScalingParams.identity(X.shape[1])

    cw = class_weights(y, hyperparams.positive_class_weight)
    rng = np.random.default_rng(hyperparams.seed)
    batch_size = hyperparams.batch_size or X.shape[0]
    weights = np.zeros(X.shape[1])
    bias = 0.0
    loss = float("nan")

    logger.info(f"🚀 Training {loss_kind.value} model on {X.shape[0]} artefacts x {X.shape[1]} features")
    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(hyperparams.epochs):
            order = rng.permutation(X.shape[0]) if batch_size < X.shape[0] else np.arange(X.shape[0])
            for start in range(0, X.shape[0], batch_size):
                rows = order[start:start + batch_size]
                loss, gradient = loss_and_gradient(
                    weights, bias, X[rows], y[rows], loss_kind, hyperparams.l2_lambda, cw[rows],
                )
                weights = weights - hyperparams.learning_rate * gradient[:-1]
                bias = bias - hyperparams.learning_rate * gradient[-1]
            if not np.isfinite(loss) or not np.all(np.isfinite(weights)) or not np.isfinite(bias):
                raise NonFiniteLoss(f"Loss diverged at epoch {epoch + 1}; lower the learning rate")
            if (epoch + 1) % 100 == 0:
                logger.debug(f"Epoch {epoch + 1}/{hyperparams.epochs} loss {loss:.6f}")
        final_loss, _ = loss_and_gradient(weights, bias, X, y, loss_kind, hyperparams.l2_lambda, cw)
    if not np.isfinite(final_loss):
        raise NonFiniteLoss("Final training loss is not finite")
    logger.info(f"✅ Training finished, objective {final_loss:.6f}")

    return LinearModel(
        loss_kind=loss_kind,
        feature_names=tuple(schema.names),
        weights=tuple(float(w) for w in weights),
        bias=float(bias),
        scaling=scaling,
        hyperparams=hyperparams,
        training_seed=hyperparams.seed,
        schema_fingerprint=schema.fingerprint,
    )


def training_objective(model: LinearModel, X: np.ndarray, labels: Sequence) -> float:
    """Objective of ``model`` on an already standardized matrix."""
    y = encode_labels(labels)
    cw = class_weights(y, model.hyperparams.positive_class_weight)
    loss, _ = loss_and_gradient(np.asarray(model.weights), model.bias, X, y, model.loss_kind,
                                model.hyperparams.l2_lambda, cw)
    return loss


def _check_schema(model: LinearModel, vectors: Sequence[FeatureVector]) -> None:
    for vector in vectors:
        if vector.schema_fingerprint != model.schema_fingerprint:
            raise SchemaMismatch(
                f"{vector.artefact.canonical_path} was extracted with schema {vector.schema_fingerprint[:12]}, "
                f"model expects {model.schema_fingerprint[:12]}"
            )
        if len(vector.values) != len(model.weights):
            raise SchemaMismatch(f"{vector.artefact.canonical_path} has {len(vector.values)} values, model expects {len(model.weights)}")


def decision_values(model: LinearModel, vectors: Sequence[FeatureVector]) -> np.ndarray:
    """Raw decision values of many raw (unscaled) vectors."""
    _check_schema(model, vectors)
    if not vectors:
        return np.zeros(0)
    return apply_scaling(vectors, model.scaling) @ np.asarray(model.weights) + model.bias


def score(model: LinearModel, vector: FeatureVector) -> Score:
    decision = float(decision_values(model, [vector])[0])
    return Score(decision=decision, probability=predict_proba(model, decision))


def score_all(model: LinearModel, vectors: Sequence[FeatureVector]) -> List[Score]:
    return [
        Score(decision=float(d), probability=predict_proba(model, float(d)))
        for d in decision_values(model, vectors)
    ]


def predict_proba(model: LinearModel, decision: float) -> Optional[float]:
    """sigmoid(decision) for logistic models; hinge models report no probability."""
    if model.loss_kind is not LossKind.LOGISTIC:
        return None
    return float(sigmoid(decision))


def coefficients(model: LinearModel) -> Tuple[List[Tuple[str, float]], float]:
    """(feature name, weight) pairs in schema order, plus the bias."""
    return list(zip(model.feature_names, model.weights)), model.bias


def model_to_json(model: LinearModel) -> str:
    return json.dumps(model.model_dump(mode="json"), indent=2) + "\n"


def save_model(model: LinearModel, path: Union[str, Path]) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(model_to_json(model))
    logger.info(f"💾 Saved {model.loss_kind.value} model to {path}")


def model_from_json(text: str) -> LinearModel:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise CorruptModel(f"Model file is not valid JSON: {e}")
    if not isinstance(data, dict) or "version" not in data:
        raise CorruptModel("Model file lacks a version field")
    if data["version"] != MODEL_FORMAT_VERSION:
        raise VersionMismatch(f"Model format version {data['version']!r}, expected {MODEL_FORMAT_VERSION}")
    try:
        return LinearModel.model_validate(data)
    except ValidationError as e:
        raise CorruptModel(f"Model file is invalid: {e}")


def load_model(path: Union[str, Path]) -> LinearModel:
    with open(path, "r", encoding="utf-8") as handle:
        return model_from_json(handle.read())

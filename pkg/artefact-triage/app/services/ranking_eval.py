# © 2025 artefact-triage contributors. Licensed under the MIT License; see LICENSE.md.

import json
import logging
import math
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, TextIO, Tuple, Union

from pydantic import ValidationError

from app.errors import CorruptReport, EmptyTruth, UnknownTruthArtefact
from app.schemas import ArtefactId, RankedItem, RankedReport, ReportModelInfo, Score

logger = logging.getLogger(__name__)

DEFAULT_FRACTIONS = (0.1, 0.2, 0.3, 0.5, 1.0)

ScoredEntry = Union[Tuple[ArtefactId, float], Tuple[ArtefactId, float, Optional[float]], Tuple[ArtefactId, Score]]


def _unpack(entry: ScoredEntry) -> Tuple[str, float, Optional[float]]:
    artefact, value, *rest = entry
    if isinstance(value, Score):
        return artefact.canonical_path, value.decision, value.probability
    return artefact.canonical_path, float(value), rest[0] if rest else None


def rank(
    scored: Iterable[ScoredEntry],
    model: Optional[ReportModelInfo] = None,
    generated_at: Optional[str] = None,
) -> RankedReport:
    """Orders artefacts by score descending, ties by canonical path ascending."""
    rows = sorted((_unpack(entry) for entry in scored), key=lambda row: (-row[1], row[0]))
    items = tuple(
        RankedItem(rank=position, path=path, score=value, probability=probability)
        for position, (path, value, probability) in enumerate(rows, start=1)
    )
    return RankedReport(model=model, generated_at=generated_at, items=items)


def review_count(fraction: float, total: int) -> int:
    """Items reviewed at a fraction: ceil(fraction * total), ignoring float noise."""
    return math.ceil(round(fraction * total, 9))


def _truth_paths(ranked: RankedReport, truth: Iterable[Union[ArtefactId, str]]) -> set:
    paths = {(t.canonical_path if isinstance(t, ArtefactId) else t).lower() for t in truth}
    if not paths:
        raise EmptyTruth("Ground truth is empty")
    ranked_paths = {item.path.lower() for item in ranked.items}
    missing = sorted(paths - ranked_paths)
    if missing:
        raise UnknownTruthArtefact(missing[0])
    return paths


def _recall(ranked: RankedReport, paths: set, fraction: float) -> float:
    if not 0 < fraction <= 1:
        raise ValueError(f"Review fraction must lie in (0, 1], got {fraction}")
    k = review_count(fraction, len(ranked.items))
    found = sum(1 for item in ranked.items[:k] if item.path.lower() in paths)
    return found / len(paths)


def recall_at(ranked: RankedReport, truth: Iterable[Union[ArtefactId, str]], fraction: float) -> float:
    return _recall(ranked, _truth_paths(ranked, truth), fraction)


def fraction_key(fraction: float) -> str:
    """Report key of a fraction: two decimals unless more are needed."""
    key = f"{fraction:.2f}"
    return key if float(key) == fraction else repr(float(fraction))


def recall_table(
    ranked: RankedReport,
    truth: Iterable[Union[ArtefactId, str]],
    fractions: Sequence[float] = DEFAULT_FRACTIONS,
) -> Dict[str, float]:
    paths = _truth_paths(ranked, truth)
    return {fraction_key(f): _recall(ranked, paths, f) for f in sorted(fractions)}


def with_recall(ranked: RankedReport, truth, fractions: Sequence[float] = DEFAULT_FRACTIONS) -> RankedReport:
    table = recall_table(ranked, truth, fractions)
    logger.info(f"📊 Recall: {table}")
    return ranked.model_copy(update={"recall": table})


def report_to_json(report: RankedReport) -> str:
    return json.dumps(report.model_dump(mode="json"), indent=2) + "\n"


def _format_probability(probability: Optional[float]) -> str:
    return "-" if probability is None else f"{probability:.6f}"


def format_report_table(report: RankedReport) -> str:
    """Plain-text ranking followed by the recall-by-review-fraction section."""
    lines = [f"{'rank':>6}  {'score':>12}  {'probability':>11}  path"]
    for item in report.items:
        lines.append(f"{item.rank:>6}  {item.score:>12.6f}  {_format_probability(item.probability):>11}  {item.path}")
    if report.recall:
        lines.append("")
        lines.append(f"{'No. Reviewed':<14}{'Recall':>8}")
        for key in sorted(report.recall, key=float):
            reviewed = f"{float(key) * 100:g}%"
            lines.append(f"{reviewed:<14}{report.recall[key]:>8.2f}")
    return "\n".join(lines) + "\n"


def emit_report(report: RankedReport, json_sink: Optional[TextIO] = None, text_sink: Optional[TextIO] = None) -> None:
    if json_sink is not None:
        json_sink.write(report_to_json(report))
    if text_sink is not None:
        text_sink.write(format_report_table(report))


def write_report(report: RankedReport, out_dir: Union[str, Path], stem: str = "report") -> Tuple[Path, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    json_path, text_path = out_dir / f"{stem}.json", out_dir / f"{stem}.txt"
    with open(json_path, "w", encoding="utf-8", newline="") as json_sink, \
            open(text_path, "w", encoding="utf-8", newline="") as text_sink:
        emit_report(report, json_sink, text_sink)
    logger.info(f"✅ Wrote ranked report ({len(report.items)} artefacts) to {json_path}")
    return json_path, text_path


def report_from_json(text: str) -> RankedReport:
    try:
        return RankedReport.model_validate(json.loads(text))
    except (json.JSONDecodeError, ValidationError) as e:
        raise CorruptReport(f"Report is unreadable: {e}")


def load_report(path: Union[str, Path]) -> RankedReport:
    with open(path, "r", encoding="utf-8") as handle:
        return report_from_json(handle.read())


def ranked_paths(report: RankedReport) -> List[str]:
    return [item.path for item in report.items]

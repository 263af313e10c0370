# © 2025 artefact-triage contributors. Licensed under the MIT License; see LICENSE.md.

import json

import pytest

from app.config import load_pipeline_config, load_run_settings
from app.errors import InvalidConfig, PipelineStageError
from app.main import main
from app.schemas import Label
from app.services.hash_catalog import read_manifest
from app.services.pipeline import run_pipeline
from app.services.scenario_forge import generate, write_scenario_outputs


@pytest.fixture
def case_dir(tmp_path, small_spec):
    timeline, manifest = generate(small_spec)
    write_scenario_outputs(small_spec, timeline, manifest, tmp_path / "case")
    return tmp_path / "case"


def test_pipeline_writes_every_output(case_dir, tmp_path):
    config = load_pipeline_config(case_dir / "pipeline.json")
    result = run_pipeline(config, out_dir=tmp_path / "out")

    assert result.partition.sizes == (11, 4, 14)
    assert len(result.report.items) == 14
    assert set(result.report.recall) == {"0.10", "0.20", "0.30", "0.50", "1.00"}
    assert result.report.recall["1.00"] == 1.0
    for name in ("partition", "schema", "features_known", "features_unknown", "model", "report", "report_text"):
        assert result.outputs[name].exists()
    assert len(list((tmp_path / "out" / "timelines").glob("*.csv"))) == 29
    assert result.model.feature_names == tuple(result.schema.names)


def test_feature_selection_shrinks_the_schema(case_dir, tmp_path):
    config = load_pipeline_config(case_dir / "pipeline.json", {"features": {"select_k": 6}})
    result = run_pipeline(config, out_dir=tmp_path / "out")
    assert len(result.schema) == 6
    assert len(result.model.weights) == 6


def test_same_config_gives_identical_report(case_dir, tmp_path, capsys):
    for name in ("first", "second"):
        assert main(["pipeline", "--config", str(case_dir / "pipeline.json"), "--out", str(tmp_path / name)]) == 0
    summary = json.loads(capsys.readouterr().out.split("\n}\n")[0] + "\n}")

    assert summary["unknown"] == 14
    assert (tmp_path / "first" / "report.json").read_bytes() == (tmp_path / "second" / "report.json").read_bytes()
    assert (tmp_path / "first" / "model.json").read_bytes() == (tmp_path / "second" / "model.json").read_bytes()


def test_catalog_without_pertinent_files_exits_three(case_dir, tmp_path):
    benign_only = tmp_path / "benign.tsv"
    lines = (case_dir / "catalog.tsv").read_text().splitlines()
    benign_only.write_text("".join(line + "\n" for line in lines if line.split("\t")[1] == "benign"))

    argv = ["pipeline", "--config", str(case_dir / "pipeline.json"), "--catalog", str(benign_only), "--out", str(tmp_path / "out")]
    assert main(argv) == 3

    config = load_pipeline_config(case_dir / "pipeline.json", {"catalog": str(benign_only)})
    with pytest.raises(PipelineStageError) as excinfo:
        run_pipeline(config, out_dir=tmp_path / "out")
    assert excinfo.value.stage == "train"


def test_missing_config_input(case_dir, tmp_path):
    with pytest.raises(InvalidConfig):
        load_pipeline_config(case_dir / "pipeline.json", {"timeline": str(tmp_path / "absent.csv")})
    assert main(["pipeline", "--config", str(case_dir / "pipeline.json"), "--timeline", str(tmp_path / "absent.csv")]) == 2


def test_run_settings_lay_flags_over_config(case_dir, tmp_path):
    config = json.loads((case_dir / "pipeline.json").read_text())
    config["model"] = {"loss_kind": "hinge", "hyperparams": {"epochs": 7, "l2_lambda": 0.5}}
    config["output_dir"] = "runs"
    path = case_dir / "run.json"
    path.write_text(json.dumps(config))

    settings = load_run_settings(path, {"seed": None, "model": {"loss_kind": None, "hyperparams": {"epochs": 9}}})
    assert settings.model.loss_kind.value == "hinge"
    assert settings.model.hyperparams.epochs == 9
    assert settings.model.hyperparams.l2_lambda == 0.5
    assert settings.seed == config["seed"]
    assert settings.output_dir == case_dir / "runs"
    assert settings.timeline == case_dir / "timeline.csv"

    bare = load_run_settings(None, {"seed": None, "strict": None})
    assert bare.timeline is None
    assert bare.model_fields_set == set()


@pytest.mark.slow
@pytest.mark.parametrize("scenario", ["A-media-download", "B-hacking-scripts", "C-invoice-fraud"])
def test_builtin_cases_rank_pertinent_files_first(scenario, tmp_path):
    case = tmp_path / "case"
    assert main(["gen", "--scenario", scenario, "--seed", "42", "--out", str(case)]) == 0
    manifest = read_manifest(case / "manifest.tsv")
    assert sum(entry.label is Label.PERTINENT for entry in manifest) == 31
    assert sum(entry.label is Label.BENIGN for entry in manifest) == 1262

    assert main(["pipeline", "--config", str(case / "pipeline.json"), "--out", str(tmp_path / "out")]) == 0

    report = json.loads((tmp_path / "out" / "report.json").read_text())
    assert report["recall"]["0.10"] >= 0.75
    assert report["recall"]["1.00"] == 1.0

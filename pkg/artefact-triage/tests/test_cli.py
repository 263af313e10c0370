# © 2025 artefact-triage contributors. Licensed under the MIT License; see LICENSE.md.

import json

import pytest

from app.main import main
from app.services.scenario_forge import generate, write_scenario_outputs
from tests.conftest import HEADER, l2t_row


@pytest.fixture
def case_dir(tmp_path, small_spec):
    timeline, manifest = generate(small_spec)
    write_scenario_outputs(small_spec, timeline, manifest, tmp_path / "case")
    return tmp_path / "case"


def stdout_json(capsys):
    return json.loads(capsys.readouterr().out)


@pytest.mark.parametrize("argv", [[], ["summarize"], ["frobnicate"], ["summarize", "x.csv", "--no-such-flag"],
                                  ["summarize", "x.csv", "--verbose", "--quiet"]])
def test_usage_errors_exit_one(argv):
    assert main(argv) == 1


def test_version_exits_zero(capsys):
    assert main(["--version"]) == 0
    assert "artefact-triage" in capsys.readouterr().out


def test_missing_input_exits_two(tmp_path):
    assert main(["summarize", str(tmp_path / "absent.csv")]) == 2


def test_malformed_input_exits_two(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("not,a,timeline\n")
    assert main(["summarize", str(path)]) == 2

    path.write_text("\n".join([HEADER, l2t_row(MACB="XXXX")]) + "\n")
    assert main(["summarize", str(path), "--strict"]) == 2


def test_summarize_counts_skipped_rows(tmp_path, capsys):
    path = tmp_path / "t.csv"
    path.write_text("\n".join([HEADER, l2t_row(), l2t_row(MACB="XXXX"), l2t_row(source="WEBHIST")]) + "\n")
    assert main(["summarize", str(path), "--out", str(tmp_path / "out")]) == 0
    summary = stdout_json(capsys)

    assert summary["event_count"] == 2
    assert summary["skipped_rows"] == 1
    assert summary["counts_by_source"] == {"FILE": 1, "WEBHIST": 1}
    assert json.loads((tmp_path / "out" / "summary.json").read_text()) == summary


def test_summarize_single_field(case_dir, capsys):
    assert main(["summarize", str(case_dir / "timeline.csv"), "--field", "source"]) == 0
    counts = stdout_json(capsys)
    assert list(counts.values()) == sorted(counts.values(), reverse=True)

    assert main(["summarize", str(case_dir / "timeline.csv"), "--field", "colour"]) == 2


def test_extract_writes_one_timeline_per_artefact(case_dir, tmp_path, capsys):
    out = tmp_path / "timelines"
    assert main(["extract", str(case_dir / "timeline.csv"), "--artefacts", str(case_dir / "artefacts.txt"),
                 "--verify", "--out", str(out)]) == 0
    written = stdout_json(capsys)

    assert len(written) == 29
    assert len(list(out.glob("*.csv"))) == 29


def test_gen_writes_case_files(tmp_path, capsys):
    assert main(["gen", "--scenario", "C-invoice-fraud", "--noise-events", "50", "--pertinent-fraction", "0.5",
                 "--seed", "3", "--out", str(tmp_path)]) == 0
    paths = stdout_json(capsys)

    assert set(paths) == {"timeline.csv", "manifest.tsv", "catalog.tsv", "artefacts.txt", "scenario.json", "pipeline.json"}
    scenario = json.loads((tmp_path / "scenario.json").read_text())
    assert scenario["spec"]["seed"] == 3
    assert scenario["composition"]["noise_event_count"] == 50
    assert len((tmp_path / "artefacts.txt").read_text().splitlines()) == 31 + 31


def test_gen_rejects_unknown_scenario_and_bad_override(tmp_path):
    assert main(["gen", "--scenario", "nope", "--out", str(tmp_path)]) == 2
    assert main(["gen", "--pertinent-fraction", "1.5", "--out", str(tmp_path)]) == 2


def test_gen_lists_scenarios(capsys):
    assert main(["gen", "--list"]) == 0
    names = [line.split("\t")[0] for line in capsys.readouterr().out.splitlines()]
    assert names == ["paper-baseline", "A-media-download", "B-hacking-scripts", "C-invoice-fraud"]


def test_catalog_classify_and_partition(case_dir, capsys):
    digest = (case_dir / "catalog.tsv").read_text().splitlines()[0].split("\t")[0]
    assert main(["catalog", "--catalog", str(case_dir / "catalog.tsv"), "--digest", digest.upper(),
                 "--digest", "f" * 64, "--manifest", str(case_dir / "manifest.tsv")]) == 0
    result = stdout_json(capsys)

    assert result["records"] == 15
    assert result["classification"]["f" * 64] == "unknown"
    assert result["classification"][digest.upper()] in ("benign", "pertinent")
    assert result["partition"] == {"known_benign": 11, "known_pertinent": 4, "unknown": 14}


def test_catalog_import_into_database(case_dir, tmp_path, capsys):
    url = f"sqlite:///{tmp_path / 'catalog.db'}"
    assert main(["catalog", "--catalog", str(case_dir / "catalog.tsv"), "--db", url, "--import"]) == 0
    capsys.readouterr()
    assert main(["catalog", "--db", url]) == 0
    assert stdout_json(capsys)["by_label"] == {"benign": 11, "pertinent": 4}


def test_catalog_import_needs_db(case_dir):
    assert main(["catalog", "--catalog", str(case_dir / "catalog.tsv"), "--import"]) == 2


def test_eval_without_ranked_pertinent_exits_three(tmp_path):
    report = tmp_path / "report.json"
    report.write_text(json.dumps({"items": [{"rank": 1, "path": "/a", "score": 1.0}]}))
    truth = tmp_path / "truth.tsv"
    truth.write_text(f"/a\t{'a' * 64}\tbenign\t\n")
    assert main(["eval", "--report", str(report), "--truth", str(truth)]) == 3


@pytest.fixture
def config_path(case_dir):
    """pipeline.json of the case with a hinge model and a short training run."""
    config = json.loads((case_dir / "pipeline.json").read_text())
    config["model"] = {"loss_kind": "hinge", "hyperparams": {"epochs": 7}}
    config["fractions"] = [1.0, 0.5]
    path = case_dir / "run.json"
    path.write_text(json.dumps(config))
    return path


@pytest.fixture
def pipeline_out(case_dir, tmp_path, capsys):
    out = tmp_path / "pipeline"
    assert main(["pipeline", "--config", str(case_dir / "pipeline.json"), "--out", str(out)]) == 0
    capsys.readouterr()
    return out


def test_pipeline_reports_partition_and_recall(case_dir, tmp_path, capsys):
    assert main(["pipeline", "--config", str(case_dir / "pipeline.json"), "--out", str(tmp_path / "run")]) == 0
    result = stdout_json(capsys)

    assert (result["known_benign"], result["known_pertinent"], result["unknown"]) == (11, 4, 14)
    assert set(result["recall"]) == {"0.10", "0.20", "0.30", "0.50", "1.00"}
    assert (tmp_path / "run" / "report.txt").exists()


def test_train_takes_model_settings_from_config(config_path, pipeline_out, tmp_path, capsys):
    train_args = ["train", "--config", str(config_path), "--features", str(pipeline_out / "features_known.csv"),
                  "--schema", str(pipeline_out / "schema.json"), "--labels", str(pipeline_out / "partition.json")]
    assert main(train_args + ["--out", str(tmp_path / "m")]) == 0
    printed = stdout_json(capsys)
    model = json.loads((tmp_path / "m" / "model.json").read_text())

    assert printed["model"] == str(tmp_path / "m" / "model.json")
    assert model["loss_kind"] == "hinge"
    assert model["hyperparams"]["epochs"] == 7
    assert len(printed["coefficients"]) == len(json.loads((pipeline_out / "schema.json").read_text())["features"])

    assert main(train_args + ["--epochs", "9", "--out", str(tmp_path / "m9")]) == 0
    model = json.loads((tmp_path / "m9" / "model.json").read_text())
    assert model["loss_kind"] == "hinge"
    assert model["hyperparams"]["epochs"] == 9


def test_train_score_rank_flow(config_path, pipeline_out, tmp_path, capsys):
    assert main(["train", "--config", str(config_path), "--features", str(pipeline_out / "features_known.csv"),
                 "--schema", str(pipeline_out / "schema.json"), "--labels", str(pipeline_out / "partition.json"),
                 "--out", str(tmp_path / "m")]) == 0
    assert main(["score", "--config", str(config_path), "--model", str(tmp_path / "m" / "model.json"),
                 "--features", str(pipeline_out / "features_unknown.csv"), "--schema", str(pipeline_out / "schema.json"),
                 "--out", str(tmp_path / "s")]) == 0
    scores = (tmp_path / "s" / "scores.csv").read_text().splitlines()
    assert scores[0] == "artefact,score,probability"
    assert len(scores) == 1 + 14

    capsys.readouterr()
    assert main(["rank", "--config", str(config_path), "--scores", str(tmp_path / "s" / "scores.csv"),
                 "--out", str(tmp_path / "r")]) == 0
    report = json.loads((tmp_path / "r" / "report.json").read_text())
    assert [item["rank"] for item in report["items"]] == list(range(1, 15))
    assert set(report["recall"]) == {"0.50", "1.00"}
    assert report["recall"]["1.00"] == 1.0
    assert "Reviewed" in capsys.readouterr().out

    assert main(["rank", "--config", str(config_path), "--scores", str(tmp_path / "s" / "scores.csv"),
                 "--fractions", "0.3", "--out", str(tmp_path / "r3")]) == 0
    assert set(json.loads((tmp_path / "r3" / "report.json").read_text())["recall"]) == {"0.30"}


def test_eval_takes_truth_from_config(config_path, pipeline_out, capsys):
    assert main(["eval", "--config", str(config_path), "--report", str(pipeline_out / "report.json")]) == 0
    assert "1.00" in capsys.readouterr().out

    assert main(["eval", "--report", str(pipeline_out / "report.json")]) == 1


def test_summarize_and_extract_take_inputs_from_config(case_dir, tmp_path, capsys):
    assert main(["summarize", "--config", str(case_dir / "pipeline.json")]) == 0
    from_config = stdout_json(capsys)
    assert main(["summarize", str(case_dir / "timeline.csv")]) == 0
    assert stdout_json(capsys) == from_config

    assert main(["extract", "--config", str(case_dir / "pipeline.json"), "--out", str(tmp_path / "timelines")]) == 0
    assert len(stdout_json(capsys)) == 29


def test_config_seed_applies_to_gen(tmp_path, capsys):
    config = tmp_path / "seed.json"
    config.write_text(json.dumps({"seed": 11}))
    small = ["--noise-events", "10", "--pertinent-fraction", "0.5"]
    assert main(["gen", "--config", str(config), *small, "--out", str(tmp_path / "a")]) == 0
    assert main(["gen", "--config", str(config), "--seed", "12", *small, "--out", str(tmp_path / "b")]) == 0
    capsys.readouterr()

    assert json.loads((tmp_path / "a" / "scenario.json").read_text())["spec"]["seed"] == 11
    assert json.loads((tmp_path / "b" / "scenario.json").read_text())["spec"]["seed"] == 12


def test_duplicated_config_event_types_run(case_dir, tmp_path, capsys):
    config = json.loads((case_dir / "pipeline.json").read_text())
    config["features"]["event_types"] = ["Creation Time", "Creation Time"]
    path = case_dir / "dup.json"
    path.write_text(json.dumps(config))

    assert main(["pipeline", "--config", str(path), "--out", str(tmp_path / "dup")]) == 0
    names = [f["name"] for f in json.loads((tmp_path / "dup" / "schema.json").read_text())["features"]]
    assert names.count("type:Creation Time") == 1


def test_bad_config_exits_two(case_dir, tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"model": {"loss_kind": "quadratic"}}))
    assert main(["summarize", str(case_dir / "timeline.csv"), "--config", str(path)]) == 2

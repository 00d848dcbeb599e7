import json

import pandas as pd
import pytest

from conftest import sample_path
from metareduce import cli
from metareduce.cli import EXIT_FAULT, EXIT_INPUT, EXIT_OK, build_summary, main
from metareduce.errors import InputError
from metareduce.meta.store import ingest
from metareduce.meta.synth import SampleManifest

AUTOML = sample_path("automl_meta.csv")
DEFAULT = sample_path("default_meta.csv")
ROSTER = sample_path("roster.json")


def _simulate(out):
    return main([
        "simulate", "--base", DEFAULT, "--roster", ROSTER, "--strategies", "M1-k4,R-k4,baseline",
        "--seeds", "1..5", "--budget", "300", "--out", str(out),
    ])


def test_rank_writes_rankings_and_correlations(tmp_path, sample_manifest):
    assert main(["rank", "--base", f"{AUTOML},{DEFAULT}", "--roster", ROSTER, "--out", str(tmp_path)]) == EXIT_OK
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names == [
        "correlations.csv", "leaderboard.csv", "leaderboard_default.csv", "rank_distribution.csv",
        "rank_distribution_default.csv", "rankings.csv", "rankings_default.csv",
    ]
    leaderboard = pd.read_csv(tmp_path / "leaderboard.csv")
    assert leaderboard["predictor"].tolist() == sample_manifest.planted_leaderboard
    assert len(pd.read_csv(tmp_path / "rankings.csv")) == 40


def test_ingest_writes_aggregates_and_counts(tmp_path, sample_manifest):
    assert main(["ingest", "--base", AUTOML, "--roster", ROSTER, "--out", str(tmp_path)]) == EXIT_OK
    assert sorted(p.name for p in tmp_path.iterdir()) == ["aggregates_automl.csv", "counts_automl.csv"]
    aggregates = pd.read_csv(tmp_path / "aggregates_automl.csv")
    assert len(aggregates) == 40
    cell = aggregates[(aggregates["dataset"] == "d1") & (aggregates["predictor"] == "P0")]
    assert cell["n_evaluations"].item() == sample_manifest.ok_counts["automl"]["d1"]["P0"]
    counts = pd.read_csv(tmp_path / "counts_automl.csv")
    assert sorted(counts["dataset_id"]) == sample_manifest.datasets


def test_expect_and_report(tmp_path):
    assert main(["expect", "--base", AUTOML, "--k", "1,4,8,10", "--out", str(tmp_path)]) == EXIT_OK
    expectation = pd.read_csv(tmp_path / "expectation.csv")
    assert sorted(expectation["k"].unique()) == [1, 4, 8]
    assert len(expectation) == 15
    assert main(["rank", "--base", AUTOML, "--out", str(tmp_path)]) == EXIT_OK

    assert main(["report", "--out", str(tmp_path)]) == EXIT_OK
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["files"]["expectation.csv"] == 15
    assert len(summary["leaderboard"]) == 8
    assert set(summary["mean_normalized_by_k"]) == {"1", "4", "8"}


def test_expect_without_enough_landmarkers_leaves_landmarked_columns_blank(tmp_path):
    assert main(["expect", "--base", AUTOML, "--k", "1,4", "--landmarkers", "9", "--out", str(tmp_path)]) == EXIT_OK
    expectation = pd.read_csv(tmp_path / "expectation.csv")
    assert len(expectation) == 10
    assert expectation["eL_avg"].isna().all()
    assert expectation["eL_opt"].isna().all()
    assert expectation["eM_avg"].notna().all()
    assert pd.read_csv(tmp_path / "normalized.csv")["norm_L_avg"].isna().all()


def test_simulate_is_reproducible(tmp_path):
    first, second = tmp_path / "a", tmp_path / "b"
    assert _simulate(first) == EXIT_OK
    assert _simulate(second) == EXIT_OK
    runs = pd.read_csv(first / "runs.csv")
    assert len(runs) == 75
    assert set(runs["strategy"]) == {"M1-k4", "R-k4", "baseline"}
    for path in sorted(first.iterdir()):
        assert path.read_bytes() == (second / path.name).read_bytes()
    nemenyi = json.loads((first / "nemenyi.json").read_text())
    assert nemenyi["n_strategies"] == 3
    assert nemenyi["n_datasets"] == 5


def test_bad_input_exits_1_without_output(tmp_path):
    out = tmp_path / "out"
    assert main(["rank", "--base", str(tmp_path / "missing.csv"), "--out", str(out)]) == EXIT_INPUT
    assert main(["simulate", "--base", DEFAULT, "--strategies", "Q-k4", "--out", str(out)]) == EXIT_INPUT
    assert main(["simulate", "--base", DEFAULT, "--strategies", "M-k99", "--seeds", "1", "--out", str(out)]) == EXIT_INPUT
    assert main(["rank", "--no-such-flag"]) == EXIT_INPUT
    assert not out.exists()


def test_internal_fault_exits_2(tmp_path, monkeypatch):
    def broken(*args, **kwargs):
        raise RuntimeError("boom")

    monkeypatch.setattr(cli, "build_ranking", broken)
    out = tmp_path / "out"
    assert main(["rank", "--base", AUTOML, "--out", str(out)]) == EXIT_FAULT
    assert not out.exists()


def test_config_file_supplies_defaults(tmp_path):
    config = tmp_path / "run.yaml"
    config.write_text(f"bases: {AUTOML}\nk_grid: 1..2\nout: {tmp_path / 'from_file'}\n")
    assert main(["--config", str(config), "--verbose", "expect"]) == EXIT_OK
    assert sorted(pd.read_csv(tmp_path / "from_file" / "expectation.csv")["k"].unique()) == [1, 2]


def test_synth_writes_an_ingestible_sample(tmp_path):
    assert main(["synth", "--out", str(tmp_path)]) == EXIT_OK
    manifest = SampleManifest.from_json(str(tmp_path / "manifest.json"))
    for base_id, name in manifest.files.items():
        base = ingest(str(tmp_path / name))
        assert base.base_id == base_id
        assert len(base.records) == manifest.row_counts[base_id]
    assert main(["synth", "--out", str(tmp_path)]) == EXIT_INPUT
    assert main(["synth", "--out", str(tmp_path), "--exist-ok"]) == EXIT_OK


def test_summary_needs_reports(tmp_path):
    with pytest.raises(InputError):
        build_summary(tmp_path)

import csv
import logging

import pytest

from rldefense import pipeline
from rldefense.cli import main
from rldefense.config import RunConfig
from rldefense.evalharness import EpisodeRecord, EvalSummary, write_episode_csv, write_summary_csv
from rldefense.report import write_report

TINY = [
    "--scenario", "merge",
    "--set", "dqn.episodes=5",
    "--set", "dqn.train_start=64",
    "--set", "collect.n=200",
    "--set", "autoencoder.epochs=2",
    "--set", "eval.episodes=10",
]  # fmt: skip
STAGES = ("train", "collect", "fit-defenses", "evaluate", "report")


def tree(path):
    return {p.name: p.read_bytes() for p in sorted(path.iterdir())}


@pytest.fixture(scope="module")
def pipeline_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("full")
    assert main(["full-pipeline", "--out", str(out), *TINY]) == 0
    return out


def test_full_pipeline_writes_all_artifacts(pipeline_dir):
    names = set(tree(pipeline_dir))
    expected = {
        "q_network.rdnet", "train_log.csv", "clean_observations.rdobs", "autoencoder.rdnet", "pca.rdpca",
        "summary.csv", "manifest.json", "report.txt", "sma_rewards.svg", "collision_rates.svg",
    }  # fmt: skip
    assert expected <= names
    assert sum(n.startswith("episodes_") for n in names) == 6
    assert (pipeline_dir / "clean_observations.rdobs").read_bytes().startswith(b"RDOBS v1 200 25\n")


def test_stagewise_commands_equal_full_pipeline(pipeline_dir, tmp_path):
    for stage in STAGES:
        assert main([stage, "--out", str(tmp_path), *TINY]) == 0
    assert tree(tmp_path) == tree(pipeline_dir)


def test_report_is_idempotent(pipeline_dir):
    before = tree(pipeline_dir)
    assert main(["report", "--out", str(pipeline_dir)]) == 0
    assert tree(pipeline_dir) == before


def test_table_values_are_summary_values_to_two_decimals(pipeline_dir):
    with open(pipeline_dir / "summary.csv") as fh:
        rows = list(csv.DictReader(fh))
    table = (pipeline_dir / "report.txt").read_text().splitlines()[2:]
    assert len(table) == len(rows) == 6
    for line, row in zip(table, rows):
        cells = line.split()[-4:]
        keys = ("mean_reward", "std_reward", "mean_collision_rate", "std_collision_rate")
        assert cells == [f"{float(row[k]):.2f}" for k in keys]


def test_manifest_records_resolved_settings(pipeline_dir):
    manifest = pipeline.read_manifest(pipeline_dir)
    ev = manifest["evaluate"]
    assert ev["epsilon"] in (0.01, 0.02, 0.05, 0.1, 0.2)
    assert ev["eta"] == ev["epsilon"]
    assert ev["pca_k"] == manifest["fit_defenses"]["pca_k"] >= 1
    assert manifest["fit_defenses"]["autoencoder_final_mse"] < manifest["fit_defenses"]["autoencoder_initial_mse"]


def test_baseline_only_report(tmp_path):
    records = [EpisodeRecord(i, float(i), i % 2 == 0, 40, i) for i in range(1, 11)]
    write_episode_csv(tmp_path / "episodes_baseline.csv", "baseline", records)
    write_summary_csv(tmp_path / "summary.csv", [EvalSummary("baseline", 5.5, 2.87, 0.5, 0.0, 10)])
    info = write_report(tmp_path)
    assert info["rows"] == 1 and info["series"] == 1
    lines = (tmp_path / "report.txt").read_text().splitlines()
    assert len(lines) == 3 and lines[2].startswith("No Attack (Baseline)")
    svg = (tmp_path / "sma_rewards.svg").read_text()
    assert svg.count("<polyline") == 1
    assert svg.startswith("<svg") and "http://www.w3.org/2000/svg" in svg
    assert (tmp_path / "collision_rates.svg").read_text().count("<circle") >= 1


def test_missing_config_falls_back_to_defaults(tmp_path, caplog):
    from rldefense.cli import build_parser, load_config

    args = build_parser().parse_args(["train", "--config", str(tmp_path / "nope.cfg")])
    with caplog.at_level(logging.WARNING):
        cfg = load_config(args)
    assert cfg.values == RunConfig().values
    assert "not found" in caplog.text


def test_malformed_config_exits_nonzero_with_line(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("run.seed = 3\n# comment\nattack.epsilon == = \n")
    assert main(["train", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err
    assert f"{bad}:3:" in err
    assert not (tmp_path / "o").exists()


def test_bad_override_exits_nonzero(tmp_path):
    assert main(["train", "--out", str(tmp_path), "--set", "nosuch.key=1"]) == 2
    assert main(["train", "--out", str(tmp_path), "--set", "dqn.episodes"]) == 2


def test_flags_override_config_file(tmp_path):
    from rldefense.cli import artifact_dir, build_parser, load_config

    cfgfile = tmp_path / "run.cfg"
    cfgfile.write_text("run.seed = 5\nrun.scenario = highway\n")
    args = build_parser().parse_args(["train", "--config", str(cfgfile), "--seed", "8", "--scenario", "merge"])
    cfg = load_config(args)
    assert cfg.seed == 8 and cfg.scenario_kind == "merge"
    assert artifact_dir(args, cfg).parts[-2:] == ("artifacts", "merge")


def test_artifact_dir_env_fallback(tmp_path, monkeypatch):
    monkeypatch.setenv("RD_ARTIFACT_DIR", str(tmp_path / "root"))
    assert main(["train", *TINY]) == 0
    assert (tmp_path / "root" / "merge" / "q_network.rdnet").exists()


def test_missing_inputs_fail_cleanly(tmp_path, capsys):
    assert main(["collect", "--out", str(tmp_path), *TINY]) == 1
    assert "collect failed" in capsys.readouterr().err

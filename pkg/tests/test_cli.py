import hashlib
import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from lird.cli import main

MICRO_CONFIG = {
    "catalog_size": 40,
    "n_sessions": 60,
    "n_clusters": 4,
    "events_per_session": 12,
    "d": 8,
    "embed_epochs": 1,
    "n_state": 5,
    "k_list": 4,
    "hidden": [8],
    "episodes": 4,
    "steps_per_episode": 4,
    "warmup_transitions": 10,
    "batch_size": 8,
    "eval_sessions": 3,
    "dqn_episodes": 2,
    "seed": 13,
}


def sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


@pytest.fixture
def workdir(tmp_path):
    cfg = tmp_path / "config.json"
    cfg.write_text(json.dumps(MICRO_CONFIG))
    return tmp_path, cfg


def run(args, cwd):
    runner = CliRunner()
    result = runner.invoke(main, args, catch_exceptions=False)
    return result


def run_stage(cmd, workdir, extra=()):
    tmp_path, cfg = workdir
    out = tmp_path / "out"
    result = run([cmd, "--config", str(cfg), "--out", str(out), *extra],
                 tmp_path)
    return result, out


class TestPipeline:
    def test_full_pipeline_artifacts(self, workdir):
        result, out = run_stage("gen", workdir)
        assert result.exit_code == 0, result.output
        assert (out / "sessions.tsv").exists()
        assert (out / "catalog.txt").exists()

        result, _ = run_stage("embed", workdir)
        assert result.exit_code == 0, result.output
        assert (out / "embeddings.txt").exists()

        result, _ = run_stage("build-sim", workdir)
        assert result.exit_code == 0, result.output
        assert (out / "memory.npz").exists()

        result, _ = run_stage("train", workdir)
        assert result.exit_code == 0, result.output
        assert (out / "checkpoint.npz").exists()
        log = (out / "training_log.tsv").read_text().strip().split("\n")
        assert log[0].startswith("episode\t")
        assert len(log) == 1 + MICRO_CONFIG["episodes"]

        result, _ = run_stage("eval", workdir)
        assert result.exit_code == 0, result.output
        reports = (out / "reports.csv").read_text().strip().split("\n")
        assert reports[0].startswith("policy,length_class")
        # three policies x short/long
        assert len(reports) == 1 + 3 * 2
        trace = json.loads((out / "protocol_trace.json").read_text())
        assert "lird/short" in trace

        result, _ = run_stage("report", workdir)
        assert result.exit_code == 0, result.output
        summary = (out / "summary.md").read_text()
        assert "Policy comparison" in summary

    def test_idempotent_reruns_byte_identical(self, workdir):
        artifacts = {
            "gen": ["sessions.tsv", "catalog.txt"],
            "embed": ["embeddings.txt"],
            "build-sim": ["memory.npz"],
            "train": ["checkpoint.npz", "training_log.tsv"],
        }
        _, out = run_stage("gen", workdir)
        for cmd in ("embed", "build-sim", "train"):
            run_stage(cmd, workdir)
        first = {name: sha256(out / name)
                 for names in artifacts.values() for name in names}
        for cmd in artifacts:
            result, _ = run_stage(cmd, workdir)
            assert result.exit_code == 0, result.output
        second = {name: sha256(out / name)
                  for names in artifacts.values() for name in names}
        assert first == second

    def test_seed_changes_generated_data(self, workdir):
        _, out = run_stage("gen", workdir)
        baseline = sha256(out / "sessions.tsv")
        result, _ = run_stage("gen", workdir, extra=["--seed", "99"])
        assert result.exit_code == 0
        assert sha256(out / "sessions.tsv") != baseline


class TestPrerequisites:
    def test_embed_without_gen(self, workdir):
        result, _ = run_stage("embed", workdir)
        assert result.exit_code != 0
        assert "lird gen" in result.output

    def test_train_without_sim(self, workdir):
        run_stage("gen", workdir)
        run_stage("embed", workdir)
        result, _ = run_stage("train", workdir)
        assert result.exit_code != 0
        assert "lird build-sim" in result.output

    def test_eval_without_train(self, workdir):
        run_stage("gen", workdir)
        run_stage("embed", workdir)
        run_stage("build-sim", workdir)
        result, _ = run_stage("eval", workdir)
        assert result.exit_code != 0
        assert "lird train" in result.output

    def test_report_without_eval(self, workdir):
        result, _ = run_stage("report", workdir)
        assert result.exit_code != 0
        assert "lird eval" in result.output


class TestConfigHandling:
    def test_config_echoed_next_to_outputs(self, workdir):
        _, out = run_stage("gen", workdir)
        echoed = json.loads((out / "gen.config.json").read_text())
        assert echoed["seed"] == MICRO_CONFIG["seed"]
        assert echoed["catalog_size"] == MICRO_CONFIG["catalog_size"]

    def test_flag_overrides_file(self, workdir):
        _, out = run_stage("gen", workdir, extra=["--sessions", "30"])
        echoed = json.loads((out / "gen.config.json").read_text())
        assert echoed["n_sessions"] == 30

    def test_unknown_config_key_rejected(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"not_a_key": 1}))
        runner = CliRunner()
        result = runner.invoke(main, ["gen", "--config", str(bad),
                                      "--out", str(tmp_path / "out")])
        assert result.exit_code != 0

    def test_unknown_policy_rejected(self, workdir):
        run_stage("gen", workdir)
        run_stage("embed", workdir)
        run_stage("build-sim", workdir)
        run_stage("train", workdir)
        result, _ = run_stage("eval", workdir,
                              extra=["--policies", "oracle"])
        assert result.exit_code != 0
        assert "unknown policy" in result.output


class TestSweepCommand:
    def test_k_sweep_writes_csv(self, workdir):
        tmp_path, cfg = workdir
        run_stage("gen", workdir)
        result, out = run_stage("sweep", workdir,
                                extra=["--param", "K", "--values", "1,2"])
        assert result.exit_code == 0, result.output
        lines = (out / "sweep_K.csv").read_text().strip().split("\n")
        assert len(lines) == 3
        assert "K=1 (item-wise)" in lines[1]

    def test_bad_param_rejected(self, workdir):
        result, _ = run_stage("sweep", workdir,
                              extra=["--param", "gamma", "--values", "1"])
        assert result.exit_code != 0

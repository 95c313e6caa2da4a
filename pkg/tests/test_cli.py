"""The churnforge command line: end-to-end pipeline, exit codes, and
config-file precedence.
"""

import json
import subprocess
import sys

import numpy as np
import pytest

from churnforge.cli import EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, main


@pytest.fixture(scope="session")
def pipeline(tmp_path_factory):
    """One tiny synth -> features -> train(gbt) run shared by read-only tests."""
    root = tmp_path_factory.mktemp("cli")
    synth = root / "synth"
    feat = root / "feat"
    gbt = root / "gbt"
    assert main(["synth", "--users", "60", "--days", "90", "--seed", "3",
                 "--out", str(synth)]) == EXIT_OK
    assert main(["features", "--data", str(synth / "transactions.csv"),
                 "--seed", "3", "--out", str(feat)]) == EXIT_OK
    cfg = root / "gbt.json"
    cfg.write_text(json.dumps({"n_trees": 12, "max_depth": 3}))
    assert main(["train", "--model", "gbt", "--data", str(feat),
                 "--config", str(cfg), "--out", str(gbt)]) == EXIT_OK
    return root


class TestPipeline:
    """Artifacts of each stage feed the next."""

    def test_synth_writes_log_and_config(self, pipeline):
        synth = pipeline / "synth"
        for name in ("transactions.csv", "ground_truth.csv",
                     "synth_config.json", "synth_summary.json"):
            assert (synth / name).exists()
        header = (synth / "transactions.csv").read_text().splitlines()[0]
        assert header.startswith("txn_id,user_id,ts,")

    def test_features_writes_datasets_and_summary(self, pipeline):
        feat = pipeline / "feat"
        for name in ("level01.csv", "train.chrn", "validation.chrn", "test.chrn",
                     "norm_stats.json", "schema.json", "features_config.json",
                     "features_summary.json"):
            assert (feat / name).exists()
        summary = json.loads((feat / "features_summary.json").read_text())
        parts = summary["part_sizes"]
        assert summary["n_windows"] == sum(parts.values()) > 0

    def test_classical_training_writes_model(self, pipeline):
        gbt = pipeline / "gbt"
        assert (gbt / "model.json").exists()
        persisted = json.loads((gbt / "train_config.json").read_text())
        assert persisted["model"] == "gbt" and persisted["n_trees"] == 12

    def test_deep_training_writes_checkpoints(self, pipeline, capsys):
        out = pipeline / "deep"
        code = main(["train", "--model", "vgg_cnn", "--data",
                     str(pipeline / "feat"), "--epochs", "1", "--batch", "64",
                     "--out", str(out)])
        assert code == EXIT_OK
        for name in ("final.ckpt", "best.ckpt", "history.csv", "train_config.json"):
            assert (out / name).exists()
        assert "trained vgg_cnn" in capsys.readouterr().out

    def test_evaluate_writes_report(self, pipeline, capsys):
        out = pipeline / "eval"
        code = main(["evaluate", "--data", str(pipeline / "feat"),
                     "--model", str(pipeline / "gbt" / "model.json"),
                     "--out", str(out)])
        assert code == EXIT_OK
        assert (out / "report.json").exists()
        report = json.loads((out / "report.json").read_text())
        assert len(report["weeks"]) == 4
        assert "week 1:" in capsys.readouterr().out

    def test_predict_writes_csv(self, pipeline):
        out = pipeline / "pred.csv"
        code = main(["predict", "--data", str(pipeline / "feat" / "test.chrn"),
                     "--model", str(pipeline / "gbt" / "model.json"),
                     "--out", str(out)])
        assert code == EXIT_OK
        lines = out.read_text().splitlines()
        assert lines[0] == "user_id,anchor_date,p_w1,p_w2,p_w3,p_w4"
        assert len(lines) > 1
        first = lines[1].split(",")
        assert first[1].count("-") == 2  # ISO date
        probs = np.array(first[2:], dtype=float)
        assert ((probs > 0) & (probs < 1)).all()

    def test_predict_deep_model(self, pipeline):
        """The predict command dispatches on the file format, so a checkpoint
        works in the same slot as a classical model."""
        out = pipeline / "pred_deep.csv"
        code = main(["predict", "--data", str(pipeline / "feat" / "test.chrn"),
                     "--model", str(pipeline / "deep" / "best.ckpt"),
                     "--out", str(out)])
        assert code == EXIT_OK
        assert len(out.read_text().splitlines()) > 1

    def test_report_rerenders_svgs(self, pipeline):
        out = pipeline / "rep"
        code = main(["report", "--curves", str(pipeline / "eval"),
                     "--out", str(out)])
        assert code == EXIT_OK
        assert (out / "roc.svg").exists() and (out / "pr.svg").exists()

    def test_console_entry_point(self):
        proc = subprocess.run(
            [sys.executable, "-m", "churnforge.cli", "--help"],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0
        assert "synth" in proc.stdout and "gradcheck" in proc.stdout


class TestExitCodes:
    """Usage errors exit 2; runtime data errors exit 1."""

    def test_unknown_subcommand(self, capsys):
        assert main(["frobnicate"]) == EXIT_USAGE
        capsys.readouterr()

    def test_missing_required_flag(self, capsys):
        assert main(["features", "--out", "x"]) == EXIT_USAGE
        capsys.readouterr()

    def test_missing_input_file(self, tmp_path, capsys):
        code = main(["features", "--data", str(tmp_path / "nope.csv"),
                     "--out", str(tmp_path / "out")])
        assert code == EXIT_USAGE
        assert "churnforge:" in capsys.readouterr().err

    def test_deep_flags_rejected_for_classical(self, pipeline, capsys):
        code = main(["train", "--model", "gbt", "--data",
                     str(pipeline / "feat"), "--epochs", "5",
                     "--out", str(pipeline / "bad")])
        assert code == EXIT_USAGE
        assert "--epochs" in capsys.readouterr().err
        assert not (pipeline / "bad").exists()

    def test_unknown_config_key_rejected(self, pipeline, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text('{"learning_rate": 0.1}')
        code = main(["train", "--model", "lstm", "--data",
                     str(pipeline / "feat"), "--config", str(cfg),
                     "--out", str(tmp_path / "out")])
        assert code == EXIT_USAGE
        assert "learning_rate" in capsys.readouterr().err

    def test_malformed_data_is_a_runtime_error(self, pipeline, tmp_path, capsys):
        """Over-threshold malformed rows abort ingestion; nothing is written."""
        src = (pipeline / "synth" / "transactions.csv").read_text().splitlines()
        bad = tmp_path / "bad.csv"
        bad.write_text("\n".join(src[:50] + ["not,a,row"] * 10) + "\n")
        out = tmp_path / "out"
        code = main(["features", "--data", str(bad), "--out", str(out)])
        assert code == EXIT_RUNTIME
        assert "malformed" in capsys.readouterr().err
        assert not out.exists()

    def test_invalid_config_json_is_usage_error(self, pipeline, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text("{not json")
        code = main(["synth", "--config", str(cfg), "--out", str(tmp_path / "s")])
        assert code == EXIT_USAGE
        capsys.readouterr()


class TestConfigPrecedence:
    """defaults < config file < explicit flags."""

    def test_flag_overrides_config_file(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"n_users": 30, "n_days": 70, "seed": 9}))
        out = tmp_path / "synth"
        code = main(["synth", "--config", str(cfg), "--users", "40",
                     "--out", str(out)])
        assert code == EXIT_OK
        persisted = json.loads((out / "synth_config.json").read_text())
        assert persisted["n_users"] == 40  # flag wins
        assert persisted["n_days"] == 70  # file beats default
        assert persisted["seed"] == 9
        capsys.readouterr()

    def test_nonlinear_temporal_behavior_preset(self, tmp_path, capsys):
        out = tmp_path / "synth"
        code = main(["synth", "--behavior", "nonlinear_temporal", "--users", "20",
                     "--days", "70", "--seed", "0", "--out", str(out)])
        assert code == EXIT_OK
        persisted = json.loads((out / "synth_config.json").read_text())
        assert persisted["emission"]["lapsing"] == persisted["emission"]["engaged"]
        capsys.readouterr()

    def test_skew_flag_calibrates_generator(self, tmp_path, capsys):
        out = tmp_path / "synth"
        code = main(["synth", "--skew", "4.0", "--users", "25", "--days", "70",
                     "--seed", "1", "--out", str(out)])
        assert code == EXIT_OK
        assert (out / "transactions.csv").exists()
        capsys.readouterr()


class TestGradcheck:
    def test_op_checks_pass(self, capsys):
        assert main(["gradcheck", "--seed", "0"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "gradient checks passed" in out
        assert "FAIL" not in out

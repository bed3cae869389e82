"""
Tests de integración de la CLI: códigos de salida y pipeline completo sobre
el corpus sintético.
"""

import io
import json
import logging
import sys

import pytest

from memcaption.app.main import EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, configure_logging, dispatch


def _train_args(toy, out, *extra):
    return [
        "train",
        "--config", str(toy["config"]),
        "--features-dir", str(toy["features_dir"]),
        "--manifest", str(toy["manifest"]),
        "--vocab", str(toy["vocab"]),
        "--out", str(out),
        *extra,
    ]


def _eval_args(command, toy, out, checkpoint, *extra):
    return [
        command,
        "--checkpoint", str(checkpoint),
        "--features-dir", str(toy["features_dir"]),
        "--manifest", str(toy["manifest"]),
        "--out", str(out),
        *extra,
    ]


@pytest.fixture
def trained(toy_dir, tmp_path, capsys):
    """Entrenamiento corto (2 épocas) sobre el corpus sintético."""
    out = tmp_path / "run"
    assert dispatch(_train_args(toy_dir, out, "--epochs", "2")) == EXIT_OK
    capsys.readouterr()
    return out


class TestUsageErrors:
    def test_missing_subcommand(self):
        assert dispatch([]) == EXIT_USAGE

    def test_unknown_subcommand(self):
        assert dispatch(["fit"]) == EXIT_USAGE

    def test_unknown_flag(self):
        assert dispatch(["count-params", "--bogus"]) == EXIT_USAGE

    def test_lambda_sum(self, toy_dir, tmp_path):
        args = _train_args(toy_dir, tmp_path / "out", "--lambda1", "0.2", "--lambda3", "0.2", "--lambda5", "0.5")
        assert dispatch(args) == EXIT_USAGE

    def test_negative_seed(self, toy_dir, tmp_path):
        assert dispatch(_train_args(toy_dir, tmp_path / "out", "--seed", "-1")) == EXIT_USAGE

    def test_missing_paths(self):
        assert dispatch(["train"]) == EXIT_USAGE

    def test_missing_config_file(self, tmp_path):
        assert dispatch(["count-params", "--config", str(tmp_path / "nope.json")]) == EXIT_USAGE

    def test_unreadable_checkpoint_is_runtime(self, toy_dir, tmp_path):
        bad = tmp_path / "bad.mdck"
        bad.write_bytes(b"garbage")
        assert dispatch(_eval_args("evaluate", toy_dir, tmp_path / "out", bad)) == EXIT_RUNTIME


class TestLogging:
    def test_handler_follows_current_stderr(self, monkeypatch):
        configure_logging("INFO")
        buffer = io.StringIO()
        monkeypatch.setattr(sys, "stderr", buffer)
        logging.getLogger("memcaption").info("época terminada")
        assert "época terminada" in buffer.getvalue()

    def test_repeated_dispatch(self, capsys):
        for _ in range(2):
            assert dispatch(["fit"]) == EXIT_USAGE
            err = capsys.readouterr().err
            assert "fit" in err
            assert "closed file" not in err


class TestCountParams:
    def test_reference_totals(self, capsys):
        assert dispatch(["count-params", "--n", "512", "--d-a", "100"]) == EXIT_OK
        out = capsys.readouterr().out
        totals = {
            line.split(":")[0]: int(line.split(":")[1])
            for line in out.splitlines()
            if line.endswith(tuple("0123456789")) and "total:" in line
        }
        assert totals["decoder-core total"] == 4_393_848
        assert totals["lstm-baseline total"] == 4_824_264
        assert 3_800_000 <= totals["decoder-core total"] <= 4_500_000

    def test_writes_audit(self, tmp_path, capsys):
        assert dispatch(["count-params", "--n", "16", "--d-a", "4", "--out", str(tmp_path)]) == EXIT_OK
        audit = json.loads((tmp_path / "param_audit.json").read_text())
        assert set(audit) == {"decoder-core", "full", "lstm-baseline"}
        assert audit["full"]["total"] > audit["decoder-core"]["total"]


class TestToyData:
    def test_make_toy_data(self, tmp_path, capsys):
        assert dispatch(["make-toy-data", "--out", str(tmp_path / "toy")]) == EXIT_OK
        paths = json.loads(capsys.readouterr().out)
        assert (tmp_path / "toy" / "manifest.jsonl").exists()
        assert set(paths) == {"features_dir", "manifest", "vocab", "config"}


class TestPipeline:
    def test_train_outputs(self, trained):
        assert (trained / "checkpoint.mdck").exists()
        assert (trained / "best.mdck").exists()
        lines = (trained / "loss_log.jsonl").read_text().splitlines()
        assert len(lines) == 2

    def test_generate(self, trained, toy_dir, tmp_path):
        out = tmp_path / "gen"
        assert dispatch(_eval_args("generate", toy_dir, out, trained / "checkpoint.mdck")) == EXIT_OK
        records = [json.loads(line) for line in (out / "generations.jsonl").read_text().splitlines()]
        assert len(records) == 10
        assert all(0.0 <= r["sentence_bleu_smoothed"] <= 100.0 for r in records)

    def test_generation_dump_is_byte_identical(self, trained, toy_dir, tmp_path):
        a, b = tmp_path / "gen_a", tmp_path / "gen_b"
        assert dispatch(_eval_args("generate", toy_dir, a, trained / "checkpoint.mdck")) == EXIT_OK
        assert dispatch(_eval_args("generate", toy_dir, b, trained / "checkpoint.mdck")) == EXIT_OK
        assert (a / "generations.jsonl").read_bytes() == (b / "generations.jsonl").read_bytes()

    def test_evaluate(self, trained, toy_dir, tmp_path, capsys):
        out = tmp_path / "eval"
        assert dispatch(_eval_args("evaluate", toy_dir, out, trained / "checkpoint.mdck")) == EXIT_OK
        report = json.loads(capsys.readouterr().out)
        assert 0.0 <= report["bleu4"] <= 100.0
        assert report["videos"] == 10
        assert (out / "report.json").exists()

    def test_rescoring_dump_reproduces_report(self, trained, toy_dir, tmp_path, capsys):
        out = tmp_path / "eval"
        assert dispatch(_eval_args("evaluate", toy_dir, out, trained / "checkpoint.mdck")) == EXIT_OK
        report = json.loads(capsys.readouterr().out)

        args = _eval_args(
            "evaluate", toy_dir, tmp_path / "rescored", trained / "checkpoint.mdck",
            "--generations", str(out / "generations.jsonl"),
        )
        assert dispatch(args) == EXIT_OK
        assert json.loads(capsys.readouterr().out) == report

    def test_rescoring_without_checkpoint(self, trained, toy_dir, tmp_path, capsys):
        out = tmp_path / "eval"
        assert dispatch(_eval_args("evaluate", toy_dir, out, trained / "checkpoint.mdck")) == EXIT_OK
        report = json.loads(capsys.readouterr().out)

        args = [
            "evaluate",
            "--manifest", str(toy_dir["manifest"]),
            "--generations", str(out / "generations.jsonl"),
            "--out", str(tmp_path / "rescored"),
        ]
        assert dispatch(args) == EXIT_OK
        rescored = json.loads(capsys.readouterr().out)
        assert rescored["bleu4"] == report["bleu4"]
        assert rescored["cider"] == report["cider"]

    def test_evaluate_aux_head(self, trained, toy_dir, tmp_path, capsys):
        out = tmp_path / "eval3"
        args = _eval_args("evaluate", toy_dir, out, trained / "checkpoint.mdck", "--head", "3")
        assert dispatch(args) == EXIT_OK
        assert json.loads(capsys.readouterr().out)["head"] == 3

    def test_inspect_attention(self, trained, toy_dir, tmp_path, capsys):
        args = _eval_args(
            "inspect-attention", toy_dir, tmp_path / "att", trained / "checkpoint.mdck", "--video-id", "toy03"
        )
        assert dispatch(args) == EXIT_OK
        payload = json.loads(capsys.readouterr().out)
        assert payload["video_id"] == "toy03"
        assert "visual_1" in payload["attention"]
        assert 0.0 <= payload["sentence_bleu_smoothed"] <= 100.0

    def test_inspect_unknown_video(self, trained, toy_dir, tmp_path):
        args = _eval_args(
            "inspect-attention", toy_dir, tmp_path / "att", trained / "checkpoint.mdck", "--video-id", "nope"
        )
        assert dispatch(args) == EXIT_USAGE

    def test_resume_from_checkpoint(self, trained, toy_dir, tmp_path, capsys):
        out = tmp_path / "resumed"
        args = _train_args(toy_dir, out, "--epochs", "1", "--init-checkpoint", str(trained / "checkpoint.mdck"))
        assert dispatch(args) == EXIT_OK
        log = [json.loads(line) for line in (out / "loss_log.jsonl").read_text().splitlines()]
        assert log[0]["epoch"] == 3

    def test_deterministic_training(self, toy_dir, tmp_path, capsys):
        a, b = tmp_path / "a", tmp_path / "b"
        assert dispatch(_train_args(toy_dir, a, "--epochs", "1")) == EXIT_OK
        assert dispatch(_train_args(toy_dir, b, "--epochs", "1")) == EXIT_OK
        assert (a / "checkpoint.mdck").read_bytes() == (b / "checkpoint.mdck").read_bytes()


@pytest.mark.slow
class TestSlow:
    def test_grad_check(self, capsys):
        assert dispatch(["grad-check"]) == EXIT_OK
        report = json.loads(capsys.readouterr().out)
        assert report["passed"]
        assert report["points_per_primitive"] == 10
        assert report["entries_per_tensor"] == 6

    @pytest.mark.parametrize(
        "variant",
        [[], ["--attention", "dot"], ["--decoder", "lstm"]],
        ids=["memory-soft", "memory-dot", "lstm"],
    )
    def test_toy_overfit(self, toy_dir, tmp_path, capsys, variant):
        out = tmp_path / "overfit"
        assert dispatch(_train_args(toy_dir, out, *variant)) == EXIT_OK
        summary = json.loads(capsys.readouterr().out)
        assert summary["final_loss"] < 0.05

        assert dispatch(_eval_args("evaluate", toy_dir, out, out / "checkpoint.mdck")) == EXIT_OK
        report = json.loads(capsys.readouterr().out)
        assert report["bleu4"] == pytest.approx(100.0)

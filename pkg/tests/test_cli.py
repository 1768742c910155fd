"""End-to-end CLI tests on the tiny session dataset.

These drive `main(argv)` in-process: exit codes, printed contracts, and file
outputs.  Training invocations use a handful of epochs — convergence quality
belongs to the acceptance tests, not here.
"""

import json
import re

import numpy as np
import pytest

from azarnet.cli import main
from azarnet.dataset import CLASS_NAMES, load_manifest, resolve_audio_path
from azarnet.dsp import spectrogram_cache_path
from azarnet.model import load_checkpoint


def run(capsys, *argv):
    rc = main(list(argv))
    captured = capsys.readouterr()
    return rc, captured.out, captured.err


class TestSynth:
    def test_writes_dataset_and_prints_manifest(self, tmp_path, capsys):
        rc, out, _ = run(capsys, "synth", "--out", str(tmp_path / "d"), "--per-class", "1", "--seed", "3")
        assert rc == 0
        manifest = out.strip()
        assert manifest.endswith("manifest.jsonl")
        assert len(load_manifest(manifest)) == 7

    def test_bad_per_class(self, tmp_path, capsys):
        rc, _, err = run(capsys, "synth", "--out", str(tmp_path), "--per-class", "0")
        assert rc == 1
        assert "error" in err


class TestPreprocess:
    def test_idempotent_second_run_skips(self, tmp_path, capsys):
        rc, out, _ = run(capsys, "synth", "--out", str(tmp_path), "--per-class", "1")
        manifest = out.strip()
        cache = str(tmp_path / "cache")
        rc, out, _ = run(capsys, "preprocess", "--manifest", manifest, "--cache", cache)
        assert rc == 0
        assert "cached 7 spectrogram(s), 0 up to date" in out
        rc, out, _ = run(capsys, "preprocess", "--manifest", manifest, "--cache", cache)
        assert rc == 0
        assert "cached 0 spectrogram(s), 7 up to date" in out

    def test_missing_audio_fails(self, tmp_path, capsys):
        manifest = tmp_path / "m.jsonl"
        manifest.write_text(json.dumps({"path": "ghost.wav", "label": "Shour"}) + "\n")
        rc, out, err = run(capsys, "preprocess", "--manifest", str(manifest), "--cache", str(tmp_path / "c"))
        assert rc == 1
        assert "ghost.wav" in err
        assert "1 failed" in out

    def test_bad_thread_env(self, tiny_dataset, capsys, monkeypatch):
        manifest, cache = tiny_dataset
        monkeypatch.setenv("AZARNET_THREADS", "zero")
        rc, _, err = run(capsys, "preprocess", "--manifest", str(manifest), "--cache", str(cache))
        assert rc == 1
        assert "AZARNET_THREADS" in err


class TestParams:
    def test_default_table_and_total(self, capsys):
        rc, out, _ = run(capsys, "params")
        assert rc == 0
        assert "Total parameters: 106043" in out

    def test_custom_architecture(self, capsys):
        rc, out, _ = run(
            capsys, "params", "--input-shape", "16,16,1", "--filters", "3,4",
            "--dropout", "0.1,0.2", "--gru-units", "5,6", "--bottleneck", "4",
        )
        assert rc == 0
        assert "Total parameters:" in out

    def test_invalid_filters(self, capsys):
        rc, _, err = run(capsys, "params", "--filters", "a,b")
        assert rc == 1
        assert "--filters" in err

    def test_indivisible_input_rejected(self, capsys):
        rc, _, err = run(capsys, "params", "--input-shape", "100,100,1")
        assert rc == 1
        assert "error" in err


@pytest.fixture(scope="module")
def trained(tiny_dataset, tmp_path_factory):
    manifest, cache = tiny_dataset
    out = tmp_path_factory.mktemp("ckpt") / "model.aznet"
    rc = main([
        "train", "--manifest", str(manifest), "--cache", str(cache),
        "--out", str(out), "--seed", "0", "--epochs", "2",
        "--batch-size", "4", "--split", "0.5", "--patience", "5",
    ])
    assert rc == 0
    return manifest, cache, out


class TestTrainEvalPredict:
    def test_checkpoint_and_history_written(self, trained):
        _, _, out = trained
        assert out.exists()
        history = out.with_suffix(".history.csv")
        lines = history.read_text().strip().splitlines()
        assert lines[0] == "epoch,train_loss,train_acc,val_loss,val_acc"
        assert len(lines) == 3  # header + 2 epochs
        model = load_checkpoint(out)
        assert model.class_names == CLASS_NAMES

    def test_eval_writes_report(self, trained, tmp_path, capsys):
        manifest, cache, out = trained
        report_csv = tmp_path / "report.csv"
        rc, text, _ = run(
            capsys, "eval", "--model", str(out), "--manifest", str(manifest),
            "--cache", str(cache), "--report-csv", str(report_csv),
        )
        assert rc == 0
        assert "macro" in text.lower()
        rows = report_csv.read_text().strip().splitlines()
        assert rows[0].startswith("class,")
        assert len(rows) == 9  # header + 7 classes + macro

    def test_predict_prints_distribution(self, trained, tiny_records, capsys):
        manifest, cache, out = trained
        wav = resolve_audio_path(manifest, tiny_records[0])
        rc, text, _ = run(capsys, "predict", "--model", str(out), "--audio", str(wav))
        assert rc == 0
        probs = [float(m) for m in re.findall(r" (\d\.\d{4})$", text, re.M)]
        assert len(probs) == 7
        assert abs(sum(probs) - 1.0) < 0.01
        assert text.strip().splitlines()[-1].startswith("predicted: ")

    def test_train_without_cache_fails(self, tiny_dataset, tmp_path, capsys):
        manifest, _ = tiny_dataset
        rc, _, err = run(
            capsys, "train", "--manifest", str(manifest), "--cache", str(tmp_path / "empty"),
            "--out", str(tmp_path / "m.aznet"), "--epochs", "1",
        )
        assert rc == 1
        assert "preprocess" in err

    def test_eval_missing_model(self, tiny_dataset, tmp_path, capsys):
        manifest, cache = tiny_dataset
        rc, _, err = run(
            capsys, "eval", "--model", str(tmp_path / "none.aznet"),
            "--manifest", str(manifest), "--cache", str(cache),
        )
        assert rc == 1
        assert "error" in err


class TestGradcheck:
    def test_all_layers_ok(self, capsys):
        rc, out, _ = run(capsys, "gradcheck", "--seed", "0")
        assert rc == 0
        for layer in ("conv2d", "gru", "softmax_xent", "model"):
            assert re.search(rf"^{layer}\s+\d", out, re.M), f"missing {layer} row"
        assert "FAIL" not in out


class TestUsageErrors:
    def test_no_subcommand_exits_2(self):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == 2

    def test_unknown_subcommand_exits_2(self):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 2

    def test_missing_required_flag_exits_2(self):
        with pytest.raises(SystemExit) as exc:
            main(["preprocess", "--manifest", "m.jsonl"])
        assert exc.value.code == 2

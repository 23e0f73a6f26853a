import json

import numpy as np
import pytest

from keymark.cli import (
    EXIT_BAD_CONFIG,
    EXIT_BAD_FORMAT,
    EXIT_MISSING_FILE,
    EXIT_OK,
    EXIT_USAGE,
    cli_main,
    read_tokens,
    write_tokens,
)
from keymark.lm import demo_corpus_path


def run(*argv):
    return cli_main([str(a) for a in argv])


@pytest.fixture
def workspace(tmp_path):
    """Key + byte-level model trained on the bundled corpus."""
    key = tmp_path / "key.bin"
    model = tmp_path / "model.json"
    assert run("keygen", "--kind", "exp", "--n", 64, "--seed", 11, "--out", key) == EXIT_OK
    assert run("train-lm", "--corpus", demo_corpus_path(), "--order", 1, "--out", model) == EXIT_OK
    return tmp_path


class TestTokenIO:
    def test_text_roundtrip(self, tmp_path):
        p = tmp_path / "t.txt"
        write_tokens(p, [5, 0, 300])
        assert read_tokens(p).tolist() == [5, 0, 300]

    def test_bytes_roundtrip(self, tmp_path):
        p = tmp_path / "t.bin"
        write_tokens(p, [0, 255, 17], raw_bytes=True)
        assert read_tokens(p, raw_bytes=True).tolist() == [0, 255, 17]

    def test_bytes_range_checked(self, tmp_path):
        with pytest.raises(Exception):
            write_tokens(tmp_path / "t.bin", [300], raw_bytes=True)

    def test_empty_file(self, tmp_path):
        p = tmp_path / "e.txt"
        write_tokens(p, [])
        assert read_tokens(p).size == 0


class TestPipeline:
    def test_generate_exact_length(self, workspace):
        out = workspace / "y.bin"
        assert run("generate", "--key", workspace / "key.bin", "--model", workspace / "model.json",
                   "--m", 50, "--bytes", "--out", out) == EXIT_OK
        assert read_tokens(out, raw_bytes=True).size == 50

    def test_detect_marked_text(self, workspace, capsys):
        out = workspace / "y.bin"
        run("generate", "--key", workspace / "key.bin", "--model", workspace / "model.json",
            "--m", 50, "--bytes", "--out", out)
        capsys.readouterr()
        assert run("detect", out, "--key", workspace / "key.bin", "--bytes",
                   "--T", 99, "--seed", 1) == EXIT_OK
        report = json.loads(capsys.readouterr().out)
        assert report["mode"] == "permutation"
        assert report["p_value"] <= 0.05

    def test_detect_null_text(self, workspace, capsys):
        null = workspace / "null.bin"
        write_tokens(null, np.random.default_rng(0).integers(0, 256, 50), raw_bytes=True)
        capsys.readouterr()
        assert run("detect", null, "--key", workspace / "key.bin", "--bytes",
                   "--T", 99, "--seed", 1) == EXIT_OK
        report = json.loads(capsys.readouterr().out)
        assert report["p_value"] > 0.05

    def test_null_uniformity_spot_check(self, workspace, capsys):
        # key-independent text should rarely alarm
        rng = np.random.default_rng(42)
        low = 0
        capsys.readouterr()
        for t in range(40):
            null = workspace / "n.bin"
            write_tokens(null, rng.integers(0, 256, 40), raw_bytes=True)
            run("detect", null, "--key", workspace / "key.bin", "--bytes",
                "--T", 19, "--seed", t)
            if json.loads(capsys.readouterr().out)["p_value"] <= 0.05:
                low += 1
        assert low <= 6  # expect about 2 of 40 at the 5% level

    def test_detect_report_file_and_csv(self, workspace, capsys):
        out = workspace / "y.bin"
        run("generate", "--key", workspace / "key.bin", "--model", workspace / "model.json",
            "--m", 40, "--bytes", "--out", out)
        report_path = workspace / "report.json"
        assert run("detect", out, "--key", workspace / "key.bin", "--bytes",
                   "--out", report_path) == EXIT_OK
        assert json.loads(report_path.read_text())["resamples"] == 99
        csv_path = workspace / "report.csv"
        assert run("detect", out, "--key", workspace / "key.bin", "--bytes",
                   "--format", "csv", "--out", csv_path) == EXIT_OK
        header = csv_path.read_text().splitlines()[0]
        assert header.startswith("p_value,")
        capsys.readouterr()

    def test_attack_roundtrip(self, workspace):
        out = workspace / "y.bin"
        run("generate", "--key", workspace / "key.bin", "--model", workspace / "model.json",
            "--m", 40, "--bytes", "--out", out)
        hit = workspace / "hit.bin"
        assert run("attack", out, "--attack", "delete", "--fraction", 0.2,
                   "--bytes", "--seed", 5, "--out", hit) == EXIT_OK
        assert read_tokens(hit, raw_bytes=True).size == 32

    def test_crop_flags(self, workspace):
        src = workspace / "src.txt"
        write_tokens(src, list(range(30)))
        dst = workspace / "dst.txt"
        assert run("attack", src, "--attack", "crop", "--start", 5, "--len", 10,
                   "--out", dst) == EXIT_OK
        assert read_tokens(dst).tolist() == list(range(5, 15))

    def test_shift_and_hash_generation(self, workspace):
        a = workspace / "a.bin"
        assert run("generate", "--key", workspace / "key.bin", "--model", workspace / "model.json",
                   "--m", 30, "--shift", "--seed", 7, "--bytes", "--out", a) == EXIT_OK
        b = workspace / "b.bin"
        assert run("generate", "--model", workspace / "model.json", "--m", 30,
                   "--hash-window", 1, "--seed", 7, "--bytes", "--out", b) == EXIT_OK
        assert read_tokens(a, raw_bytes=True).size == 30
        assert read_tokens(b, raw_bytes=True).size == 30

    def test_reference_flow(self, workspace, tmp_path, capsys):
        corpus = tmp_path / "corpus.txt"
        rng = np.random.default_rng(3)
        lines = [" ".join(str(t) for t in rng.integers(0, 256, 90)) for _ in range(30)]
        corpus.write_text("\n".join(lines) + "\n")
        ref = tmp_path / "ref.bin"
        assert run("reference", "--corpus", corpus, "--T", 9, "--m", 30,
                   "--kind", "exp", "--n", 64, "--seed", 2, "--out", ref) == EXIT_OK
        y = workspace / "y.bin"
        run("generate", "--key", workspace / "key.bin", "--model", workspace / "model.json",
            "--m", 30, "--bytes", "--out", y)
        capsys.readouterr()
        assert run("detect", y, "--key", workspace / "key.bin", "--bytes",
                   "--reference", ref) == EXIT_OK
        report = json.loads(capsys.readouterr().out)
        assert report["mode"] == "reference"

    def test_sweep_command(self, workspace, tmp_path):
        model8 = tmp_path / "m8.json"
        from keymark.lm import markov_train

        markov_train(np.random.default_rng(1).integers(0, 8, 2000),
                     order=1, smoothing=0.5, vocab_size=8).save(model8)
        cfg = tmp_path / "sweep.json"
        cfg.write_text(json.dumps({"variant": "exp", "model": str(model8),
                                   "m": [12], "n": [8], "samples": 3, "T": 9,
                                   "bootstrap": 20, "seed": 0}))
        out = tmp_path / "cells.csv"
        assert run("sweep", "--config", cfg, "--out", out) == EXIT_OK
        assert out.read_text().startswith("variant,")


class TestExitCodes:
    def test_missing_file(self, workspace):
        assert run("detect", workspace / "absent.bin", "--key", workspace / "key.bin") == EXIT_MISSING_FILE

    def test_corrupt_key(self, workspace):
        y = workspace / "y.txt"
        write_tokens(y, [1, 2, 3])
        assert run("detect", y, "--key", workspace / "model.json") == EXIT_BAD_FORMAT

    def test_unparseable_tokens(self, workspace, tmp_path):
        bad = tmp_path / "bad.txt"
        bad.write_text("12 potato 7\n")
        assert run("detect", bad, "--key", workspace / "key.bin") == EXIT_BAD_FORMAT

    def test_config_error(self, workspace):
        y = workspace / "y.bin"
        run("generate", "--key", workspace / "key.bin", "--model", workspace / "model.json",
            "--m", 20, "--bytes", "--out", y)
        assert run("detect", y, "--key", workspace / "key.bin", "--bytes",
                   "--variant", "its") == EXIT_BAD_CONFIG

    def test_usage_error(self, capsys):
        assert run("detect") == EXIT_USAGE
        assert run("frobnicate") == EXIT_USAGE
        capsys.readouterr()

    def test_generate_needs_key_or_hash(self, workspace):
        assert run("generate", "--model", workspace / "model.json", "--m", 5,
                   "--out", workspace / "x.txt") == EXIT_BAD_CONFIG

    def test_errors_go_to_stderr(self, workspace, capsys):
        run("detect", workspace / "absent.bin", "--key", workspace / "key.bin")
        captured = capsys.readouterr()
        assert "error[3]" in captured.err

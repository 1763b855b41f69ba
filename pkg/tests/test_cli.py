"""Model-free CLI behavior; model-backed scan/serve paths live in test_e2e
and test_acceptance."""

import json
import pytest

from vulnhunter import cli


def run(args):
    return cli.main(args)


class TestHelp:
    def test_top_level_help(self, capsys):
        with pytest.raises(SystemExit) as e:
            run(["--help"])
        assert e.value.code == 0
        out = capsys.readouterr().out
        for cmd in ("gen-corpus", "train", "eval", "scan", "serve"):
            assert cmd in out

    @pytest.mark.parametrize("cmd", ["gen-corpus", "train", "eval", "scan", "serve"])
    def test_subcommand_help(self, cmd, capsys):
        with pytest.raises(SystemExit) as e:
            run([cmd, "--help"])
        assert e.value.code == 0


class TestGenCorpus:
    def test_writes_csv_and_registry(self, tmp_path, capsys):
        out = tmp_path / "corpus.csv"
        rc = run(["gen-corpus", "--out", str(out), "--n", "40", "--cwe-ids", "4",
                  "--cwe-types", "2", "--seed", "3"])
        assert rc == 0
        assert out.exists()
        registry = json.loads((tmp_path / "corpus.csv.registry.json").read_text())
        assert len(registry["cwe_ids"]) == 4
        assert len(set(registry["id_to_type"].values())) == 2

    def test_zero_records_header_only(self, tmp_path):
        out = tmp_path / "empty.csv"
        assert run(["gen-corpus", "--out", str(out), "--n", "0"]) == 0
        lines = out.read_text().splitlines()
        assert lines == ["id,code,vulnerable,cwe_id,cwe_type,cvss"]

    def test_seeded_rerun_byte_identical(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        run(["gen-corpus", "--out", str(a), "--n", "50", "--seed", "9"])
        run(["gen-corpus", "--out", str(b), "--n", "50", "--seed", "9"])
        assert a.read_bytes() == b.read_bytes()

    def test_jsonl_format(self, tmp_path):
        out = tmp_path / "c.jsonl"
        assert run(["gen-corpus", "--out", str(out), "--n", "10"]) == 0
        lines = [json.loads(l) for l in out.read_text().splitlines()]
        assert len(lines) == 10


@pytest.fixture(scope="module")
def small_detector_dir(tmp_path_factory):
    """Train a detector for 0 epochs on a small corpus: fast, deterministic."""
    d = tmp_path_factory.mktemp("cli_train")
    data = d / "data.csv"
    assert run(["gen-corpus", "--out", str(data), "--n", "60", "--seed", "4"]) == 0
    out = d / "run"
    rc = run(["train", "--task", "detector", "--data", str(data), "--out", str(out),
              "--epochs", "0", "--seed", "4"])
    assert rc == 0
    return data, out


class TestTrain:
    def test_zero_epochs_emits_init_checkpoint(self, small_detector_dir):
        _, out = small_detector_dir
        assert (out / "detector.ckpt").exists()
        assert (out / "vocab.json").exists()
        assert (out / "split.json").exists()
        run_doc = json.loads((out / "detector_run.json").read_text())
        assert run_doc["history"] == []
        assert run_doc["best_epoch"] == -1

    def test_checkpoint_loadable(self, small_detector_dir):
        from vulnhunter.checkpoint import load_checkpoint

        _, out = small_detector_dir
        ckpt = load_checkpoint(out / "detector.ckpt")
        assert ckpt.kind == "detector"

    def test_missing_data_file_exit_two(self, tmp_path, capsys):
        rc = run(["train", "--task", "detector", "--data", str(tmp_path / "nope.csv"),
                  "--out", str(tmp_path / "o")])
        assert rc == 2
        assert "error" in capsys.readouterr().err


class TestEval:
    def test_eval_prints_metrics(self, small_detector_dir, capsys):
        data, out = small_detector_dir
        rc = run(["eval", "--checkpoint", str(out / "detector.ckpt"), "--data", str(data),
                  "--split", "test", "--seed", "4"])
        assert rc == 0
        assert "accuracy" in capsys.readouterr().out

    def test_eval_with_manifest(self, small_detector_dir, capsys):
        data, out = small_detector_dir
        rc = run(["eval", "--checkpoint", str(out / "detector.ckpt"), "--data", str(data),
                  "--split", "test", "--manifest", str(out / "split.json")])
        assert rc == 0

    def test_eval_missing_checkpoint_exit_two(self, small_detector_dir, capsys):
        data, _ = small_detector_dir
        rc = run(["eval", "--checkpoint", "/missing.ckpt", "--data", str(data)])
        assert rc == 2

    def test_eval_writes_tables(self, small_detector_dir, tmp_path, capsys):
        data, out = small_detector_dir
        dest = tmp_path / "tables"
        rc = run(["eval", "--checkpoint", str(out / "detector.ckpt"), "--data", str(data),
                  "--seed", "4", "--out", str(dest)])
        assert rc == 0
        assert (dest / "metrics.json").exists()
        assert (dest / "confusion.csv").exists()


class TestConfigFile:
    def test_config_supplies_defaults_flags_override(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"gen-corpus": {"n": 7, "seed": 2}}))
        out = tmp_path / "c.csv"
        rc = run(["--config", str(cfg), "gen-corpus", "--out", str(out)])
        assert rc == 0
        from vulnhunter import corpus

        records, _ = corpus.load_dataset(out)
        assert len(records) == 7  # config supplied --n

    def test_bad_config_exit_two(self, tmp_path, capsys):
        rc = run(["--config", str(tmp_path / "nope.json"), "gen-corpus",
                  "--out", str(tmp_path / "x.csv")])
        assert rc == 2


class TestScanErrors:
    def test_no_models_configured(self, tmp_path, monkeypatch, capsys):
        monkeypatch.delenv("VULNHUNTER_MODELS", raising=False)
        f = tmp_path / "a.c"
        f.write_text("int f(){}")
        rc = run(["scan", str(f)])
        assert rc == 2
        assert "VULNHUNTER_MODELS" in capsys.readouterr().err

    def test_bad_models_dir(self, tmp_path, capsys):
        f = tmp_path / "a.c"
        f.write_text("int f(){}")
        rc = run(["scan", str(f), "--models", str(tmp_path)])
        assert rc == 2

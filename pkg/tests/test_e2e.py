"""End-to-end behavior of the engine and the scan command against trained
desk models (shared session fixture)."""

import json
import pytest

from vulnhunter import cli
from vulnhunter.engine import Engine, demo_repair_provider, severity_band


@pytest.fixture(scope="module")
def desk_engine(desk_training):
    return Engine.load(desk_training["models_dir"], repair_provider=demo_repair_provider)


class TestEngineEndToEnd:
    def test_empty_file(self, desk_engine):
        assert desk_engine.analyze_source("", file="empty.c").diagnostics == []

    def test_planted_file_one_diagnostic(self, desk_engine, planted_fixture_source):
        planted, clean = planted_fixture_source
        text = clean + "\n" + planted
        result = desk_engine.analyze_source(text, file="mix.c")
        assert len(result.diagnostics) == 1
        d = result.diagnostics[0]
        assert d.band == severity_band(d.cvss)
        assert d.function_span[0] <= d.top_lines[0] <= d.function_span[1]
        for line, score in d.line_scores:
            assert d.function_span[0] <= line <= d.function_span[1]
            assert score >= 0
        assert 0.5 <= d.p_vulnerable <= 1.0
        assert d.cwe_id.startswith("CWE-")
        assert d.repair is not None
        assert d.function_span[0] <= d.repair.target_line <= d.function_span[1]

    def test_clean_file_empty(self, desk_engine, planted_fixture_source):
        _, clean = planted_fixture_source
        assert desk_engine.analyze_source(clean, file="clean.c").diagnostics == []

    def test_gating_order(self, desk_engine, planted_fixture_source):
        # threshold above the detector score suppresses everything downstream
        planted, _ = planted_fixture_source
        gated = Engine(
            detector=desk_engine.detector,
            classifier=desk_engine.classifier,
            regressor=desk_engine.regressor,
            vocab=desk_engine.vocab,
            threshold=1.01,
        )
        assert gated.analyze_source(planted).diagnostics == []

    def test_idempotent(self, desk_engine, planted_fixture_source):
        planted, _ = planted_fixture_source
        a = desk_engine.analyze_source(planted, file="x.c")
        b = desk_engine.analyze_source(planted, file="x.c")
        assert [d.to_json() for d in a.diagnostics] == [d.to_json() for d in b.diagnostics]

    def test_vocab_hash_mismatch_refused(self, desk_training):
        from vulnhunter.checkpoint import load_checkpoint
        from vulnhunter.engine import EngineError
        from vulnhunter.tokenizer import train_bpe

        other_vocab = train_bpe(["completely different corpus"], vocab_size=262)
        with pytest.raises(EngineError, match="different tokenizer"):
            Engine(
                detector=load_checkpoint(desk_training["models_dir"] / "detector.ckpt"),
                classifier=load_checkpoint(desk_training["models_dir"] / "classifier.ckpt"),
                regressor=load_checkpoint(desk_training["models_dir"] / "regressor.ckpt"),
                vocab=other_vocab,
            )


class TestScanCommand:
    def test_clean_scan_exit_zero(self, desk_training, planted_fixture_source, tmp_path,
                                  capsys):
        _, clean = planted_fixture_source
        f = tmp_path / "clean.c"
        f.write_text(clean)
        rc = cli.main(["scan", str(f), "--models", str(desk_training["models_dir"]),
                       "--format", "json", "--fail-on-findings"])
        assert rc == 0
        body = json.loads(capsys.readouterr().out)
        assert body["diagnostics"] == []

    def test_planted_scan_fails_when_asked(self, desk_training, planted_fixture_source,
                                           tmp_path, capsys):
        planted, clean = planted_fixture_source
        f = tmp_path / "mix.c"
        f.write_text(clean + "\n" + planted)
        rc = cli.main(["scan", str(f), "--models", str(desk_training["models_dir"]),
                       "--format", "json", "--fail-on-findings", "--demo-repairs"])
        assert rc == 1
        body = json.loads(capsys.readouterr().out)
        assert len(body["diagnostics"]) == 1
        d = body["diagnostics"][0]
        assert d["band"] == severity_band(d["cvss"])
        assert d["function_span"][0] <= d["top_lines"][0] <= d["function_span"][1]

    def test_sarif_output_schema_shape(self, desk_training, planted_fixture_source,
                                       tmp_path, capsys):
        planted, _ = planted_fixture_source
        f = tmp_path / "planted.c"
        f.write_text(planted)
        rc = cli.main(["scan", str(f), "--models", str(desk_training["models_dir"]),
                       "--format", "sarif"])
        assert rc == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["version"] == "2.1.0"
        results = doc["runs"][0]["results"]
        assert len(results) == 1
        assert results[0]["ruleId"].startswith("CWE-")

    def test_unreadable_path_exit_two(self, desk_training, capsys):
        rc = cli.main(["scan", "/nonexistent/file.c",
                       "--models", str(desk_training["models_dir"])])
        assert rc == 2
        assert "error" in capsys.readouterr().err

    def test_env_var_models_dir(self, desk_training, planted_fixture_source, tmp_path,
                                monkeypatch, capsys):
        _, clean = planted_fixture_source
        f = tmp_path / "c.c"
        f.write_text(clean)
        monkeypatch.setenv("VULNHUNTER_MODELS", str(desk_training["models_dir"]))
        rc = cli.main(["scan", str(f), "--format", "text"])
        assert rc == 0
        assert "no findings" in capsys.readouterr().out

    def test_multi_file_scan_order_deterministic(self, desk_training,
                                                 planted_fixture_source, tmp_path, capsys):
        planted, clean = planted_fixture_source
        # files given out of order; results must come back sorted by path
        (tmp_path / "b.c").write_text(planted)
        (tmp_path / "a.c").write_text(planted)
        (tmp_path / "c.c").write_text(clean)
        args = ["scan", str(tmp_path / "c.c"), str(tmp_path / "b.c"), str(tmp_path / "a.c"),
                "--models", str(desk_training["models_dir"]), "--format", "json"]
        assert cli.main(args) == 0
        first = capsys.readouterr().out
        files = [d["file"] for d in json.loads(first)["diagnostics"]]
        assert files == sorted(files)
        assert len(files) == 2
        assert cli.main(args) == 0
        assert capsys.readouterr().out == first

    def test_text_format_renders(self, desk_training, planted_fixture_source, tmp_path,
                                 capsys):
        planted, _ = planted_fixture_source
        f = tmp_path / "p.c"
        f.write_text(planted)
        rc = cli.main(["scan", str(f), "--models", str(desk_training["models_dir"]),
                       "--format", "text", "--demo-repairs"])
        assert rc == 0
        out = capsys.readouterr().out
        assert "CWE-" in out and "cvss=" in out and "quick fix" in out

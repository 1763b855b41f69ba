import json

import numpy as np
import pytest

from vulnhunter import engine as eng
from vulnhunter.engine import (
    AnalysisResult, CweMetadata, Diagnostic, EngineError, Repair, cwe_info,
    demo_repair_provider, diagnostics_to_json, diagnostics_to_sarif,
    localize_lines, null_repair_provider, severity_band,
)


class TestSeverityBand:
    BANDING = [
        (0.0, "Low"), (3.9, "Low"), (4.0, "Medium"), (6.9, "Medium"),
        (7.0, "High"), (8.9, "High"), (9.0, "Critical"), (10.0, "Critical"),
    ]

    @pytest.mark.parametrize("score,band", BANDING)
    def test_banding_table(self, score, band):
        assert severity_band(score) == band

    def test_worked_example_seven_is_high(self):
        assert severity_band(7.0) == "High"

    def test_clamping(self):
        assert severity_band(-3.0) == "Low"
        assert severity_band(42.0) == "Critical"


def brute_force_line_scores(attention, line_of):
    """Independent oracle: triple loop over layers/heads/queries."""
    scores = {}
    for layer in attention:
        a = layer[0] if layer.ndim == 4 else layer
        n_heads, T, _ = a.shape
        for h in range(n_heads):
            for q in range(T):
                for t in range(T):
                    line = line_of[t]
                    if line >= 1:
                        scores[line] = scores.get(line, 0.0) + a[h, q, t]
    return sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))


def random_attention(rng, layers, heads, T):
    out = []
    for _ in range(layers):
        raw = rng.random((1, heads, T, T))
        out.append(raw / raw.sum(axis=-1, keepdims=True))
    return out


class TestLocalizeLines:
    def test_matches_brute_force_on_random_tensors(self):
        rng = np.random.default_rng(11)
        for _ in range(25):
            T = int(rng.integers(4, 20))
            layers = int(rng.integers(1, 3))
            heads = int(rng.integers(1, 4))
            att = random_attention(rng, layers, heads, T)
            line_of = [-1] + [int(l) for l in rng.integers(1, 5, size=T - 2)] + [-1]
            got = localize_lines(att, line_of)
            want = brute_force_line_scores(att, line_of)
            assert [g[0] for g in got] == [w[0] for w in want]
            for (gl, gs), (wl, ws) in zip(got, want):
                assert gs == pytest.approx(ws, abs=1e-9)

    def test_score_conservation(self):
        rng = np.random.default_rng(12)
        T, layers, heads = 12, 2, 4
        att = random_attention(rng, layers, heads, T)
        line_of = [-1] + [1, 1, 2, 2, 2, 3, 4, 4, 5, 6] + [-1]
        scores = localize_lines(att, line_of)
        total = sum(s for _, s in scores)
        expected = 0.0
        for layer in att:
            mass = layer[0].sum(axis=(0, 1))
            expected += sum(mass[i] for i, l in enumerate(line_of) if l >= 1)
        assert total == pytest.approx(expected, abs=1e-9)
        assert all(s >= 0 for _, s in scores)

    def test_single_line_function_gets_all_mass(self):
        rng = np.random.default_rng(13)
        att = random_attention(rng, 1, 2, 6)
        line_of = [-1, 1, 1, 1, 1, -1]
        scores = localize_lines(att, line_of)
        assert len(scores) == 1 and scores[0][0] == 1

    def test_tie_breaks_by_lower_line(self):
        # uniform attention, one token per line: equal scores, line order wins
        T = 4
        a = np.full((1, 1, T, T), 1.0 / T)
        scores = localize_lines([a], [-1, 3, 2, -1])
        assert [l for l, _ in scores] == [2, 3]

    def test_top_k(self):
        rng = np.random.default_rng(14)
        att = random_attention(rng, 1, 1, 8)
        scores = localize_lines(att, [-1, 1, 2, 3, 4, 5, 6, -1], top_k=2)
        assert len(scores) == 2

    def test_empty_map_rejected(self):
        with pytest.raises(EngineError):
            localize_lines([], [])


class TestCweMetadata:
    def test_known_id(self):
        info = cwe_info("CWE-787")
        assert info.name == "Out-of-bounds Write"
        assert info.url.endswith("/787.html")
        assert info.cwe_type == "Base"

    def test_unknown_id_fallback(self):
        info = cwe_info("CWE-99999")
        assert info.url == "https://cwe.mitre.org/data/definitions/99999.html"
        assert "CWE-99999" in info.name or "CWE-99999" in info.summary

    def test_synthetic_ids_resolve(self):
        md = CweMetadata()
        for i in range(6):
            info = md.lookup(f"CWE-{9001 + i}")
            assert info.url.startswith("https://cwe.mitre.org/")


class TestRepairProviders:
    def test_null_provider(self):
        assert null_repair_provider("hazard_alpha(x);", 3) is None

    def test_demo_provider_on_planted_pattern(self):
        line = "    hazard_alpha(buf); hazard_alpha(idx);"
        repair = demo_repair_provider(line, 7)
        assert repair is not None
        assert repair.target_line == 7
        assert repair.replacement == "    checked_guard(buf); checked_guard(idx);"
        # deterministic
        assert demo_repair_provider(line, 7) == repair

    def test_demo_provider_ignores_clean_lines(self):
        assert demo_repair_provider("    return a + b;", 2) is None


def make_diag(**kw):
    base = dict(
        file="a.c", function_name="f", function_span=(1, 4), top_lines=(2,),
        p_vulnerable=0.9, line_scores=[(2, 1.5), (1, 0.5)],
        cwe_id="CWE-787", cwe_confidence=0.8, cwe_type="Base", type_confidence=0.7,
        cvss=7.2, band="High", description="Out-of-bounds Write: test",
        url="https://cwe.mitre.org/data/definitions/787.html",
        repair=Repair(replacement="x;", target_line=2), truncated=False,
    )
    base.update(kw)
    return Diagnostic(**base)


class TestRenderings:
    def test_json_schema_valid(self):
        import jsonschema
        from pathlib import Path

        schema = json.loads(
            (Path(__file__).parent.parent / "docs" / "diagnostic.schema.json").read_text()
        )
        payload = make_diag().to_json()
        jsonschema.validate(payload, schema)
        no_repair = make_diag(repair=None, band="Low", cvss=1.0).to_json()
        jsonschema.validate(no_repair, schema)

    def test_json_deterministic(self):
        result = AnalysisResult(diagnostics=[make_diag()], warnings=["w"])
        assert diagnostics_to_json(result) == diagnostics_to_json(result)

    def test_sarif_structure(self):
        result = AnalysisResult(diagnostics=[make_diag(), make_diag(cwe_id="CWE-125",
                                                                    band="Low", cvss=2.0)])
        doc = json.loads(diagnostics_to_sarif(result))
        assert doc["version"] == "2.1.0"
        run = doc["runs"][0]
        assert run["tool"]["driver"]["name"] == "vulnhunter"
        rule_ids = [r["id"] for r in run["tool"]["driver"]["rules"]]
        assert rule_ids == ["CWE-125", "CWE-787"]
        levels = {r["ruleId"]: r["level"] for r in run["results"]}
        assert levels["CWE-787"] == "error"
        assert levels["CWE-125"] == "note"
        assert run["results"][0]["locations"][0]["physicalLocation"]["region"]["startLine"] == 2

    def test_sarif_has_no_timestamps(self):
        result = AnalysisResult(diagnostics=[make_diag()])
        text = diagnostics_to_sarif(result)
        assert "invocation" not in text
        assert "startTimeUtc" not in text

    def test_band_consistent_with_score(self):
        d = make_diag()
        assert eng.severity_band(d.cvss) == d.band

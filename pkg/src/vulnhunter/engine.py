"""Analysis pipeline: extract, detect, localize, classify, rate, report.

The engine owns three trained models sharing one tokenizer (enforced via
the vocab content hash): a binary detector whose attention also drives
line localization, the dual-head CWE classifier, and the severity
regressor.  Functions scoring below the detector threshold produce no
output at all; everything else becomes a Diagnostic in original file
coordinates.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .checkpoint import Checkpoint, load_checkpoint
from .extractor import extract_functions, map_line, newline_offsets, strip_comments
from .nnmodel import forward_classify, forward_detect, forward_regress
from .tokenizer import DUAL_CLS, SINGLE_CLS, Vocab, encode

DIAGNOSTIC_SCHEMA_VERSION = 1

BANDS = ("Low", "Medium", "High", "Critical")


class EngineError(ValueError):
    pass


def severity_band(cvss: float) -> str:
    """CVSS v3.1 qualitative band; scores are clamped into [0, 10] first
    and the 0.0 "None" band is folded into Low."""
    s = min(10.0, max(0.0, float(cvss)))
    if s < 4.0:
        return "Low"
    if s < 7.0:
        return "Medium"
    if s < 9.0:
        return "High"
    return "Critical"


@dataclass
class Repair:
    replacement: str
    target_line: int  # original file coordinates


@dataclass
class Diagnostic:
    """One reported finding, entirely in original file coordinates."""

    file: str
    function_name: str
    function_span: tuple[int, int]
    top_lines: tuple[int, ...]  # best-ranked vulnerable line(s)
    p_vulnerable: float
    line_scores: list  # [(line, score)] ranked, descending
    cwe_id: str
    cwe_confidence: float
    cwe_type: str
    type_confidence: float
    cvss: float
    band: str
    description: str
    url: str
    repair: Repair | None = None
    truncated: bool = False
    function_id: str | None = None

    def to_json(self) -> dict:
        return {
            "schema_version": DIAGNOSTIC_SCHEMA_VERSION,
            "file": self.file,
            "function_id": self.function_id,
            "function_name": self.function_name,
            "function_span": list(self.function_span),
            "top_lines": list(self.top_lines),
            "p_vulnerable": round(self.p_vulnerable, 6),
            "line_scores": [[ln, round(sc, 6)] for ln, sc in self.line_scores],
            "cwe_id": self.cwe_id,
            "cwe_confidence": round(self.cwe_confidence, 6),
            "cwe_type": self.cwe_type,
            "type_confidence": round(self.type_confidence, 6),
            "cvss": round(self.cvss, 4),
            "band": self.band,
            "description": self.description,
            "url": self.url,
            "repair": None if self.repair is None else
                {"replacement": self.repair.replacement, "target_line": self.repair.target_line},
            "truncated": self.truncated,
        }


@dataclass
class AnalysisResult:
    diagnostics: list
    warnings: list = field(default_factory=list)


# ---------------------------------------------------------------------------
# Line localization


def localize_lines(attention, line_of: Sequence[int], top_k: int | None = None):
    """Rank source lines by received self-attention mass.

    Per-token score is the attention mass the token receives from every
    query position, summed over all layers and heads; a line scores the sum
    of its tokens.  Ties rank the lower line number first.  The summed line
    scores equal the total mass received by non-special positions.
    """
    if len(line_of) == 0:
        raise EngineError("empty token line map")
    arrays = []
    for layer in attention:
        a = np.asarray(layer, dtype=np.float64)
        if a.ndim == 4:  # (batch, heads, T, T) with batch of one
            a = a[0]
        if a.ndim != 3 or a.shape[-1] != len(line_of):
            raise EngineError("attention shape does not match token map")
        arrays.append(a)
    mass = np.zeros(len(line_of))
    for a in arrays:
        mass += a.sum(axis=(0, 1))
    scores: dict[int, float] = {}
    for pos, line in enumerate(line_of):
        if line >= 1:
            scores[line] = scores.get(line, 0.0) + float(mass[pos])
    ranked = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
    return ranked[:top_k] if top_k is not None else ranked


# ---------------------------------------------------------------------------
# CWE metadata


@dataclass
class CweInfo:
    cwe_id: str
    name: str
    cwe_type: str
    summary: str
    url: str


class CweMetadata:
    """Bundled offline CWE descriptions; unknown ids get a constructed
    fallback entry (no network access is ever attempted)."""

    def __init__(self, db: dict | None = None):
        if db is None:
            with resources.files("vulnhunter.data").joinpath("cwe_db.json").open("rb") as fh:
                db = json.load(fh)
        self.db = db

    def lookup(self, cwe_id: str) -> CweInfo:
        entry = self.db.get(cwe_id)
        number = re.sub(r"\D", "", cwe_id) or "0"
        url = f"https://cwe.mitre.org/data/definitions/{number}.html"
        if entry is None:
            return CweInfo(
                cwe_id=cwe_id,
                name=cwe_id,
                cwe_type="",
                summary=f"No bundled description for {cwe_id}.",
                url=url,
            )
        return CweInfo(
            cwe_id=cwe_id,
            name=entry.get("name", cwe_id),
            cwe_type=entry.get("cwe_type", ""),
            summary=entry.get("summary", ""),
            url=entry.get("url", url),
        )


def cwe_info(cwe_id: str, metadata: CweMetadata | None = None) -> CweInfo:
    return (metadata or CweMetadata()).lookup(cwe_id)


# ---------------------------------------------------------------------------
# Repair providers

RepairProvider = Callable[[str, int], "Repair | None"]
# called with (original line text, original line number)


def null_repair_provider(line_text: str, line_no: int) -> Repair | None:
    return None


_HAZARD_CALL = re.compile(r"hazard_\w+\(([^)]*)\)")


def demo_repair_provider(line_text: str, line_no: int) -> Repair | None:
    """Rule-based demo: rewrites the synthetic planted calls into a guarded
    form.  Returns None when the line holds no recognizable pattern."""
    if not _HAZARD_CALL.search(line_text):
        return None
    replacement = _HAZARD_CALL.sub(r"checked_guard(\1)", line_text)
    return Repair(replacement=replacement, target_line=line_no)


# ---------------------------------------------------------------------------
# Engine


def _softmax_row(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max()
    e = np.exp(z)
    return e / e.sum()


class Engine:
    def __init__(
        self,
        detector: Checkpoint,
        classifier: Checkpoint,
        regressor: Checkpoint,
        vocab: Vocab,
        threshold: float = 0.5,
        repair_provider: RepairProvider | None = None,
        metadata: CweMetadata | None = None,
    ):
        vh = vocab.content_hash()
        for ckpt in (detector, classifier, regressor):
            if ckpt.vocab_hash != vh:
                raise EngineError(
                    f"{ckpt.kind} checkpoint was trained with a different tokenizer "
                    f"(vocab hash {ckpt.vocab_hash[:12]}.. != {vh[:12]}..)"
                )
        if detector.kind != "detector" or classifier.kind != "classifier" \
                or regressor.kind != "regressor":
            raise EngineError("checkpoint kinds do not match their roles")
        self.detector = detector
        self.classifier = classifier
        self.regressor = regressor
        self.vocab = vocab
        self.threshold = threshold
        self.repair_provider = repair_provider or null_repair_provider
        self.metadata = metadata or CweMetadata()

    @classmethod
    def load(cls, models_dir: str | Path, threshold: float = 0.5,
             repair_provider: RepairProvider | None = None) -> "Engine":
        d = Path(models_dir)
        missing = [n for n in ("detector.ckpt", "classifier.ckpt", "regressor.ckpt", "vocab.json")
                   if not (d / n).exists()]
        if missing:
            raise EngineError(f"model directory {d} is missing {missing}")
        return cls(
            detector=load_checkpoint(d / "detector.ckpt"),
            classifier=load_checkpoint(d / "classifier.ckpt"),
            regressor=load_checkpoint(d / "regressor.ckpt"),
            vocab=Vocab.load(d / "vocab.json"),
            threshold=threshold,
            repair_provider=repair_provider,
        )

    def model_hashes(self) -> dict:
        return {
            "detector": self.detector.params_hash,
            "classifier": self.classifier.params_hash,
            "regressor": self.regressor.params_hash,
            "vocab": self.vocab.content_hash(),
        }

    # -- core per-function analysis -------------------------------------

    def _analyze_function_text(
        self,
        cleaned_text: str,
        to_original_line: Callable[[int], int],
        original_line_text: Callable[[int], str],
        file: str,
        name: str,
        span: tuple[int, int],
        function_id: str | None,
        warnings: list,
    ) -> Diagnostic | None:
        det_cfg = self.detector.params.config
        seq = encode(cleaned_text, self.vocab, SINGLE_CLS, det_cfg.max_seq_len)
        if seq.truncated:
            warnings.append(f"{file}: function {name} exceeds {det_cfg.max_seq_len} tokens; "
                            "analyzed truncated")
        logits, attention, _ = forward_detect(self.detector.params, seq)
        p_vuln = float(_softmax_row(logits[0])[1])
        if p_vuln < self.threshold:
            return None

        ranked_cleaned = localize_lines(attention, seq.line_of)
        line_scores = []
        for cl, score in ranked_cleaned:
            ol = to_original_line(cl)
            line_scores.append((ol, score))
        # mapping can merge cleaned lines into one original line; keep ranking
        # but drop duplicate lines (highest-scored occurrence wins)
        seen = set()
        deduped = []
        for ln, sc in line_scores:
            if ln not in seen:
                seen.add(ln)
                deduped.append((ln, sc))
        top_line = deduped[0][0] if deduped else span[0]

        cls_cfg = self.classifier.params.config
        dseq = encode(cleaned_text, self.vocab, DUAL_CLS, cls_cfg.max_seq_len)
        out = forward_classify(self.classifier.params, [dseq])
        id_idx = int(np.argmax(out.probs_id[0]))
        type_idx = int(np.argmax(out.probs_type[0]))
        registry = self.classifier.registry
        cwe_id = registry.cwe_ids[id_idx]
        cwe_type = registry.cwe_types[type_idx]

        rseq = encode(cleaned_text, self.vocab, SINGLE_CLS,
                      self.regressor.params.config.max_seq_len)
        raw_score, _ = forward_regress(self.regressor.params, rseq)
        cvss = float(min(10.0, max(0.0, raw_score[0])))

        info = self.metadata.lookup(cwe_id)
        repair = None
        try:
            repair = self.repair_provider(original_line_text(top_line), top_line)
        except Exception as e:  # provider failure is non-fatal by contract
            warnings.append(f"{file}: repair provider failed on line {top_line}: {e}")

        return Diagnostic(
            file=file,
            function_name=name,
            function_span=span,
            top_lines=(top_line,),
            p_vulnerable=p_vuln,
            line_scores=deduped,
            cwe_id=cwe_id,
            cwe_confidence=float(out.probs_id[0, id_idx]),
            cwe_type=cwe_type,
            type_confidence=float(out.probs_type[0, type_idx]),
            cvss=cvss,
            band=severity_band(cvss),
            description=f"{info.name}: {info.summary}" if info.summary else info.name,
            url=info.url,
            repair=repair,
            truncated=seq.truncated or dseq.truncated,
            function_id=function_id,
        )

    # -- public entry points ---------------------------------------------

    def analyze_source(self, text: str | bytes, file: str = "<memory>") -> AnalysisResult:
        """Extract functions from file text and analyze each one."""
        if isinstance(text, bytes):
            text = text.decode("utf-8", errors="replace")
        extraction = extract_functions(text)
        warnings = [f"{file}: {w}" for w in extraction.warnings]
        original_newlines = newline_offsets(text)
        source_lines = text.split("\n")

        def line_text(n: int) -> str:
            return source_lines[n - 1] if 1 <= n <= len(source_lines) else ""

        diagnostics = []
        for fn in extraction.functions:
            diag = self._analyze_function_text(
                cleaned_text=fn.cleaned_text,
                to_original_line=lambda cl, fn=fn: fn.original_line_of(cl, original_newlines),
                original_line_text=line_text,
                file=file,
                name=fn.name,
                span=fn.original_span,
                function_id=None,
                warnings=warnings,
            )
            if diag is not None:
                diagnostics.append(diag)
        diagnostics.sort(key=lambda d: (d.file, d.top_lines[0], d.function_span[0]))
        return AnalysisResult(diagnostics=diagnostics, warnings=warnings)

    def analyze_functions(self, functions: Sequence[tuple[str, str]]) -> AnalysisResult:
        """Analyze pre-extracted functions given as (id, code) pairs; line
        numbers are local to each function's code."""
        warnings: list = []
        diagnostics = []
        for fid, code in functions:
            cleaned, delta, strip_warnings = strip_comments(code)
            warnings.extend(f"{fid}: {w}" for w in strip_warnings)
            code_newlines = newline_offsets(code)
            code_lines = code.split("\n")

            def line_text(n: int) -> str:
                return code_lines[n - 1] if 1 <= n <= len(code_lines) else ""

            diag = self._analyze_function_text(
                cleaned_text=cleaned,
                to_original_line=lambda cl, delta=delta, nl=code_newlines: map_line(delta, nl, cl),
                original_line_text=line_text,
                file=fid,
                name=fid,
                span=(1, len(code_lines)),
                function_id=fid,
                warnings=warnings,
            )
            if diag is not None:
                diagnostics.append(diag)
        return AnalysisResult(diagnostics=diagnostics, warnings=warnings)


# ---------------------------------------------------------------------------
# Exports


def diagnostics_to_json(result: AnalysisResult) -> str:
    payload = {
        "schema_version": DIAGNOSTIC_SCHEMA_VERSION,
        "diagnostics": [d.to_json() for d in result.diagnostics],
        "warnings": result.warnings,
    }
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


_BAND_TO_SARIF = {"Critical": "error", "High": "error", "Medium": "warning", "Low": "note"}


def diagnostics_to_sarif(result: AnalysisResult, tool_version: str = "0.1.0") -> str:
    """SARIF 2.1.0 with one rule per distinct CWE id.  No timestamps are
    emitted so identical analyses serialize identically."""
    rules: dict[str, dict] = {}
    results = []
    for d in result.diagnostics:
        if d.cwe_id not in rules:
            rules[d.cwe_id] = {
                "id": d.cwe_id,
                "name": d.cwe_id.replace("-", ""),
                "shortDescription": {"text": d.description.split(":")[0]},
                "helpUri": d.url,
            }
        results.append(
            {
                "ruleId": d.cwe_id,
                "level": _BAND_TO_SARIF[d.band],
                "message": {
                    "text": (
                        f"{d.function_name}: likely {d.cwe_id} ({d.cwe_type}); "
                        f"severity {d.cvss:.1f} ({d.band})"
                    )
                },
                "properties": {
                    "p_vulnerable": round(d.p_vulnerable, 6),
                    "cvss": round(d.cvss, 4),
                    "band": d.band,
                },
                "locations": [
                    {
                        "physicalLocation": {
                            "artifactLocation": {"uri": d.file},
                            "region": {
                                "startLine": d.top_lines[0],
                                "endLine": d.top_lines[-1],
                            },
                        }
                    }
                ],
            }
        )
    sarif = {
        "$schema": "https://json.schemastore.org/sarif-2.1.0.json",
        "version": "2.1.0",
        "runs": [
            {
                "tool": {
                    "driver": {
                        "name": "vulnhunter",
                        "version": tool_version,
                        "informationUri": "https://cwe.mitre.org/",
                        "rules": sorted(rules.values(), key=lambda r: r["id"]),
                    }
                },
                "results": results,
                "columnKind": "utf16CodeUnits",
            }
        ],
    }
    return json.dumps(sarif, sort_keys=True, indent=2) + "\n"

"""Command-line entry point.

Subcommands: gen-corpus, train, eval, scan, serve.  Every command is
deterministic given its flags and seeds.  Exit codes: 0 success / clean
scan, 1 findings under --fail-on-findings, 2 any error.

A JSON config file (--config) may supply per-command defaults; explicit
flags always win.  The VULNHUNTER_MODELS environment variable supplies the
default model directory for scan/serve.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import __version__, corpus, trainer
from .checkpoint import load_checkpoint, save_checkpoint
from .engine import (
    AnalysisResult, Engine, demo_repair_provider, diagnostics_to_json, diagnostics_to_sarif,
)
from .moo import TrainStepConfig
from .nnmodel import desk_config, paper_config
from .service import serve_forever
from .tokenizer import Vocab, train_bpe

PRESETS = {"desk": desk_config, "paper": paper_config}


class CliError(Exception):
    pass


def _load_config_defaults(path: str | None, command: str) -> dict:
    if not path:
        return {}
    try:
        cfg = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise CliError(f"cannot read config {path}: {e}") from None
    section = cfg.get(command, {})
    if not isinstance(section, dict):
        raise CliError(f"config section {command!r} must be an object")
    return section


def _apply_config(args: argparse.Namespace, defaults: dict) -> None:
    for key, value in defaults.items():
        attr = key.replace("-", "_")
        if getattr(args, attr, None) is None and hasattr(args, attr):
            setattr(args, attr, value)


# ---------------------------------------------------------------------------
# gen-corpus


def cmd_gen_corpus(args) -> int:
    spec = corpus.SyntheticSpec(
        n_records=600 if args.n is None else args.n,
        n_cwe_ids=6 if args.cwe_ids is None else args.cwe_ids,
        n_cwe_types=3 if args.cwe_types is None else args.cwe_types,
        seed=0 if args.seed is None else args.seed,
    )
    records, registry = corpus.generate_synthetic(spec)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    corpus.save_dataset(records, out, format=args.format)
    registry_path = out.with_suffix(out.suffix + ".registry.json")
    registry_path.write_text(
        json.dumps(registry.to_json(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    print(f"wrote {len(records)} records to {out} (registry: {registry_path})")
    return 0


# ---------------------------------------------------------------------------
# train


def _build_split_and_vocab(args, model_cfg):
    records, registry = corpus.load_dataset(args.data)
    split = corpus.split_dataset(records, seed=args.seed)
    vocab = train_bpe([r.code for r in split.train], vocab_size=model_cfg.vocab_size,
                      seed=args.seed)
    return records, registry, split, vocab


def cmd_train(args) -> int:
    preset = PRESETS[args.preset]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    model_cfg = preset(seed=args.seed)
    records, registry, split, vocab = _build_split_and_vocab(args, model_cfg)
    model_cfg = preset(
        seed=args.seed,
        vocab_size=vocab.size,
        n_cwe_ids=max(1, len(registry.cwe_ids)),
        n_cwe_types=max(1, len(registry.cwe_types)),
    )

    step_default, loop_default = trainer.desk_defaults(args.task, seed=args.seed)
    step_cfg = TrainStepConfig(
        eta=args.lr if args.lr is not None else step_default.eta,
        optimizer="adamw",
        w1=args.w1,
        w2=args.w2,
        grad_norm=args.grad_norm if args.grad_norm is not None else step_default.grad_norm,
    )
    train_cfg = trainer.TrainConfig(
        epochs=args.epochs if args.epochs is not None else loop_default.epochs,
        batch_size=args.batch if args.batch is not None else loop_default.batch_size,
        seed=args.seed,
        patience=loop_default.patience,
    )

    if args.task == "classifier":
        mode = args.mode.replace("-", "_")
        result = trainer.train_classifier(split, registry, vocab, model_cfg, step_cfg,
                                          train_cfg, mode=mode)
        kind = "classifier"
    elif args.task == "detector":
        result = trainer.train_detector(split, vocab, model_cfg, step_cfg, train_cfg)
        kind = "detector"
    else:
        result = trainer.train_regressor(split, vocab, model_cfg, step_cfg, train_cfg)
        kind = "regressor"

    vocab.save(out / "vocab.json")
    split.save_manifest(out / "split.json")
    save_checkpoint(result.params, registry, out / f"{kind}.ckpt", kind=kind,
                    vocab_hash=vocab.content_hash())
    result.run.save(out / f"{kind}_run.json")
    (out / f"{kind}_logs.jsonl").write_text(
        "".join(line + "\n" for line in result.step_logs), encoding="utf-8"
    )
    best = result.run.best_epoch
    print(f"trained {kind} ({result.run.mode}); best epoch {best}; "
          f"checkpoint: {out / (kind + '.ckpt')}")
    return 0


# ---------------------------------------------------------------------------
# eval


def cmd_eval(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    vocab_path = Path(args.vocab) if args.vocab else Path(args.checkpoint).parent / "vocab.json"
    if not vocab_path.exists():
        raise CliError(f"vocab file {vocab_path} not found (pass --vocab)")
    vocab = Vocab.load(vocab_path)
    if vocab.content_hash() != ckpt.vocab_hash:
        raise CliError("vocab hash does not match the checkpoint")

    records, _ = corpus.load_dataset(args.data)
    if args.manifest:
        manifest = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
        split = corpus.apply_manifest(records, manifest)
    else:
        split = corpus.split_dataset(records, seed=args.seed)
    part = getattr(split, args.split)

    if ckpt.kind == "classifier":
        report = trainer.evaluate_classifier(ckpt.params, ckpt.registry, vocab, part)
    elif ckpt.kind == "detector":
        report = trainer.evaluate_detector(ckpt.params, vocab, part)
    else:
        report = trainer.evaluate_regressor(ckpt.params, vocab, part)

    print(report.to_text())
    for name, table in report.tables.items():
        if name.startswith("per_class"):
            print(f"\n{name}:\n{table}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "metrics.json").write_text(
            json.dumps(report.values, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        for name, table in report.tables.items():
            if name.startswith("confusion"):
                (out / f"{name}.csv").write_text(table, encoding="utf-8")
        print(f"\nwrote tables to {out}")
    return 0


# ---------------------------------------------------------------------------
# scan


def _render_text(result: AnalysisResult) -> str:
    if not result.diagnostics:
        return "no findings\n"
    lines = []
    for d in result.diagnostics:
        lines.append(
            f"{d.file}:{d.top_lines[0]}: [{d.cwe_id} {d.cwe_type}] {d.function_name} "
            f"p={d.p_vulnerable:.2f} cvss={d.cvss:.1f} ({d.band})"
        )
        lines.append(f"    {d.description}")
        lines.append(f"    {d.url}")
        if d.repair:
            lines.append(f"    quick fix (line {d.repair.target_line}): {d.repair.replacement.strip()}")
    for w in result.warnings:
        lines.append(f"warning: {w}")
    return "\n".join(lines) + "\n"


def cmd_scan(args) -> int:
    models_dir = args.models or os.environ.get("VULNHUNTER_MODELS")
    if not models_dir:
        raise CliError("no model directory: pass --models or set VULNHUNTER_MODELS")
    provider = demo_repair_provider if args.demo_repairs else None
    engine = Engine.load(models_dir, threshold=args.threshold, repair_provider=provider)

    paths = sorted(args.paths)
    contents = []
    for path in paths:
        try:
            contents.append(Path(path).read_bytes())
        except OSError as e:
            raise CliError(f"cannot read {path}: {e}") from None

    # engine is read-only after load; files analyze in parallel and results
    # merge in sorted-path order so output stays deterministic
    merged = AnalysisResult(diagnostics=[], warnings=[])
    with ThreadPoolExecutor(max_workers=min(4, max(1, len(paths)))) as pool:
        results = pool.map(
            lambda pair: engine.analyze_source(pair[1], file=str(pair[0])),
            zip(paths, contents),
        )
        for result in results:
            merged.diagnostics.extend(result.diagnostics)
            merged.warnings.extend(result.warnings)

    if args.format == "json":
        rendered = diagnostics_to_json(merged)
    elif args.format == "sarif":
        rendered = diagnostics_to_sarif(merged, tool_version=__version__)
    else:
        rendered = _render_text(merged)

    if args.out:
        Path(args.out).write_text(rendered, encoding="utf-8")
    else:
        sys.stdout.write(rendered)

    if merged.diagnostics and args.fail_on_findings:
        return 1
    return 0


# ---------------------------------------------------------------------------
# serve


def cmd_serve(args) -> int:
    models_dir = args.models or os.environ.get("VULNHUNTER_MODELS")
    if not models_dir:
        raise CliError("no model directory: pass --models or set VULNHUNTER_MODELS")
    provider = demo_repair_provider if args.demo_repairs else None
    engine = Engine.load(models_dir, threshold=args.threshold, repair_provider=provider)
    print(f"serving on http://{args.host}:{args.port} (Ctrl-C to stop)")
    serve_forever(engine, host=args.host, port=args.port)
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vulnhunter",
        description="desk-scale C/C++ vulnerability triage: corpus tooling, "
                    "training, evaluation, scanning, and a local inference service",
    )
    parser.add_argument("--version", action="version", version=f"vulnhunter {__version__}")
    parser.add_argument("--config", help="JSON file with per-command flag defaults")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-corpus", help="generate a synthetic labeled corpus")
    g.add_argument("--out", required=True, help="output dataset path (.csv or .jsonl)")
    g.add_argument("--n", type=int, default=None, help="number of records (default 600)")
    g.add_argument("--cwe-ids", type=int, default=None, dest="cwe_ids",
                   help="distinct CWE ids (default 6)")
    g.add_argument("--cwe-types", type=int, default=None, dest="cwe_types",
                   help="distinct CWE types (default 3)")
    g.add_argument("--seed", type=int, default=None, help="generator seed (default 0)")
    g.add_argument("--format", choices=["csv", "jsonl"], default=None)
    g.set_defaults(func=cmd_gen_corpus)

    t = sub.add_parser("train", help="train one of the three models")
    t.add_argument("--task", required=True, choices=["classifier", "detector", "regressor"])
    t.add_argument("--mode", choices=["moo", "weighted-sum"], default="moo",
                   help="classifier update rule")
    t.add_argument("--data", required=True, help="dataset CSV/JSONL")
    t.add_argument("--out", required=True, help="output directory")
    t.add_argument("--w1", type=float, default=0.5, help="weighted-sum weight for task 1")
    t.add_argument("--w2", type=float, default=0.5, help="weighted-sum weight for task 2")
    t.add_argument("--lr", type=float, default=None, help="learning rate (default: task preset)")
    t.add_argument("--epochs", type=int, default=None, help="epochs (default: task preset)")
    t.add_argument("--batch", type=int, default=None, help="batch size (default: task preset)")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--preset", choices=sorted(PRESETS), default="desk")
    t.add_argument("--grad-norm", choices=["none", "l2"], default=None, dest="grad_norm",
                   help="task-gradient normalization before the min-norm solve")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="evaluate a checkpoint on a dataset split")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--split", choices=["train", "validation", "test"], default="test")
    e.add_argument("--seed", type=int, default=0, help="split seed (must match training)")
    e.add_argument("--manifest", help="split manifest JSON instead of re-splitting")
    e.add_argument("--vocab", help="vocab.json path (default: next to checkpoint)")
    e.add_argument("--out", help="directory for CSV tables")
    e.set_defaults(func=cmd_eval)

    s = sub.add_parser("scan", help="analyze C/C++ files and emit diagnostics")
    s.add_argument("paths", nargs="+", metavar="PATH")
    s.add_argument("--models", help="model directory (default: $VULNHUNTER_MODELS)")
    s.add_argument("--format", choices=["json", "sarif", "text"], default="text")
    s.add_argument("--threshold", type=float, default=0.5)
    s.add_argument("--fail-on-findings", action="store_true", dest="fail_on_findings")
    s.add_argument("--demo-repairs", action="store_true", dest="demo_repairs",
                   help="enable the rule-based demo repair provider")
    s.add_argument("--out", help="write output to a file instead of stdout")
    s.set_defaults(func=cmd_scan)

    v = sub.add_parser("serve", help="run the local inference service")
    v.add_argument("--models", help="model directory (default: $VULNHUNTER_MODELS)")
    v.add_argument("--host", default="127.0.0.1")
    v.add_argument("--port", type=int, default=8725)
    v.add_argument("--threshold", type=float, default=0.5)
    v.add_argument("--demo-repairs", action="store_true", dest="demo_repairs")
    v.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        defaults = _load_config_defaults(args.config, args.command)
        _apply_config(args, defaults)
        return args.func(args)
    except (CliError, corpus.DatasetError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

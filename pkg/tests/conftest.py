"""Shared fixtures.

The heavyweight one is `desk_training`: one full desk-scale training
session (both classifier arms, detector, regressor) reused by the
end-to-end, service, CLI, and acceptance tests.  It runs once per pytest
session, on first use.
"""

import time

import pytest

from vulnhunter import corpus, nnmodel, tokenizer, trainer
from vulnhunter.checkpoint import save_checkpoint
from vulnhunter.corpus import SyntheticSpec

DESK_SEED = 42
DESK_SPEC = SyntheticSpec(n_records=600, n_cwe_ids=6, n_cwe_types=3, seed=DESK_SEED)


@pytest.fixture(scope="session")
def desk_training(tmp_path_factory):
    t0 = time.time()
    records, registry = corpus.generate_synthetic(DESK_SPEC)
    split = corpus.split_dataset(records, seed=DESK_SEED)
    vocab = tokenizer.train_bpe([r.code for r in split.train], vocab_size=512,
                                seed=DESK_SEED)
    model_cfg = nnmodel.desk_config(
        vocab_size=vocab.size,
        n_cwe_ids=len(registry.cwe_ids),
        n_cwe_types=len(registry.cwe_types),
        seed=DESK_SEED,
    )

    cls_step, cls_loop = trainer.desk_defaults("classifier", seed=DESK_SEED)
    table, cls_results = trainer.compare_classifier_modes(
        split, registry, vocab, model_cfg, cls_step, cls_loop
    )

    det_step, det_loop = trainer.desk_defaults("detector", seed=DESK_SEED)
    det_result = trainer.train_detector(split, vocab, model_cfg, det_step, det_loop)

    reg_step, reg_loop = trainer.desk_defaults("regressor", seed=DESK_SEED)
    reg_result = trainer.train_regressor(split, vocab, model_cfg, reg_step, reg_loop)
    wall_seconds = time.time() - t0

    det_report = trainer.evaluate_detector(det_result.params, vocab, split.test)
    reg_best_val = min(h["val_mse"] for h in reg_result.run.history)

    models_dir = tmp_path_factory.mktemp("desk_models")
    vocab.save(models_dir / "vocab.json")
    vh = vocab.content_hash()
    save_checkpoint(cls_results["moo"].params, registry, models_dir / "classifier.ckpt",
                    kind="classifier", vocab_hash=vh)
    save_checkpoint(det_result.params, registry, models_dir / "detector.ckpt",
                    kind="detector", vocab_hash=vh)
    save_checkpoint(reg_result.params, registry, models_dir / "regressor.ckpt",
                    kind="regressor", vocab_hash=vh)

    return {
        "models_dir": models_dir,
        "wall_seconds": wall_seconds,
        "comparison_table": table,
        "classifier_results": cls_results,
        "detector_result": det_result,
        "regressor_result": reg_result,
        "detector_test_accuracy": det_report.values["accuracy"],
        "regressor_best_val_mse": reg_best_val,
        "records": records,
        "registry": registry,
        "split": split,
        "vocab": vocab,
        "model_cfg": model_cfg,
    }


@pytest.fixture(scope="session")
def planted_fixture_source(desk_training):
    """(vulnerable_file_text, clean_file_text) drawn from test records the
    trained models handle confidently: the planted one must produce a
    diagnostic whose top line carries the pattern (so the demo repair
    provider fires), the clean one must produce nothing."""
    from vulnhunter.engine import Engine, demo_repair_provider

    split = desk_training["split"]
    engine = Engine.load(desk_training["models_dir"], repair_provider=demo_repair_provider)

    def diagnose(rec):
        result = engine.analyze_functions([("probe", rec.code)])
        return result.diagnostics[0] if result.diagnostics else None

    planted = next(
        r for r in split.test if r.vulnerable
        and (d := diagnose(r)) is not None and d.p_vulnerable > 0.9 and d.repair is not None
    )
    clean = next(r for r in split.test if not r.vulnerable and diagnose(r) is None)
    return planted.code, clean.code

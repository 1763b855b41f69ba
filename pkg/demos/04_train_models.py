"""Train all three models on a small corpus and write a model directory
that the scan/service demos can reuse.

This is a scaled-down run (400 records, reduced epochs) so it finishes in
about two minutes; `vulnhunter train` with the defaults reproduces the
full desk-scale setup.
"""

import time
from pathlib import Path

from vulnhunter import corpus, nnmodel, tokenizer, trainer
from vulnhunter.checkpoint import save_checkpoint
from vulnhunter.moo import TrainStepConfig
from vulnhunter.trainer import TrainConfig

OUT = Path(__file__).parent / "artifacts" / "models"
OUT.mkdir(parents=True, exist_ok=True)
SEED = 42

records, registry = corpus.generate_synthetic(
    corpus.SyntheticSpec(n_records=400, n_cwe_ids=6, n_cwe_types=3, seed=SEED))
split = corpus.split_dataset(records, seed=SEED)
vocab = tokenizer.train_bpe([r.code for r in split.train], vocab_size=512)
cfg = nnmodel.desk_config(vocab_size=vocab.size, n_cwe_ids=6, n_cwe_types=3, seed=SEED)

t0 = time.time()
table, results = trainer.compare_classifier_modes(
    split, registry, vocab, cfg,
    TrainStepConfig(eta=3e-4, optimizer="adamw", grad_norm="l2"),
    TrainConfig(epochs=10, batch_size=16, seed=SEED, patience=4),
)
print("classifier arms (min-norm vs fixed-weight baseline):")
print(table.to_text())

det = trainer.train_detector(split, vocab, cfg,
                             TrainStepConfig(eta=5e-4, optimizer="adamw"),
                             TrainConfig(epochs=5, batch_size=16, seed=SEED))
print(f"\ndetector best val accuracy: "
      f"{max(h['val_accuracy'] for h in det.run.history):.3f}")

reg = trainer.train_regressor(split, vocab, cfg,
                              TrainStepConfig(eta=3e-4, optimizer="adamw"),
                              TrainConfig(epochs=10, batch_size=16, seed=SEED))
print(f"regressor best val MSE: {min(h['val_mse'] for h in reg.run.history):.3f}")
print(f"\ntotal wall time {time.time() - t0:.0f}s")

vocab.save(OUT / "vocab.json")
vh = vocab.content_hash()
save_checkpoint(results["moo"].params, registry, OUT / "classifier.ckpt",
                kind="classifier", vocab_hash=vh)
save_checkpoint(det.params, registry, OUT / "detector.ckpt",
                kind="detector", vocab_hash=vh)
save_checkpoint(reg.params, registry, OUT / "regressor.ckpt",
                kind="regressor", vocab_hash=vh)
print(f"wrote models to {OUT}")

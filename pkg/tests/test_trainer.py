import numpy as np
import pytest

from vulnhunter import corpus, nnmodel, tokenizer, trainer
from vulnhunter.corpus import SyntheticSpec
from vulnhunter.moo import TrainStepConfig
from vulnhunter.trainer import TrainConfig, TrainerError


@pytest.fixture(scope="module")
def tiny_setup():
    records, registry = corpus.generate_synthetic(
        SyntheticSpec(n_records=80, n_cwe_ids=4, n_cwe_types=2, seed=5))
    split = corpus.split_dataset(records, seed=5)
    vocab = tokenizer.train_bpe([r.code for r in split.train], vocab_size=320)
    cfg = nnmodel.tiny_config(vocab_size=vocab.size, n_cwe_ids=4, n_cwe_types=2,
                              max_seq_len=128, seed=5)
    return records, registry, split, vocab, cfg


def fast_cfgs(epochs=2, **kw):
    return (
        TrainStepConfig(eta=3e-4, optimizer="adamw", grad_norm="l2"),
        TrainConfig(epochs=epochs, batch_size=16, seed=5, **kw),
    )


class TestClassifierLoop:
    def test_zero_epochs_returns_init(self, tiny_setup):
        _, registry, split, vocab, cfg = tiny_setup
        step, loop = fast_cfgs(epochs=0)
        res = trainer.train_classifier(split, registry, vocab, cfg, step, loop, "moo")
        assert res.run.history == []
        assert res.run.best_epoch == -1
        init = nnmodel.init_model(cfg)
        assert np.array_equal(res.params.shared["tok_emb"], init.shared["tok_emb"])

    def test_seeded_rerun_reproduces_history(self, tiny_setup):
        _, registry, split, vocab, cfg = tiny_setup
        step, loop = fast_cfgs(epochs=2)
        r1 = trainer.train_classifier(split, registry, vocab, cfg, step, loop, "moo")
        r2 = trainer.train_classifier(split, registry, vocab, cfg, step, loop, "moo")
        assert r1.run.history == r2.run.history
        assert r1.step_logs == r2.step_logs
        assert np.array_equal(r1.params.shared["tok_emb"], r2.params.shared["tok_emb"])

    def test_selection_is_extremum(self, tiny_setup):
        _, registry, split, vocab, cfg = tiny_setup
        step, loop = fast_cfgs(epochs=3)
        res = trainer.train_classifier(split, registry, vocab, cfg, step, loop, "moo")
        best = res.run.best_epoch
        vals = [h["val_mean_accuracy"] for h in res.run.history]
        assert vals[best] == max(vals)

    def test_weighted_sum_logs_losses(self, tiny_setup):
        _, registry, split, vocab, cfg = tiny_setup
        step, loop = fast_cfgs(epochs=1)
        res = trainer.train_classifier(split, registry, vocab, cfg, step, loop,
                                       "weighted_sum")
        assert res.run.mode == "weighted_sum"
        assert len(res.run.history) == 1
        assert res.step_logs and '"alpha": null' in res.step_logs[0]

    def test_unknown_mode(self, tiny_setup):
        _, registry, split, vocab, cfg = tiny_setup
        step, loop = fast_cfgs()
        with pytest.raises(TrainerError):
            trainer.train_classifier(split, registry, vocab, cfg, step, loop, "sgd")

    def test_empty_partition_rejected(self, tiny_setup):
        records, registry, _, vocab, cfg = tiny_setup
        step, loop = fast_cfgs()
        bad = corpus.DatasetSplit(train=list(records), validation=[], test=[], seed=0)
        with pytest.raises(TrainerError):
            trainer.train_classifier(bad, registry, vocab, cfg, step, loop, "moo")


class TestSingleTaskLoops:
    def test_detector_runs_and_selects(self, tiny_setup):
        _, _, split, vocab, cfg = tiny_setup
        step, loop = fast_cfgs(epochs=2)
        res = trainer.train_detector(split, vocab, cfg, step, loop)
        assert res.run.selection_metric == "val_accuracy"
        assert len(res.run.history) == 2
        best = res.run.best_epoch
        vals = [h["val_accuracy"] for h in res.run.history]
        assert vals[best] == max(vals)

    def test_regressor_constant_target_converges(self):
        # constant-cvss corpus: predicting the constant drives MSE toward 0
        records, registry = corpus.generate_synthetic(
            SyntheticSpec(n_records=60, n_cwe_ids=2, n_cwe_types=1, seed=9))
        const = [
            corpus.VulnRecord(id=r.id, code=r.code, vulnerable=r.vulnerable,
                              cwe_id=r.cwe_id, cwe_type=r.cwe_type,
                              cvss=5.0 if r.vulnerable else None)
            for r in records
        ]
        split = corpus.split_dataset(const, seed=9)
        vocab = tokenizer.train_bpe([r.code for r in split.train], vocab_size=300)
        cfg = nnmodel.tiny_config(vocab_size=vocab.size, max_seq_len=128, seed=9)
        step = TrainStepConfig(eta=1e-3, optimizer="adamw")
        res = trainer.train_regressor(split, vocab, cfg, step,
                                      TrainConfig(epochs=6, batch_size=16, seed=9))
        assert min(h["val_mse"] for h in res.run.history) < 0.05

    def test_regressor_selection_minimizes(self, tiny_setup):
        _, _, split, vocab, cfg = tiny_setup
        step, loop = fast_cfgs(epochs=2)
        res = trainer.train_regressor(split, vocab, cfg, step, loop)
        best = res.run.best_epoch
        vals = [h["val_mse"] for h in res.run.history]
        assert vals[best] == min(vals)

    def test_regressor_requires_scores(self, tiny_setup):
        records, _, _, vocab, cfg = tiny_setup
        clean = [r for r in records if not r.vulnerable]
        split = corpus.DatasetSplit(train=clean, validation=clean[:4], test=clean[:4], seed=0)
        step, loop = fast_cfgs()
        with pytest.raises(TrainerError):
            trainer.train_regressor(split, vocab, cfg, step, loop)


class TestEvaluate:
    def test_perfect_predictions_rate_none(self, tiny_setup):
        # a model evaluated against its own argmax predictions is perfect
        _, registry, split, vocab, cfg = tiny_setup
        params = nnmodel.init_model(cfg)
        recs = [r for r in split.test if r.cwe_id is not None]
        seqs = trainer.encode_records(recs, vocab, tokenizer.DUAL_CLS, cfg.max_seq_len)
        out = nnmodel.forward_classify(params, seqs)
        p1 = np.argmax(out.probs_id, axis=1)
        p2 = np.argmax(out.probs_type, axis=1)
        relabeled = [
            corpus.VulnRecord(id=r.id, code=r.code, vulnerable=True,
                              cwe_id=registry.cwe_ids[p1[i]],
                              cwe_type=registry.cwe_types[p2[i]],
                              cvss=r.cvss)
            for i, r in enumerate(recs)
        ]
        rep = trainer.evaluate_classifier(params, registry, vocab, relabeled)
        assert rep.values["accuracy_id"] == 1.0
        assert rep.values["accuracy_type"] == 1.0
        assert rep.values["type_consistent_rate"] is None

    def test_empty_test_set_errors(self, tiny_setup):
        _, registry, _, vocab, cfg = tiny_setup
        params = nnmodel.init_model(cfg)
        with pytest.raises(TrainerError):
            trainer.evaluate_classifier(params, registry, vocab, [])
        with pytest.raises(TrainerError):
            trainer.evaluate_detector(params, vocab, [])

    def test_detector_reports_confusion(self, tiny_setup):
        records, _, split, vocab, cfg = tiny_setup
        params = nnmodel.init_model(cfg)
        rep = trainer.evaluate_detector(params, vocab, split.test)
        assert "confusion" in rep.tables
        assert 0.0 <= rep.values["accuracy"] <= 1.0

    def test_report_rendering(self, tiny_setup):
        _, _, split, vocab, cfg = tiny_setup
        params = nnmodel.init_model(cfg)
        rep = trainer.evaluate_regressor(params, vocab, split.test)
        text = rep.to_text()
        assert "mse" in text and "mae" in text


class TestComparison:
    def test_comparison_table_shape(self, tiny_setup):
        _, registry, split, vocab, cfg = tiny_setup
        step, loop = fast_cfgs(epochs=1)
        table, results = trainer.compare_classifier_modes(split, registry, vocab, cfg,
                                                          step, loop)
        assert [r["mode"] for r in table.rows] == ["moo", "weighted_sum"]
        csv = table.to_csv()
        assert csv.startswith("mode,accuracy_id,accuracy_type,best_epoch")
        assert len(csv.strip().splitlines()) == 3
        assert "moo" in table.to_text()
        assert set(results) == {"moo", "weighted_sum"}

"""Training loops and evaluation for the three desk-scale models.

Three independent models are trained from the same corpus and tokenizer:
a dual-head multitask classifier (min-norm or weighted-sum updates), a
binary detector, and a severity regressor.  Validation after each epoch
drives model selection; runs stop early after a patience window without
improvement and abort (keeping the best checkpoint so far) on divergence.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import metrics, nnmodel
from .corpus import DatasetSplit, LabelRegistry, VulnRecord
from .moo import MooError, Optimizer, TrainStepConfig, mgda_step, weighted_sum_step
from .nnmodel import Batch, ModelConfig, ModelParams, flatten_group, unflatten_group
from .tokenizer import DUAL_CLS, SINGLE_CLS, TokenSequence, Vocab, encode

MODES = ("moo", "weighted_sum", "detect", "regress")


class TrainerError(ValueError):
    pass


def desk_defaults(task: str, seed: int = 42) -> tuple[TrainStepConfig, TrainConfig]:
    """Tuned step/loop settings for the desk preset, per task.

    The classifier arm normalizes task gradients before the min-norm solve
    (grad_norm="l2"); without it the easy coarse-label task starves the
    shared encoder once it converges and fine-label accuracy stalls.
    """
    if task == "classifier":
        return (
            TrainStepConfig(eta=3e-4, optimizer="adamw", grad_norm="l2"),
            TrainConfig(epochs=14, batch_size=16, seed=seed, patience=5),
        )
    if task == "detector":
        return (
            TrainStepConfig(eta=5e-4, optimizer="adamw"),
            TrainConfig(epochs=6, batch_size=16, seed=seed, patience=3),
        )
    if task == "regressor":
        return (
            TrainStepConfig(eta=3e-4, optimizer="adamw"),
            TrainConfig(epochs=14, batch_size=16, seed=seed, patience=4),
        )
    raise TrainerError(f"unknown task {task!r}")


@dataclass
class TrainConfig:
    epochs: int = 10
    batch_size: int = 16
    seed: int = 0
    patience: int = 3  # early stop after this many non-improving epochs


@dataclass
class TrainRun:
    mode: str
    epochs: int
    batch_size: int
    seed: int
    selection_metric: str
    history: list = field(default_factory=list)
    best_epoch: int = -1
    aborted: str | None = None

    def to_json(self) -> dict:
        return asdict(self)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n",
                              encoding="utf-8")


@dataclass
class TrainResult:
    params: ModelParams
    run: TrainRun
    step_logs: list = field(default_factory=list)  # JSONL-ready strings


def encode_records(records: Sequence[VulnRecord], vocab: Vocab, mode: str,
                   max_seq_len: int) -> list[TokenSequence]:
    return [encode(r.code, vocab, mode, max_seq_len) for r in records]


def _require_nonempty(split: DatasetSplit) -> None:
    if not split.train or not split.validation:
        raise TrainerError("train and validation partitions must be non-empty")


class _MultitaskProblem:
    """Adapter exposing the multitask model through flat parameter vectors."""

    def __init__(self, params: ModelParams, dropout_rng: np.random.Generator | None):
        self.params = params
        self.dropout_rng = dropout_rng

    def losses_and_grads(self, batch: Batch):
        losses, tg, _ = nnmodel.multitask_loss_and_grads(
            self.params, batch, train=self.dropout_rng is not None,
            dropout_rng=self.dropout_rng,
        )
        return (
            losses,
            tg.g1_flat(),
            tg.g2_flat(),
            flatten_group(tg.h1),
            flatten_group(tg.h2),
        )

    def get_params(self):
        return (
            flatten_group(self.params.shared),
            flatten_group(self.params.head_id),
            flatten_group(self.params.head_type),
        )

    def set_params(self, sh, th1, th2):
        self.params.shared = unflatten_group(sh, self.params.shared)
        self.params.head_id = unflatten_group(th1, self.params.head_id)
        self.params.head_type = unflatten_group(th2, self.params.head_type)


def _minibatches(n: int, batch_size: int, rng: random.Random):
    order = list(range(n))
    rng.shuffle(order)
    for i in range(0, n, batch_size):
        yield order[i : i + batch_size]


def _classifier_eval(params: ModelParams, seqs, y1, y2, batch_size: int = 32):
    preds1, preds2 = [], []
    for i in range(0, len(seqs), batch_size):
        out = nnmodel.forward_classify(params, seqs[i : i + batch_size])
        preds1.extend(np.argmax(out.probs_id, axis=1).tolist())
        preds2.extend(np.argmax(out.probs_type, axis=1).tolist())
    return (
        metrics.multiclass_accuracy(preds1, list(y1)),
        metrics.multiclass_accuracy(preds2, list(y2)),
        preds1,
        preds2,
    )


def train_classifier(
    split: DatasetSplit,
    registry: LabelRegistry,
    vocab: Vocab,
    model_cfg: ModelConfig,
    step_cfg: TrainStepConfig,
    train_cfg: TrainConfig,
    mode: str = "moo",
) -> TrainResult:
    """Train the dual-head CWE classifier on the vulnerable records.

    mode "moo" uses the min-norm common-descent update; "weighted_sum" uses
    the fixed-weight baseline.  Selection maximizes the mean of the two
    validation accuracies.
    """
    if mode not in ("moo", "weighted_sum"):
        raise TrainerError(f"unknown classifier mode {mode!r}")
    _require_nonempty(split)

    def labeled(recs):
        return [r for r in recs if r.cwe_id is not None]

    train_recs = labeled(split.train)
    val_recs = labeled(split.validation)
    if not train_recs or not val_recs:
        raise TrainerError("classifier needs labeled records in train and validation")

    train_seqs = encode_records(train_recs, vocab, DUAL_CLS, model_cfg.max_seq_len)
    val_seqs = encode_records(val_recs, vocab, DUAL_CLS, model_cfg.max_seq_len)
    y1_train = np.array([registry.id_index(r.cwe_id) for r in train_recs])
    y2_train = np.array([registry.type_index(r.cwe_type) for r in train_recs])
    y1_val = [registry.id_index(r.cwe_id) for r in val_recs]
    y2_val = [registry.type_index(r.cwe_type) for r in val_recs]

    params = nnmodel.init_model(model_cfg)
    best = params.copy()
    dropout_rng = np.random.default_rng(train_cfg.seed + 1)
    problem = _MultitaskProblem(params, dropout_rng if model_cfg.head_dropout > 0 else None)
    opt = Optimizer(step_cfg)
    step_fn = mgda_step if mode == "moo" else weighted_sum_step
    shuffle_rng = random.Random(train_cfg.seed)

    run = TrainRun(mode=mode, epochs=train_cfg.epochs, batch_size=train_cfg.batch_size,
                   seed=train_cfg.seed, selection_metric="mean_accuracy")
    result = TrainResult(params=best, run=run)
    best_metric = -1.0
    stale = 0
    step = 0
    for epoch in range(train_cfg.epochs):
        epoch_losses = []
        try:
            for idxs in _minibatches(len(train_seqs), train_cfg.batch_size, shuffle_rng):
                batch = Batch(
                    seqs=[train_seqs[i] for i in idxs],
                    y_id=y1_train[idxs],
                    y_type=y2_train[idxs],
                )
                report = step_fn(problem, batch, step_cfg, opt, step)
                result.step_logs.append(report.to_json_line())
                epoch_losses.append(report.losses)
                step += 1
        except MooError as e:
            run.aborted = str(e)
            break
        acc1, acc2, _, _ = _classifier_eval(params, val_seqs, y1_val, y2_val)
        mean_acc = 0.5 * (acc1 + acc2)
        run.history.append(
            {
                "epoch": epoch,
                "train_loss_id": float(np.mean([l[0] for l in epoch_losses])),
                "train_loss_type": float(np.mean([l[1] for l in epoch_losses])),
                "val_accuracy_id": acc1,
                "val_accuracy_type": acc2,
                "val_mean_accuracy": mean_acc,
            }
        )
        if mean_acc > best_metric:
            best_metric = mean_acc
            best = params.copy()
            run.best_epoch = epoch
            stale = 0
        else:
            stale += 1
            if stale >= train_cfg.patience:
                break

    result.params = best
    return result


def _train_single_task(
    split: DatasetSplit,
    vocab: Vocab,
    model_cfg: ModelConfig,
    step_cfg: TrainStepConfig,
    train_cfg: TrainConfig,
    task: str,
    records_of: Callable[[Sequence[VulnRecord]], list[VulnRecord]],
    batch_of: Callable[[list, np.ndarray], Batch],
    label_of: Callable[[VulnRecord], float],
    val_metric: Callable[[ModelParams, list, np.ndarray], float],
    metric_name: str,
    maximize: bool,
) -> TrainResult:
    _require_nonempty(split)
    train_recs = records_of(split.train)
    val_recs = records_of(split.validation)
    if not train_recs or not val_recs:
        raise TrainerError(f"{task} needs usable records in train and validation")

    train_seqs = encode_records(train_recs, vocab, SINGLE_CLS, model_cfg.max_seq_len)
    val_seqs = encode_records(val_recs, vocab, SINGLE_CLS, model_cfg.max_seq_len)
    y_train = np.array([label_of(r) for r in train_recs])
    y_val = np.array([label_of(r) for r in val_recs])

    params = nnmodel.init_model(model_cfg)
    best = params.copy()
    opt = Optimizer(step_cfg)
    shuffle_rng = random.Random(train_cfg.seed)
    head_group = "head_detect" if task == "detect" else "head_regress"

    run = TrainRun(mode=task, epochs=train_cfg.epochs, batch_size=train_cfg.batch_size,
                   seed=train_cfg.seed, selection_metric=metric_name)
    result = TrainResult(params=best, run=run)
    best_metric = -np.inf if maximize else np.inf
    stale = 0
    step = 0
    for epoch in range(train_cfg.epochs):
        epoch_losses = []
        aborted = False
        for idxs in _minibatches(len(train_seqs), train_cfg.batch_size, shuffle_rng):
            batch = batch_of([train_seqs[i] for i in idxs], y_train[idxs])
            loss, grads = nnmodel.loss_and_grads(params, batch, task)
            if not np.isfinite(loss):
                run.aborted = f"non-finite loss at step {step}"
                aborted = True
                break
            sh = opt.update("shared", flatten_group(params.shared),
                            flatten_group(grads["shared"]))
            hd = opt.update("head", flatten_group(params.group(head_group)),
                            flatten_group(grads[head_group]))
            params.shared = unflatten_group(sh, params.shared)
            setattr(params, head_group, unflatten_group(hd, params.group(head_group)))
            result.step_logs.append(json.dumps({"step": step, "loss": float(loss)},
                                               sort_keys=True))
            epoch_losses.append(float(loss))
            step += 1
        if aborted:
            break
        val = val_metric(params, val_seqs, y_val)
        run.history.append(
            {"epoch": epoch, "train_loss": float(np.mean(epoch_losses)),
             metric_name: float(val)}
        )
        improved = val > best_metric if maximize else val < best_metric
        if improved:
            best_metric = val
            best = params.copy()
            run.best_epoch = epoch
            stale = 0
        else:
            stale += 1
            if stale >= train_cfg.patience:
                break

    result.params = best
    return result


def detector_probabilities(params: ModelParams, seqs, batch_size: int = 32) -> np.ndarray:
    probs = []
    for i in range(0, len(seqs), batch_size):
        logits, _, _ = nnmodel.forward_detect(params, seqs[i : i + batch_size])
        p = np.exp(logits - logits.max(axis=1, keepdims=True))
        p /= p.sum(axis=1, keepdims=True)
        probs.extend(p[:, 1].tolist())
    return np.array(probs)


def train_detector(
    split: DatasetSplit,
    vocab: Vocab,
    model_cfg: ModelConfig,
    step_cfg: TrainStepConfig,
    train_cfg: TrainConfig,
) -> TrainResult:
    """Train the binary vulnerability detector on all records."""

    def val_acc(params, seqs, y):
        preds = (detector_probabilities(params, seqs) >= 0.5).astype(int)
        return metrics.multiclass_accuracy(preds.tolist(), y.astype(int).tolist())

    return _train_single_task(
        split, vocab, model_cfg, step_cfg, train_cfg,
        task="detect",
        records_of=list,
        batch_of=lambda seqs, y: Batch(seqs=seqs, y_binary=y.astype(int)),
        label_of=lambda r: 1 if r.vulnerable else 0,
        val_metric=val_acc,
        metric_name="val_accuracy",
        maximize=True,
    )


def regressor_predictions(params: ModelParams, seqs, batch_size: int = 32) -> np.ndarray:
    preds = []
    for i in range(0, len(seqs), batch_size):
        p, _ = nnmodel.forward_regress(params, seqs[i : i + batch_size])
        preds.extend(p.tolist())
    return np.array(preds)


def train_regressor(
    split: DatasetSplit,
    vocab: Vocab,
    model_cfg: ModelConfig,
    step_cfg: TrainStepConfig,
    train_cfg: TrainConfig,
) -> TrainResult:
    """Train the severity regressor on records carrying a CVSS score."""

    def val_mse(params, seqs, y):
        return metrics.mse(regressor_predictions(params, seqs), y)

    return _train_single_task(
        split, vocab, model_cfg, step_cfg, train_cfg,
        task="regress",
        records_of=lambda recs: [r for r in recs if r.cvss is not None],
        batch_of=lambda seqs, y: Batch(seqs=seqs, y_score=y),
        label_of=lambda r: float(r.cvss),
        val_metric=val_mse,
        metric_name="val_mse",
        maximize=False,
    )


# ---------------------------------------------------------------------------
# Evaluation


@dataclass
class EvalReport:
    kind: str
    n: int
    values: dict
    tables: dict = field(default_factory=dict)  # name -> csv text

    def to_text(self) -> str:
        lines = [f"{self.kind} evaluation over {self.n} records"]
        for k, v in self.values.items():
            if v is None:
                lines.append(f"  {k}: n/a")
            elif isinstance(v, float):
                lines.append(f"  {k}: {v:.4f}")
            else:
                lines.append(f"  {k}: {v}")
        return "\n".join(lines)


def evaluate_classifier(params: ModelParams, registry: LabelRegistry, vocab: Vocab,
                        records: Sequence[VulnRecord]) -> EvalReport:
    """Test-set accuracies, confusion tables, and the type-consistent rate
    (fraction of CWE-ID errors whose predicted type is still correct)."""
    recs = [r for r in records if r.cwe_id is not None]
    if not recs:
        raise TrainerError("no labeled records to evaluate")
    seqs = encode_records(recs, vocab, DUAL_CLS, params.config.max_seq_len)
    y1 = [registry.id_index(r.cwe_id) for r in recs]
    y2 = [registry.type_index(r.cwe_type) for r in recs]
    acc1, acc2, p1, p2 = _classifier_eval(params, seqs, y1, y2)

    rate = metrics.type_consistent_rate(p1, y1, p2, y2)
    n_errors = sum(1 for a, b in zip(p1, y1) if a != b)

    cm_id = metrics.confusion_matrix(p1, y1, list(range(len(registry.cwe_ids))))
    cm_id.classes = list(registry.cwe_ids)
    cm_type = metrics.confusion_matrix(p2, y2, list(range(len(registry.cwe_types))))
    cm_type.classes = list(registry.cwe_types)
    return EvalReport(
        kind="classifier",
        n=len(recs),
        values={
            "accuracy_id": acc1,
            "accuracy_type": acc2,
            "type_consistent_rate": rate,
            "n_errors": n_errors,
        },
        tables={
            "confusion_id": cm_id.to_csv(),
            "confusion_type": cm_type.to_csv(),
            "per_class_id": metrics.per_class_table(cm_id),
            "per_class_type": metrics.per_class_table(cm_type),
        },
    )


def evaluate_detector(params: ModelParams, vocab: Vocab,
                      records: Sequence[VulnRecord]) -> EvalReport:
    if not records:
        raise TrainerError("no records to evaluate")
    seqs = encode_records(records, vocab, SINGLE_CLS, params.config.max_seq_len)
    y = [1 if r.vulnerable else 0 for r in records]
    preds = (detector_probabilities(params, seqs) >= 0.5).astype(int).tolist()
    cm = metrics.confusion_matrix(preds, y, [0, 1])
    cm.classes = ["clean", "vulnerable"]
    return EvalReport(
        kind="detector",
        n=len(records),
        values={"accuracy": metrics.multiclass_accuracy(preds, y)},
        tables={"confusion": cm.to_csv()},
    )


def evaluate_regressor(params: ModelParams, vocab: Vocab,
                       records: Sequence[VulnRecord]) -> EvalReport:
    recs = [r for r in records if r.cvss is not None]
    if not recs:
        raise TrainerError("no scored records to evaluate")
    seqs = encode_records(recs, vocab, SINGLE_CLS, params.config.max_seq_len)
    y = np.array([r.cvss for r in recs])
    preds = regressor_predictions(params, seqs)
    return EvalReport(
        kind="regressor",
        n=len(recs),
        values={"mse": metrics.mse(preds, y), "mae": metrics.mae(preds, y)},
    )


# ---------------------------------------------------------------------------
# Mode comparison harness


@dataclass
class ComparisonTable:
    rows: list  # dicts: mode, accuracy_id, accuracy_type, best_epoch

    def to_csv(self) -> str:
        out = ["mode,accuracy_id,accuracy_type,best_epoch"]
        for r in self.rows:
            out.append(f"{r['mode']},{r['accuracy_id']:.4f},{r['accuracy_type']:.4f},{r['best_epoch']}")
        return "\n".join(out) + "\n"

    def to_text(self) -> str:
        lines = [f"{'mode':<14} {'acc_id':>8} {'acc_type':>9} {'best_epoch':>10}"]
        for r in self.rows:
            lines.append(
                f"{r['mode']:<14} {r['accuracy_id']:>8.4f} {r['accuracy_type']:>9.4f} "
                f"{r['best_epoch']:>10}"
            )
        return "\n".join(lines)


def compare_classifier_modes(
    split: DatasetSplit,
    registry: LabelRegistry,
    vocab: Vocab,
    model_cfg: ModelConfig,
    step_cfg: TrainStepConfig,
    train_cfg: TrainConfig,
) -> tuple[ComparisonTable, dict]:
    """Train both classifier arms under identical seeds and configs and
    report their test-style validation accuracies side by side.  No ordering
    between the arms is asserted; the table is the deliverable."""
    results = {}
    rows = []
    for mode in ("moo", "weighted_sum"):
        res = train_classifier(split, registry, vocab, model_cfg, step_cfg, train_cfg, mode)
        recs = [r for r in split.test if r.cwe_id is not None]
        report = evaluate_classifier(res.params, registry, vocab, recs)
        rows.append(
            {
                "mode": mode,
                "accuracy_id": report.values["accuracy_id"],
                "accuracy_type": report.values["accuracy_type"],
                "best_epoch": res.run.best_epoch,
            }
        )
        results[mode] = res
    return ComparisonTable(rows=rows), results

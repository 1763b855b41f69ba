"""Desk-scale transformer encoder with exact reverse-mode gradients.

Forward and backward passes are written directly in numpy (float64) so the
per-task gradients demanded by the multi-objective trainer are exact, not
autograd approximations subject to framework nondeterminism.  The encoder
is a standard post-norm stack: embeddings + learned positions, multi-head
self-attention, GELU feed-forward, residuals with layer norm.

Parameter groups:
  shared       token/position embeddings and all encoder blocks
  head_id      two-layer classification head read from the first special
               position (CWE identifier task)
  head_type    two-layer classification head read from the second special
               position (CWE abstraction-type task)
  head_detect  linear binary head (vulnerable / not)
  head_regress linear severity regression head

The two classification heads share no parameters, so each task's loss has
a bitwise-zero gradient block for the other task's head.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict
from typing import Sequence

import numpy as np

from .tokenizer import DUAL_CLS, SINGLE_CLS, TokenSequence

GROUP_NAMES = ("shared", "head_id", "head_type", "head_detect", "head_regress")

MASK_NEG = -1e30
LN_EPS = 1e-5


class ModelError(ValueError):
    pass


@dataclass
class ModelConfig:
    layers: int = 2
    hidden_size: int = 64
    heads: int = 4
    ffn_size: int = 256
    vocab_size: int = 512
    max_seq_len: int = 128
    n_cwe_ids: int = 6
    n_cwe_types: int = 3
    head_dropout: float = 0.1
    seed: int = 0

    def __post_init__(self) -> None:
        counts = (self.layers, self.hidden_size, self.heads, self.ffn_size,
                  self.vocab_size, self.max_seq_len, self.n_cwe_ids, self.n_cwe_types)
        if any(c < 1 for c in counts):
            raise ModelError("all size fields must be >= 1")
        if self.hidden_size % self.heads != 0:
            raise ModelError(
                f"hidden_size {self.hidden_size} not divisible by heads {self.heads}"
            )
        if not (0.0 <= self.head_dropout < 1.0):
            raise ModelError("head_dropout must lie in [0, 1)")

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, obj: dict) -> "ModelConfig":
        return cls(**obj)


def tiny_config(**overrides) -> ModelConfig:
    base = dict(layers=2, hidden_size=32, heads=2, ffn_size=64, vocab_size=300,
                max_seq_len=64, n_cwe_ids=4, n_cwe_types=2, head_dropout=0.1, seed=0)
    base.update(overrides)
    return ModelConfig(**base)


def desk_config(**overrides) -> ModelConfig:
    base = dict(layers=2, hidden_size=64, heads=4, ffn_size=256, vocab_size=512,
                max_seq_len=128, n_cwe_ids=6, n_cwe_types=3, head_dropout=0.1, seed=0)
    base.update(overrides)
    return ModelConfig(**base)


def paper_config(**overrides) -> ModelConfig:
    base = dict(layers=12, hidden_size=768, heads=12, ffn_size=3072, vocab_size=50265,
                max_seq_len=512, n_cwe_ids=88, n_cwe_types=6, head_dropout=0.1, seed=0)
    base.update(overrides)
    return ModelConfig(**base)


@dataclass
class ModelParams:
    config: ModelConfig
    shared: dict
    head_id: dict
    head_type: dict
    head_detect: dict
    head_regress: dict

    def group(self, name: str) -> dict:
        if name not in GROUP_NAMES:
            raise ModelError(f"unknown parameter group {name!r}")
        return getattr(self, name)

    def n_params(self) -> int:
        return sum(a.size for g in GROUP_NAMES for a in self.group(g).values())

    def copy(self) -> "ModelParams":
        return ModelParams(
            config=self.config,
            **{g: {k: v.copy() for k, v in self.group(g).items()} for g in GROUP_NAMES},
        )


def _uniform(rng: np.random.Generator, fan_in: int, fan_out: int, shape) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape)


def init_model(config: ModelConfig) -> ModelParams:
    """Deterministic scaled-uniform initialization from config.seed."""
    rng = np.random.default_rng(config.seed)
    H, F, V, L = config.hidden_size, config.ffn_size, config.vocab_size, config.max_seq_len

    shared: dict = {
        "tok_emb": _uniform(rng, V, H, (V, H)),
        "pos_emb": _uniform(rng, L, H, (L, H)),
        "emb_ln_g": np.ones(H),
        "emb_ln_b": np.zeros(H),
    }
    for i in range(config.layers):
        p = f"l{i}."
        for name in ("wq", "wk", "wv", "wo"):
            shared[p + name] = _uniform(rng, H, H, (H, H))
            shared[p + "b" + name[1]] = np.zeros(H)
        shared[p + "ln1_g"] = np.ones(H)
        shared[p + "ln1_b"] = np.zeros(H)
        shared[p + "w1"] = _uniform(rng, H, F, (H, F))
        shared[p + "b1"] = np.zeros(F)
        shared[p + "w2"] = _uniform(rng, F, H, (F, H))
        shared[p + "b2"] = np.zeros(H)
        shared[p + "ln2_g"] = np.ones(H)
        shared[p + "ln2_b"] = np.zeros(H)

    def class_head(n_out: int) -> dict:
        return {
            "w1": _uniform(rng, H, H, (H, H)),
            "b1": np.zeros(H),
            "w2": _uniform(rng, H, n_out, (H, n_out)),
            "b2": np.zeros(n_out),
        }

    head_id = class_head(config.n_cwe_ids)
    head_type = class_head(config.n_cwe_types)
    head_detect = {"w": _uniform(rng, H, 2, (H, 2)), "b": np.zeros(2)}
    head_regress = {"w": _uniform(rng, H, 1, (H, 1)), "b": np.zeros(1)}
    return ModelParams(config, shared, head_id, head_type, head_detect, head_regress)


def zero_grads(params: ModelParams) -> dict:
    """Grad container mirroring the parameter structure, all groups zeroed."""
    return {
        g: {k: np.zeros_like(v) for k, v in params.group(g).items()}
        for g in GROUP_NAMES
    }


def flatten_group(group: dict) -> np.ndarray:
    return np.concatenate([group[k].ravel() for k in sorted(group)]) if group else np.zeros(0)


def unflatten_group(vec: np.ndarray, template: dict) -> dict:
    out = {}
    pos = 0
    for k in sorted(template):
        a = template[k]
        out[k] = vec[pos : pos + a.size].reshape(a.shape).copy()
        pos += a.size
    if pos != vec.size:
        raise ModelError("flat vector size mismatch")
    return out


# ---------------------------------------------------------------------------
# Primitive ops with cached backward


def _layer_norm(x: np.ndarray, g: np.ndarray, b: np.ndarray):
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + LN_EPS)
    xhat = xc * inv
    return g * xhat + b, (xhat, inv, g)


def _layer_norm_backward(dy: np.ndarray, cache):
    xhat, inv, g = cache
    H = xhat.shape[-1]
    dg = (dy * xhat).sum(axis=tuple(range(dy.ndim - 1)))
    db = dy.sum(axis=tuple(range(dy.ndim - 1)))
    dxhat = dy * g
    dx = inv * (dxhat - dxhat.mean(axis=-1, keepdims=True)
                - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True))
    return dx, dg, db


_GELU_C = np.sqrt(2.0 / np.pi)


def _gelu(x: np.ndarray):
    x2 = x * x
    inner = _GELU_C * (x + 0.044715 * x2 * x)
    t = np.tanh(inner)
    return 0.5 * x * (1.0 + t), (x, x2, t)


def _gelu_backward(dy: np.ndarray, cache):
    x, x2, t = cache
    d_inner = _GELU_C * (1.0 + 3 * 0.044715 * x2)
    return dy * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * d_inner)


def _outer_accum(x: np.ndarray, dy: np.ndarray) -> np.ndarray:
    """sum over batch and time of x^T dy, via one BLAS matmul."""
    h = x.shape[-1]
    k = dy.shape[-1]
    return x.reshape(-1, h).T @ dy.reshape(-1, k)


def _softmax(x: np.ndarray) -> np.ndarray:
    z = x - x.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


# ---------------------------------------------------------------------------
# Encoder forward / backward


def _pad_batch(seqs: Sequence[TokenSequence], config: ModelConfig, pad_id: int):
    if not seqs:
        raise ModelError("empty batch")
    T = max(len(s) for s in seqs)
    if T > config.max_seq_len:
        raise ModelError(f"sequence length {T} exceeds max_seq_len {config.max_seq_len}")
    B = len(seqs)
    ids = np.full((B, T), pad_id, dtype=np.int64)
    mask = np.zeros((B, T))
    for i, s in enumerate(seqs):
        ids[i, : len(s)] = s.ids
        mask[i, : len(s)] = 1.0
    return ids, mask


def _encode_forward(params: ModelParams, ids: np.ndarray, mask: np.ndarray):
    """Run the shared encoder; returns final states, attentions, and a tape."""
    cfg = params.config
    sh = params.shared
    B, T = ids.shape
    nh, dh = cfg.heads, cfg.hidden_size // cfg.heads

    E = sh["tok_emb"][ids] + sh["pos_emb"][:T]
    X, ln_cache = _layer_norm(E, sh["emb_ln_g"], sh["emb_ln_b"])
    neg = (1.0 - mask)[:, None, None, :] * MASK_NEG

    tape = {"ids": ids, "mask": mask, "emb_ln": ln_cache, "layers": []}
    attentions = []
    for i in range(cfg.layers):
        p = f"l{i}."
        Xin = X
        Q = Xin @ sh[p + "wq"] + sh[p + "bq"]
        K = Xin @ sh[p + "wk"] + sh[p + "bk"]
        V = Xin @ sh[p + "wv"] + sh[p + "bv"]
        Qh = Q.reshape(B, T, nh, dh).transpose(0, 2, 1, 3)
        Kh = K.reshape(B, T, nh, dh).transpose(0, 2, 1, 3)
        Vh = V.reshape(B, T, nh, dh).transpose(0, 2, 1, 3)
        S = Qh @ Kh.transpose(0, 1, 3, 2) / np.sqrt(dh) + neg
        A = _softmax(S)
        ctx = (A @ Vh).transpose(0, 2, 1, 3).reshape(B, T, cfg.hidden_size)
        O = ctx @ sh[p + "wo"] + sh[p + "bo"]
        X1, ln1_cache = _layer_norm(Xin + O, sh[p + "ln1_g"], sh[p + "ln1_b"])
        U_pre = X1 @ sh[p + "w1"] + sh[p + "b1"]
        U, gelu_cache = _gelu(U_pre)
        Z = U @ sh[p + "w2"] + sh[p + "b2"]
        X, ln2_cache = _layer_norm(X1 + Z, sh[p + "ln2_g"], sh[p + "ln2_b"])
        attentions.append(A)
        tape["layers"].append(
            dict(Xin=Xin, Qh=Qh, Kh=Kh, Vh=Vh, A=A, ctx=ctx, X1=X1, U=U,
                 gelu=gelu_cache, ln1=ln1_cache, ln2=ln2_cache)
        )
    tape["X_out"] = X
    return X, attentions, tape


def _encode_backward(params: ModelParams, tape: dict, dX: np.ndarray, grads: dict) -> None:
    """Accumulate d(loss)/d(shared params) given dX = d(loss)/d(encoder output)."""
    cfg = params.config
    sh = params.shared
    g = grads["shared"]
    ids, mask = tape["ids"], tape["mask"]
    B, T = ids.shape
    nh, dh = cfg.heads, cfg.hidden_size // cfg.heads

    for i in reversed(range(cfg.layers)):
        p = f"l{i}."
        t = tape["layers"][i]
        dres2, dg2, db2 = _layer_norm_backward(dX, t["ln2"])
        g[p + "ln2_g"] += dg2
        g[p + "ln2_b"] += db2
        dX1 = dres2.copy()
        dZ = dres2
        g[p + "w2"] += _outer_accum(t["U"], dZ)
        g[p + "b2"] += dZ.sum(axis=(0, 1))
        dU = dZ @ sh[p + "w2"].T
        dU_pre = _gelu_backward(dU, t["gelu"])
        g[p + "w1"] += _outer_accum(t["X1"], dU_pre)
        g[p + "b1"] += dU_pre.sum(axis=(0, 1))
        dX1 += dU_pre @ sh[p + "w1"].T

        dres1, dg1, db1 = _layer_norm_backward(dX1, t["ln1"])
        g[p + "ln1_g"] += dg1
        g[p + "ln1_b"] += db1
        dXin = dres1.copy()
        dO = dres1
        g[p + "wo"] += _outer_accum(t["ctx"], dO)
        g[p + "bo"] += dO.sum(axis=(0, 1))
        dctx = (dO @ sh[p + "wo"].T).reshape(B, T, nh, dh).transpose(0, 2, 1, 3)

        dA = dctx @ t["Vh"].transpose(0, 1, 3, 2)
        dVh = t["A"].transpose(0, 1, 3, 2) @ dctx
        A = t["A"]
        dS = A * (dA - (dA * A).sum(axis=-1, keepdims=True))
        dS /= np.sqrt(dh)
        dQh = dS @ t["Kh"]
        dKh = dS.transpose(0, 1, 3, 2) @ t["Qh"]

        dQ = dQh.transpose(0, 2, 1, 3).reshape(B, T, cfg.hidden_size)
        dK = dKh.transpose(0, 2, 1, 3).reshape(B, T, cfg.hidden_size)
        dV = dVh.transpose(0, 2, 1, 3).reshape(B, T, cfg.hidden_size)
        Xin = t["Xin"]
        g[p + "wq"] += _outer_accum(Xin, dQ)
        g[p + "bq"] += dQ.sum(axis=(0, 1))
        g[p + "wk"] += _outer_accum(Xin, dK)
        g[p + "bk"] += dK.sum(axis=(0, 1))
        g[p + "wv"] += _outer_accum(Xin, dV)
        g[p + "bv"] += dV.sum(axis=(0, 1))
        dXin += dQ @ sh[p + "wq"].T + dK @ sh[p + "wk"].T + dV @ sh[p + "wv"].T
        dX = dXin

    dE, dg_emb, db_emb = _layer_norm_backward(dX, tape["emb_ln"])
    g["emb_ln_g"] += dg_emb
    g["emb_ln_b"] += db_emb
    np.add.at(g["tok_emb"], ids, dE)
    g["pos_emb"][:T] += dE.sum(axis=0)


# ---------------------------------------------------------------------------
# Heads


def _dropout_mask(shape, rate: float, rng: np.random.Generator | None):
    if rng is None or rate <= 0.0:
        return None
    keep = rng.random(shape) >= rate
    return keep.astype(np.float64) / (1.0 - rate)


def _class_head_forward(head: dict, x: np.ndarray, rate: float, rng):
    pre = x @ head["w1"] + head["b1"]
    t = np.tanh(pre)
    mask = _dropout_mask(t.shape, rate, rng)
    td = t if mask is None else t * mask
    logits = td @ head["w2"] + head["b2"]
    return logits, (x, t, td, mask)


def _class_head_backward(head: dict, dlogits: np.ndarray, cache, gh: dict) -> np.ndarray:
    x, t, td, mask = cache
    gh["w2"] += td.T @ dlogits
    gh["b2"] += dlogits.sum(axis=0)
    dtd = dlogits @ head["w2"].T
    dt = dtd if mask is None else dtd * mask
    dpre = dt * (1.0 - t * t)
    gh["w1"] += x.T @ dpre
    gh["b1"] += dpre.sum(axis=0)
    return dpre @ head["w1"].T


@dataclass
class ForwardOutput:
    """Dual-head classification forward pass results."""

    logits_id: np.ndarray
    logits_type: np.ndarray
    probs_id: np.ndarray
    probs_type: np.ndarray
    attention: list  # per layer, (batch, heads, T, T)
    _tape: dict | None = field(default=None, repr=False)


def _check_mode(seqs: Sequence[TokenSequence], mode: str) -> None:
    bad = [s.mode for s in seqs if s.mode != mode]
    if bad:
        raise ModelError(f"batch mode mismatch: expected {mode}, found {bad[0]}")


def forward_classify(
    params: ModelParams,
    seqs: Sequence[TokenSequence] | TokenSequence,
    train: bool = False,
    dropout_rng: np.random.Generator | None = None,
) -> ForwardOutput:
    """Dual-token forward: the first position feeds the CWE-ID head, the
    second feeds the CWE-Type head.  Dropout engages only when train=True
    and a generator is supplied."""
    if isinstance(seqs, TokenSequence):
        seqs = [seqs]
    _check_mode(seqs, DUAL_CLS)
    ids, mask = _pad_batch(seqs, params.config, pad_id=0)
    X, attentions, tape = _encode_forward(params, ids, mask)
    rng = dropout_rng if train else None
    rate = params.config.head_dropout
    logits_id, cache_id = _class_head_forward(params.head_id, X[:, 0], rate, rng)
    logits_type, cache_type = _class_head_forward(params.head_type, X[:, 1], rate, rng)
    tape["cache_id"] = cache_id
    tape["cache_type"] = cache_type
    return ForwardOutput(
        logits_id=logits_id,
        logits_type=logits_type,
        probs_id=_softmax(logits_id),
        probs_type=_softmax(logits_type),
        attention=attentions,
        _tape=tape,
    )


def forward_detect(
    params: ModelParams,
    seqs: Sequence[TokenSequence] | TokenSequence,
):
    """Binary head forward; returns (logits (B,2), attentions, tape)."""
    if isinstance(seqs, TokenSequence):
        seqs = [seqs]
    _check_mode(seqs, SINGLE_CLS)
    ids, mask = _pad_batch(seqs, params.config, pad_id=0)
    X, attentions, tape = _encode_forward(params, ids, mask)
    logits = X[:, 0] @ params.head_detect["w"] + params.head_detect["b"]
    tape["cls"] = X[:, 0]
    return logits, attentions, tape


def forward_regress(
    params: ModelParams,
    seqs: Sequence[TokenSequence] | TokenSequence,
):
    """Scalar regression forward; returns (predictions (B,), tape)."""
    if isinstance(seqs, TokenSequence):
        seqs = [seqs]
    _check_mode(seqs, SINGLE_CLS)
    ids, mask = _pad_batch(seqs, params.config, pad_id=0)
    X, _, tape = _encode_forward(params, ids, mask)
    preds = (X[:, 0] @ params.head_regress["w"] + params.head_regress["b"])[:, 0]
    tape["cls"] = X[:, 0]
    return preds, tape


# ---------------------------------------------------------------------------
# Losses


def cross_entropy(logits: np.ndarray, labels: np.ndarray) -> float:
    """Mean -log softmax-probability of the true class."""
    labels = np.asarray(labels, dtype=np.int64)
    if labels.min() < 0 or labels.max() >= logits.shape[1]:
        raise ModelError("label out of range")
    z = logits - logits.max(axis=1, keepdims=True)
    logsumexp = np.log(np.exp(z).sum(axis=1))
    return float(np.mean(logsumexp - z[np.arange(len(labels)), labels]))


def _cross_entropy_grad(logits: np.ndarray, labels: np.ndarray) -> np.ndarray:
    probs = _softmax(logits)
    probs[np.arange(len(labels)), labels] -= 1.0
    return probs / len(labels)


def classification_loss(output: ForwardOutput, y_id, y_type) -> tuple[float, float]:
    """Per-task mean cross-entropies (CWE-ID, CWE-Type)."""
    return (
        cross_entropy(output.logits_id, np.asarray(y_id)),
        cross_entropy(output.logits_type, np.asarray(y_type)),
    )


def regression_loss(preds: Sequence[float], targets: Sequence[float]) -> float:
    """Mean squared error."""
    p = np.asarray(preds, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64)
    if p.size == 0:
        raise ModelError("empty input")
    if p.shape != t.shape:
        raise ModelError("length mismatch")
    return float(np.mean((p - t) ** 2))


# ---------------------------------------------------------------------------
# Loss + gradients per task


@dataclass
class TaskGradients:
    """Per-task gradients for the multitask objective.

    g1/g2 are gradients of the two task losses w.r.t. the shared encoder;
    h1/h2 are the gradients w.r.t. each task's own head.  The cross blocks
    (task 1 w.r.t. head_type, task 2 w.r.t. head_id) are exactly zero and
    therefore not materialized here.
    """

    g1: dict
    g2: dict
    h1: dict
    h2: dict

    def g1_flat(self) -> np.ndarray:
        return flatten_group(self.g1)

    def g2_flat(self) -> np.ndarray:
        return flatten_group(self.g2)


@dataclass
class Batch:
    """Encoded sequences plus whichever labels the task needs."""

    seqs: list
    y_id: np.ndarray | None = None
    y_type: np.ndarray | None = None
    y_binary: np.ndarray | None = None
    y_score: np.ndarray | None = None


def multitask_loss_and_grads(
    params: ModelParams,
    batch: Batch,
    train: bool = False,
    dropout_rng: np.random.Generator | None = None,
):
    """Exact gradients of both classification losses.

    Returns ((loss_id, loss_type), TaskGradients).  The encoder runs once;
    each task then back-propagates separately from its own head so the two
    shared-parameter gradients stay distinct (required by the min-norm
    combination step).
    """
    if batch.y_id is None or batch.y_type is None:
        raise ModelError("multitask batch needs y_id and y_type labels")
    out = forward_classify(params, batch.seqs, train=train, dropout_rng=dropout_rng)
    tape = out._tape
    y1 = np.asarray(batch.y_id, dtype=np.int64)
    y2 = np.asarray(batch.y_type, dtype=np.int64)
    loss1 = cross_entropy(out.logits_id, y1)
    loss2 = cross_entropy(out.logits_type, y2)

    B, T = tape["ids"].shape
    H = params.config.hidden_size

    grads1 = zero_grads(params)
    dcls = _class_head_backward(
        params.head_id, _cross_entropy_grad(out.logits_id, y1), tape["cache_id"], grads1["head_id"]
    )
    dX = np.zeros((B, T, H))
    dX[:, 0] = dcls
    _encode_backward(params, tape, dX, grads1)

    grads2 = zero_grads(params)
    dcls2 = _class_head_backward(
        params.head_type, _cross_entropy_grad(out.logits_type, y2), tape["cache_type"], grads2["head_type"]
    )
    dX2 = np.zeros((B, T, H))
    dX2[:, 1] = dcls2
    _encode_backward(params, tape, dX2, grads2)

    tg = TaskGradients(
        g1=grads1["shared"], g2=grads2["shared"], h1=grads1["head_id"], h2=grads2["head_type"]
    )
    return (loss1, loss2), tg, (grads1, grads2)


def detect_loss_and_grads(params: ModelParams, batch: Batch):
    """Binary cross-entropy loss and exact gradients (shared + detect head)."""
    if batch.y_binary is None:
        raise ModelError("detector batch needs y_binary labels")
    logits, _, tape = forward_detect(params, batch.seqs)
    y = np.asarray(batch.y_binary, dtype=np.int64)
    loss = cross_entropy(logits, y)
    grads = zero_grads(params)
    dlogits = _cross_entropy_grad(logits, y)
    grads["head_detect"]["w"] += tape["cls"].T @ dlogits
    grads["head_detect"]["b"] += dlogits.sum(axis=0)
    B, T = tape["ids"].shape
    dX = np.zeros((B, T, params.config.hidden_size))
    dX[:, 0] = dlogits @ params.head_detect["w"].T
    _encode_backward(params, tape, dX, grads)
    return loss, grads


def regress_loss_and_grads(params: ModelParams, batch: Batch):
    """MSE loss and exact gradients (shared + regression head)."""
    if batch.y_score is None:
        raise ModelError("regressor batch needs y_score targets")
    preds, tape = forward_regress(params, batch.seqs)
    t = np.asarray(batch.y_score, dtype=np.float64)
    loss = regression_loss(preds, t)
    grads = zero_grads(params)
    dpred = 2.0 * (preds - t) / len(t)
    grads["head_regress"]["w"] += tape["cls"].T @ dpred[:, None]
    grads["head_regress"]["b"] += np.array([dpred.sum()])
    B, T = tape["ids"].shape
    dX = np.zeros((B, T, params.config.hidden_size))
    dX[:, 0] = dpred[:, None] * params.head_regress["w"][:, 0]
    _encode_backward(params, tape, dX, grads)
    return loss, grads


def loss_and_grads(params: ModelParams, batch: Batch, task: str, train: bool = False,
                   dropout_rng: np.random.Generator | None = None):
    """Dispatch by task spec: 'multitask' returns ((loss_id, loss_type),
    TaskGradients); 'detect' and 'regress' return (loss, grads)."""
    if task == "multitask":
        losses, tg, _ = multitask_loss_and_grads(params, batch, train=train, dropout_rng=dropout_rng)
        return losses, tg
    if task == "detect":
        return detect_loss_and_grads(params, batch)
    if task == "regress":
        return regress_loss_and_grads(params, batch)
    raise ModelError(f"unknown task spec {task!r}")


# ---------------------------------------------------------------------------
# Finite-difference verification


def _task_losses(params: ModelParams, batch: Batch, task: str) -> list[float]:
    if task == "multitask":
        out = forward_classify(params, batch.seqs)
        return [
            cross_entropy(out.logits_id, np.asarray(batch.y_id, dtype=np.int64)),
            cross_entropy(out.logits_type, np.asarray(batch.y_type, dtype=np.int64)),
        ]
    if task == "detect":
        logits, _, _ = forward_detect(params, batch.seqs)
        return [cross_entropy(logits, np.asarray(batch.y_binary, dtype=np.int64))]
    if task == "regress":
        preds, _ = forward_regress(params, batch.seqs)
        return [regression_loss(preds, batch.y_score)]
    raise ModelError(f"unknown task spec {task!r}")


def _task_grad_sets(params: ModelParams, batch: Batch, task: str) -> list[dict]:
    if task == "multitask":
        _, _, (grads1, grads2) = multitask_loss_and_grads(params, batch)
        return [grads1, grads2]
    if task == "detect":
        return [detect_loss_and_grads(params, batch)[1]]
    if task == "regress":
        return [regress_loss_and_grads(params, batch)[1]]
    raise ModelError(f"unknown task spec {task!r}")


def check_gradients(
    params: ModelParams,
    batch: Batch,
    task: str = "multitask",
    eps: float = 1e-3,
    samples_per_group: int = 200,
    seed: int = 0,
) -> float:
    """Central finite differences against the analytic gradients.

    Samples at least `samples_per_group` coordinates from every parameter
    group and returns the maximum relative error
    |fd - analytic| / max(|fd| + |analytic|, 1e-3) over all sampled
    coordinates and all of the task's losses.  Dropout stays disabled so the
    compared function is deterministic.
    """
    if eps <= 0:
        raise ModelError("eps must be positive")
    rng = np.random.default_rng(seed)
    analytic = _task_grad_sets(params, batch, task)
    worst = 0.0
    for group in GROUP_NAMES:
        arrs = params.group(group)
        keys = sorted(arrs)
        sizes = np.array([arrs[k].size for k in keys])
        total = int(sizes.sum())
        n = min(samples_per_group, total)
        coords = rng.choice(total, size=n, replace=False)
        offsets = np.concatenate([[0], np.cumsum(sizes)])
        for c in coords:
            ki = int(np.searchsorted(offsets, c, side="right") - 1)
            arr = arrs[keys[ki]]
            flat_index = int(c - offsets[ki])
            idx = np.unravel_index(flat_index, arr.shape)
            orig = arr[idx]
            arr[idx] = orig + eps
            plus = _task_losses(params, batch, task)
            arr[idx] = orig - eps
            minus = _task_losses(params, batch, task)
            arr[idx] = orig
            for li, (lp, lm) in enumerate(zip(plus, minus)):
                fd = (lp - lm) / (2 * eps)
                an = analytic[li][group][keys[ki]][idx]
                rel = abs(fd - an) / max(abs(fd) + abs(an), 1e-3)
                worst = max(worst, rel)
    return worst

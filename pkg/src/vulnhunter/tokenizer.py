"""Byte-level BPE subword tokenizer with dual classification tokens.

The base alphabet is all 256 byte values, so any input is encodable and
decode(encode(x)) is byte-exact for untruncated input.  Sequences carry a
per-position source line index so attention mass can later be attributed
to source lines; special positions map to line -1.

Merges are learned within pre-tokenization chunks (identifier runs,
horizontal whitespace runs, newlines, or single other characters), which
keeps every produced token inside one source line.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

FORMAT_TAG = "vulnhunter-bpe-v1"

PAD, UNK, CLS, CLS_TYPE, SEP = "[PAD]", "[UNK]", "[CLS]", "[CLS_TYPE]", "[SEP]"
SPECIAL_NAMES = (PAD, UNK, CLS, CLS_TYPE, SEP)
N_SPECIALS = len(SPECIAL_NAMES)

DUAL_CLS = "dual_cls"
SINGLE_CLS = "single_cls"

_CHUNK_RE = re.compile(r"[A-Za-z0-9_]+|[ \t]+|\r\n|\n|.", re.DOTALL)


class TokenizerError(ValueError):
    pass


@dataclass
class Vocab:
    """Learned merges plus the token table. Immutable after training."""

    merges: list[tuple[bytes, bytes]]
    token_table: dict[bytes, int]
    specials: dict[str, int]

    def __post_init__(self) -> None:
        self.id_to_token: dict[int, bytes] = {i: t for t, i in self.token_table.items()}
        self.pair_rank: dict[tuple[bytes, bytes], int] = {p: r for r, p in enumerate(self.merges)}
        self.special_ids = set(self.specials.values())
        self._chunk_cache: dict[bytes, list[int]] = {}
        if len(self.special_ids) != len(self.specials):
            raise TokenizerError("special token ids must be distinct")
        if len(self.id_to_token) != len(self.token_table):
            raise TokenizerError("token_table must be injective")

    @property
    def size(self) -> int:
        return N_SPECIALS + len(self.token_table)

    def special(self, name: str) -> int:
        return self.specials[name]

    def to_json(self) -> dict:
        return {
            "format": FORMAT_TAG,
            "specials": self.specials,
            "merges": [[list(a), list(b)] for a, b in self.merges],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Vocab":
        if obj.get("format") != FORMAT_TAG:
            raise TokenizerError(f"unsupported vocab format {obj.get('format')!r}")
        merges = [(bytes(a), bytes(b)) for a, b in obj["merges"]]
        return cls(
            merges=merges,
            token_table=_build_token_table(merges),
            specials={str(k): int(v) for k, v in obj["specials"].items()},
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), sort_keys=True) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Vocab":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))

    def content_hash(self) -> str:
        blob = json.dumps(self.to_json(), sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()


@dataclass
class TokenSequence:
    """Encoded ids plus a per-position source line index (-1 for specials)."""

    ids: list[int]
    line_of: list[int]
    mode: str
    truncated: bool = False

    def __len__(self) -> int:
        return len(self.ids)


def _build_token_table(merges: Sequence[tuple[bytes, bytes]]) -> dict[bytes, int]:
    table = {bytes([b]): N_SPECIALS + b for b in range(256)}
    next_id = N_SPECIALS + 256
    for a, b in merges:
        table[a + b] = next_id
        next_id += 1
    return table


def _chunks(text: str) -> list[str]:
    return _CHUNK_RE.findall(text)


def train_bpe(texts: Iterable[str], vocab_size: int, seed: int = 0) -> Vocab:
    """Learn BPE merges from raw texts.

    Training is fully deterministic regardless of seed (the argument is kept
    for interface stability): the most frequent adjacent pair wins each
    round, ties broken by the lowest (left id, right id) pair.  Newlines are
    their own chunks and therefore never participate in merges.
    """
    texts = list(texts)
    if not texts:
        raise TokenizerError("training corpus is empty")
    base = N_SPECIALS + 256
    if vocab_size <= base:
        raise TokenizerError(f"vocab_size must exceed {base} (bytes + specials)")
    n_merges = vocab_size - base

    # chunk -> occurrence count, each chunk held as a tuple of current tokens
    chunk_counts: dict[bytes, int] = {}
    for text in texts:
        for chunk in _chunks(text):
            raw = chunk.encode("utf-8")
            chunk_counts[raw] = chunk_counts.get(raw, 0) + 1
    pieces: dict[bytes, list[bytes]] = {
        raw: [bytes([b]) for b in raw] for raw in chunk_counts
    }

    table = {bytes([b]): N_SPECIALS + b for b in range(256)}
    next_id = N_SPECIALS + 256
    merges: list[tuple[bytes, bytes]] = []
    for _ in range(n_merges):
        pair_counts: dict[tuple[bytes, bytes], int] = {}
        for raw, toks in pieces.items():
            c = chunk_counts[raw]
            for a, b in zip(toks, toks[1:]):
                pair_counts[(a, b)] = pair_counts.get((a, b), 0) + c
        if not pair_counts:
            break
        best = min(
            pair_counts.items(),
            key=lambda kv: (-kv[1], table[kv[0][0]], table[kv[0][1]]),
        )[0]
        merges.append(best)
        merged = best[0] + best[1]
        table[merged] = next_id
        next_id += 1
        for raw, toks in pieces.items():
            pieces[raw] = _apply_merge(toks, best, merged)

    return Vocab(
        merges=merges,
        token_table=table,
        specials={name: i for i, name in enumerate(SPECIAL_NAMES)},
    )


def _apply_merge(toks: list[bytes], pair: tuple[bytes, bytes], merged: bytes) -> list[bytes]:
    out: list[bytes] = []
    i = 0
    while i < len(toks):
        if i + 1 < len(toks) and toks[i] == pair[0] and toks[i + 1] == pair[1]:
            out.append(merged)
            i += 2
        else:
            out.append(toks[i])
            i += 1
    return out


def _encode_chunk(raw: bytes, vocab: Vocab) -> list[int]:
    cached = vocab._chunk_cache.get(raw)
    if cached is not None:
        return cached
    toks = [bytes([b]) for b in raw]
    ranks = vocab.pair_rank
    while len(toks) > 1:
        best_rank = None
        best_i = -1
        for i in range(len(toks) - 1):
            r = ranks.get((toks[i], toks[i + 1]))
            if r is not None and (best_rank is None or r < best_rank):
                best_rank, best_i = r, i
        if best_rank is None:
            break
        toks[best_i : best_i + 2] = [toks[best_i] + toks[best_i + 1]]
    ids = [vocab.token_table[t] for t in toks]
    vocab._chunk_cache[raw] = ids
    return ids


def encode(text: str, vocab: Vocab, mode: str = SINGLE_CLS, max_seq_len: int = 512) -> TokenSequence:
    """Encode text with special-token framing and a token -> line map.

    Truncation drops content from the tail and re-appends the end marker,
    so the special-position invariants hold for every input.
    """
    if mode not in (DUAL_CLS, SINGLE_CLS):
        raise TokenizerError(f"unknown mode {mode!r}")
    n_prefix = 2 if mode == DUAL_CLS else 1
    if max_seq_len < n_prefix + 1:
        raise TokenizerError(f"max_seq_len {max_seq_len} cannot fit the special tokens")

    content_ids: list[int] = []
    content_lines: list[int] = []
    line = 1
    for chunk in _chunks(text):
        ids = _encode_chunk(chunk.encode("utf-8"), vocab)
        content_ids.extend(ids)
        content_lines.extend([line] * len(ids))
        line += chunk.count("\n")

    budget = max_seq_len - n_prefix - 1
    truncated = len(content_ids) > budget
    if truncated:
        content_ids = content_ids[:budget]
        content_lines = content_lines[:budget]

    prefix = [vocab.special(CLS)] + ([vocab.special(CLS_TYPE)] if mode == DUAL_CLS else [])
    ids = prefix + content_ids + [vocab.special(SEP)]
    line_of = [-1] * n_prefix + content_lines + [-1]
    return TokenSequence(ids=ids, line_of=line_of, mode=mode, truncated=truncated)


def decode(seq: TokenSequence | Sequence[int], vocab: Vocab) -> str:
    """Inverse of encode for untruncated input; special tokens are dropped."""
    ids = seq.ids if isinstance(seq, TokenSequence) else list(seq)
    parts: list[bytes] = []
    for i in ids:
        if i in vocab.special_ids:
            continue
        tok = vocab.id_to_token.get(i)
        if tok is None:
            raise TokenizerError(f"id {i} not in vocabulary")
        parts.append(tok)
    return b"".join(parts).decode("utf-8", errors="replace")

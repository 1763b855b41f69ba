"""Single-file model checkpoint container.

Layout: 8-byte magic, little-endian uint64 header length, UTF-8 JSON
header, then the raw tensor payload (C-order float64, little endian).
The header records the format version, model kind and config, the label
registry, the tokenizer vocab hash, a creation timestamp, the tensor
manifest, and a SHA-256 of the payload for corruption detection.

For reproducible outputs the creation timestamp honors the
SOURCE_DATE_EPOCH convention when that environment variable is set.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import LabelRegistry
from .nnmodel import GROUP_NAMES, ModelConfig, ModelParams

MAGIC = b"VHCKPT01"
FORMAT_VERSION = 1

KINDS = ("classifier", "detector", "regressor")


class CheckpointError(ValueError):
    pass


def _created_at() -> str:
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    t = int(epoch) if epoch else int(time.time())
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(t))


@dataclass
class Checkpoint:
    kind: str
    params: ModelParams
    registry: LabelRegistry
    vocab_hash: str
    created_at: str = ""
    params_hash: str = ""  # sha256 of the tensor payload

    @property
    def config(self) -> ModelConfig:
        return self.params.config


def save_checkpoint(
    params: ModelParams,
    registry: LabelRegistry,
    path: str | Path,
    kind: str,
    vocab_hash: str,
) -> None:
    if kind not in KINDS:
        raise CheckpointError(f"unknown checkpoint kind {kind!r}")
    tensors = []
    chunks = []
    offset = 0
    for group in GROUP_NAMES:
        for name in sorted(params.group(group)):
            arr = np.ascontiguousarray(params.group(group)[name], dtype="<f8")
            raw = arr.tobytes()
            tensors.append(
                {
                    "group": group,
                    "name": name,
                    "shape": list(arr.shape),
                    "dtype": "<f8",
                    "offset": offset,
                    "nbytes": len(raw),
                }
            )
            chunks.append(raw)
            offset += len(raw)
    payload = b"".join(chunks)
    header = {
        "format_version": FORMAT_VERSION,
        "kind": kind,
        "config": params.config.to_json(),
        "registry": registry.to_json(),
        "vocab_hash": vocab_hash,
        "created_at": _created_at(),
        "tensors": tensors,
        "payload_sha256": hashlib.sha256(payload).hexdigest(),
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(len(blob).to_bytes(8, "little"))
        fh.write(blob)
        fh.write(payload)


def load_checkpoint(path: str | Path) -> Checkpoint:
    raw = Path(path).read_bytes()
    if raw[: len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file (bad magic)")
    hlen = int.from_bytes(raw[8:16], "little")
    try:
        header = json.loads(raw[16 : 16 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"{path}: corrupt header ({e})") from None
    if header.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(
            f"{path}: unsupported format version {header.get('format_version')}"
        )
    payload = raw[16 + hlen :]
    digest = hashlib.sha256(payload).hexdigest()
    if digest != header["payload_sha256"]:
        raise CheckpointError(f"{path}: payload checksum mismatch (corrupt file)")

    config = ModelConfig.from_json(header["config"])
    groups: dict = {g: {} for g in GROUP_NAMES}
    for t in header["tensors"]:
        buf = payload[t["offset"] : t["offset"] + t["nbytes"]]
        arr = np.frombuffer(buf, dtype=t["dtype"]).reshape(t["shape"]).astype(np.float64)
        groups[t["group"]][t["name"]] = arr
    params = ModelParams(config=config, **groups)
    return Checkpoint(
        kind=header["kind"],
        params=params,
        registry=LabelRegistry.from_json(header["registry"]),
        vocab_hash=header["vocab_hash"],
        created_at=header["created_at"],
        params_hash=digest,
    )

import numpy as np
import pytest

from vulnhunter.checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from vulnhunter.corpus import LabelRegistry
from vulnhunter.nnmodel import GROUP_NAMES, init_model, tiny_config


@pytest.fixture()
def registry():
    return LabelRegistry(
        cwe_ids=["CWE-1", "CWE-2"],
        cwe_types=["Base"],
        id_to_type={"CWE-1": "Base", "CWE-2": "Base"},
    )


def test_round_trip_bit_identical(tmp_path, registry):
    params = init_model(tiny_config())
    path = tmp_path / "m.ckpt"
    save_checkpoint(params, registry, path, kind="detector", vocab_hash="ab" * 32)
    ckpt = load_checkpoint(path)
    assert ckpt.kind == "detector"
    assert ckpt.vocab_hash == "ab" * 32
    assert ckpt.registry.cwe_ids == registry.cwe_ids
    assert ckpt.config == params.config
    for g in GROUP_NAMES:
        for k, v in params.group(g).items():
            assert np.array_equal(v, ckpt.params.group(g)[k]), (g, k)


def test_same_params_same_bytes(tmp_path, registry, monkeypatch):
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "0")
    params = init_model(tiny_config())
    p1, p2 = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
    save_checkpoint(params, registry, p1, kind="detector", vocab_hash="00" * 32)
    save_checkpoint(params, registry, p2, kind="detector", vocab_hash="00" * 32)
    assert p1.read_bytes() == p2.read_bytes()


def test_tampered_payload_detected(tmp_path, registry):
    params = init_model(tiny_config())
    path = tmp_path / "m.ckpt"
    save_checkpoint(params, registry, path, kind="classifier", vocab_hash="cd" * 32)
    blob = bytearray(path.read_bytes())
    blob[-5] ^= 0xFF
    path.write_bytes(bytes(blob))
    with pytest.raises(CheckpointError, match="checksum"):
        load_checkpoint(path)


def test_bad_magic(tmp_path):
    path = tmp_path / "m.ckpt"
    path.write_bytes(b"NOTACKPT" + b"\x00" * 64)
    with pytest.raises(CheckpointError, match="magic"):
        load_checkpoint(path)


def test_unknown_kind_rejected(tmp_path, registry):
    params = init_model(tiny_config())
    with pytest.raises(CheckpointError):
        save_checkpoint(params, registry, tmp_path / "x.ckpt", kind="oracle",
                        vocab_hash="ee" * 32)


def test_version_mismatch(tmp_path, registry):
    import json

    params = init_model(tiny_config())
    path = tmp_path / "m.ckpt"
    save_checkpoint(params, registry, path, kind="regressor", vocab_hash="ff" * 32)
    raw = path.read_bytes()
    hlen = int.from_bytes(raw[8:16], "little")
    header = json.loads(raw[16 : 16 + hlen])
    header["format_version"] = 99
    blob = json.dumps(header, sort_keys=True).encode()
    path.write_bytes(raw[:8] + len(blob).to_bytes(8, "little") + blob + raw[16 + hlen :])
    with pytest.raises(CheckpointError, match="version"):
        load_checkpoint(path)

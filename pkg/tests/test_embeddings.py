"""Binary embedding-file format: round trips and validation."""

import struct

import numpy as np
import pytest

from exprank.embeddings import (
    EmbeddingFormatError,
    dump_embedding_text,
    load_embedding_table,
    read_embedding_file,
    validate_embedding_file,
    write_embedding_file,
)
from exprank.params import Hyperparams


def test_round_trip_is_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    raw = rng.normal(size=(10, 7)).astype(np.float32)
    path = tmp_path / "emb.bin"
    write_embedding_file(path, raw, tag="test-encoder v1")
    back, tag = read_embedding_file(path)
    assert tag == "test-encoder v1"
    assert back.dtype == np.float32
    assert np.array_equal(back, raw)
    assert back.tobytes() == raw.tobytes()


def test_validate_reports_shape(tmp_path):
    raw = np.zeros((3, 768), dtype=np.float32)
    path = tmp_path / "emb.bin"
    write_embedding_file(path, raw, tag="enc")
    info = validate_embedding_file(path)
    assert info == {"count": 3, "dim": 768, "tag": "enc"}


def test_truncated_file_rejected(tmp_path):
    raw = np.ones((4, 5), dtype=np.float32)
    path = tmp_path / "emb.bin"
    write_embedding_file(path, raw, tag="enc")
    blob = path.read_bytes()
    path.write_bytes(blob[:-3])
    with pytest.raises(EmbeddingFormatError, match="payload"):
        read_embedding_file(path)


def test_bad_magic_rejected(tmp_path):
    path = tmp_path / "other.bin"
    path.write_bytes(b"NOPE" + b"\x00" * 32)
    with pytest.raises(EmbeddingFormatError, match="not an embedding file"):
        read_embedding_file(path)


def test_nan_row_rejected_with_index(tmp_path):
    raw = np.zeros((4, 3), dtype=np.float32)
    path = tmp_path / "emb.bin"
    write_embedding_file(path, raw, tag="enc")
    # corrupt row 2 in place with a NaN payload
    blob = bytearray(path.read_bytes())
    header = 16 + len(b"enc")
    offset = header + (2 * 3) * 4
    blob[offset:offset + 4] = struct.pack("<f", float("nan"))
    path.write_bytes(bytes(blob))
    with pytest.raises(EmbeddingFormatError, match="row 2"):
        validate_embedding_file(path)


def test_universe_coverage_enforced(tmp_path):
    raw = np.zeros((4, 3), dtype=np.float32)
    path = tmp_path / "emb.bin"
    write_embedding_file(path, raw, tag="enc")
    assert validate_embedding_file(path, 4)["count"] == 4
    with pytest.raises(EmbeddingFormatError, match="universe"):
        validate_embedding_file(path, 5)


def test_text_dump(tmp_path):
    raw = np.arange(6, dtype=np.float32).reshape(2, 3)
    path = tmp_path / "emb.bin"
    write_embedding_file(path, raw, tag="enc")
    out = tmp_path / "emb.txt"
    dump_embedding_text(path, out)
    lines = out.read_text().splitlines()
    assert lines[0].startswith("# tag=enc")
    assert lines[1].startswith("0\t")
    assert len(lines) == 3


def test_raw_rows_are_immutable_after_load(tmp_path):
    raw = np.ones((2, 3), dtype=np.float32)
    path = tmp_path / "emb.bin"
    write_embedding_file(path, raw, tag="enc")
    back, _ = read_embedding_file(path)
    assert not back.flags.writeable
    with pytest.raises(ValueError):
        back[0, 0] = 5.0


def test_load_embedding_table(tmp_path):
    rng = np.random.default_rng(1)
    raw = rng.normal(size=(5, 6)).astype(np.float32)
    path = tmp_path / "emb.bin"
    write_embedding_file(path, raw, tag="enc")
    hp = Hyperparams(d=3, seed=5)
    table = load_embedding_table(path, 5, hp)
    assert table.W.shape == (3, 6)
    assert table.c.shape == (3,)
    assert table.projected_all().shape == (5, 3)
    # same seed, same projection init
    again = load_embedding_table(path, 5, hp)
    assert np.array_equal(table.W, again.W)

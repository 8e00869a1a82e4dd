"""Binary embedding-file format shared with the extraction tool.

Layout (little-endian): magic ``XEMB``, u32 count, u32 dim, u32 tag
length, UTF-8 encoder tag, then count x dim float32 values in dense
explanation-index order.  A text dump mode exists for debugging.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .params import EmbeddingTable, Hyperparams, init_projection

MAGIC = b"XEMB"


class EmbeddingFormatError(ValueError):
    pass


def write_embedding_file(path, raw: np.ndarray, tag: str) -> None:
    """Write count x dim float32 vectors with the standard header."""
    raw = np.ascontiguousarray(raw, dtype="<f4")
    if raw.ndim != 2:
        raise EmbeddingFormatError("embedding matrix must be 2-d")
    if not np.isfinite(raw).all():
        raise EmbeddingFormatError("embedding matrix contains non-finite values")
    count, dim = raw.shape
    tag_bytes = tag.encode("utf-8")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<III", count, dim, len(tag_bytes)))
        fh.write(tag_bytes)
        fh.write(raw.tobytes(order="C"))


def read_embedding_file(path) -> tuple[np.ndarray, str]:
    """Read a binary embedding file; returns (float32 matrix, encoder tag)."""
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < 16 or blob[:4] != MAGIC:
        raise EmbeddingFormatError(f"{path}: not an embedding file")
    count, dim, tag_len = struct.unpack_from("<III", blob, 4)
    offset = 16 + tag_len
    if len(blob) < offset:
        raise EmbeddingFormatError(f"{path}: truncated header")
    tag = blob[16:offset].decode("utf-8")
    expected = count * dim * 4
    body = blob[offset:]
    if len(body) != expected:
        raise EmbeddingFormatError(
            f"{path}: expected {expected} payload bytes, found {len(body)}"
        )
    raw = np.frombuffer(body, dtype="<f4").reshape(count, dim)
    return raw, tag


def validate_embedding_file(path, n_explanations: int | None = None) -> dict:
    """Header/payload consistency and finiteness checks; returns a summary.

    When ``n_explanations`` is given the file must cover exactly that
    universe.
    """
    raw, tag = read_embedding_file(path)
    bad = np.argwhere(~np.isfinite(raw))
    if bad.size:
        row = int(bad[0, 0])
        raise EmbeddingFormatError(f"{path}: non-finite value at row {row}")
    if n_explanations is not None and raw.shape[0] != n_explanations:
        raise EmbeddingFormatError(
            f"{path}: {raw.shape[0]} rows do not cover the "
            f"{n_explanations}-explanation universe"
        )
    return {"count": raw.shape[0], "dim": raw.shape[1], "tag": tag}


def dump_embedding_text(path, out_path) -> None:
    """Debugging dump: one ``index<TAB>v1,v2,...`` line per explanation."""
    raw, tag = read_embedding_file(path)
    out_path = Path(out_path)
    with out_path.open("w", encoding="utf-8") as fh:
        fh.write(f"# tag={tag} count={raw.shape[0]} dim={raw.shape[1]}\n")
        for idx, row in enumerate(raw):
            fh.write(f"{idx}\t{','.join(repr(float(v)) for v in row)}\n")


def load_embedding_table(
    path, n_explanations: int, hp: Hyperparams, init_scale: float = 0.1,
) -> EmbeddingTable:
    """Read a file into an EmbeddingTable with a freshly seeded projection."""
    raw, tag = read_embedding_file(path)
    validate_embedding_file(path, n_explanations)
    W, c = init_projection(hp, raw.shape[1], init_scale)
    return EmbeddingTable(raw=raw, W=W, c=c, tag=tag)

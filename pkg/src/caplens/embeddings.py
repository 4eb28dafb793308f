"""Bit-exact binary container for per-image embedding vectors.

Layout (all integers little-endian):

===========  ======================================================
header       magic ``CEMB`` (4 bytes), format version u16, dim u32,
             count u64, tag byte-length u16, tag UTF-8 bytes
record       id byte-length u16, id UTF-8 bytes,
             dim IEEE-754 32-bit floats
===========  ======================================================

Records are written in id-sorted order, so write(read(f)) reproduces f byte
for byte. The format is the contract between this package and the embedding
extractor; files written on any platform read identically.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO

import numpy as np

from .dataset import ClassificationDataset
from .errors import CaplensError

MAGIC = b"CEMB"
VERSION = 1

_HEADER = struct.Struct("<4sHIQ")
_U16 = struct.Struct("<H")


class EmbeddingFormatError(CaplensError):
    """File does not conform to the embedding container layout."""


class BadMagicError(EmbeddingFormatError):
    pass


class TruncatedFileError(EmbeddingFormatError):
    def __init__(self, offset: int) -> None:
        super().__init__(f"unexpected end of file at byte offset {offset}")
        self.offset = offset


class NonFiniteValueError(EmbeddingFormatError):
    def __init__(self, image_id: str, offset: int) -> None:
        super().__init__(
            f"non-finite embedding value for id {image_id!r} "
            f"(record at byte offset {offset})"
        )
        self.offset = offset


@dataclass
class EmbeddingMatrix:
    ids: list[str]
    rows: np.ndarray  # (n, dim) float32
    pretraining_tag: str = ""

    @property
    def dim(self) -> int:
        return int(self.rows.shape[1])

    def __len__(self) -> int:
        return len(self.ids)


def _read_exact(fp: BinaryIO, size: int, offset: int) -> bytes:
    data = fp.read(size)
    if len(data) != size:
        raise TruncatedFileError(offset + len(data))
    return data


def read_embeddings(path: str | Path) -> EmbeddingMatrix:
    """Read an embedding file; ids come back in file order."""
    with Path(path).open("rb") as fp:
        offset = 0
        header = _read_exact(fp, _HEADER.size, offset)
        magic, version, dim, count = _HEADER.unpack(header)
        if magic != MAGIC:
            raise BadMagicError(f"bad magic {magic!r}, expected {MAGIC!r}")
        if version != VERSION:
            raise EmbeddingFormatError(f"unsupported format version {version}")
        offset += _HEADER.size
        (tag_len,) = _U16.unpack(_read_exact(fp, 2, offset))
        offset += 2
        tag = _read_exact(fp, tag_len, offset).decode("utf-8")
        offset += tag_len

        ids: list[str] = []
        seen: set[str] = set()
        rows = np.empty((count, dim), dtype=np.float32)
        row_bytes = 4 * dim
        for i in range(count):
            record_offset = offset
            (id_len,) = _U16.unpack(_read_exact(fp, 2, offset))
            offset += 2
            image_id = _read_exact(fp, id_len, offset).decode("utf-8")
            offset += id_len
            vector = np.frombuffer(
                _read_exact(fp, row_bytes, offset), dtype="<f4"
            )
            offset += row_bytes
            if image_id in seen:
                raise EmbeddingFormatError(f"duplicate id {image_id!r} in file")
            if not np.isfinite(vector).all():
                raise NonFiniteValueError(image_id, record_offset)
            seen.add(image_id)
            ids.append(image_id)
            rows[i] = vector
        if fp.read(1):
            raise EmbeddingFormatError(
                f"trailing data after {count} records (offset {offset})"
            )
    return EmbeddingMatrix(ids=ids, rows=rows, pretraining_tag=tag)


def write_embeddings(
    matrix: EmbeddingMatrix, pretraining_tag: str, path: str | Path
) -> None:
    """Write records in id-sorted order; rejects duplicates and non-finite values."""
    rows = np.asarray(matrix.rows, dtype=np.float32)
    if rows.ndim != 2 or rows.shape[0] != len(matrix.ids):
        raise EmbeddingFormatError(
            f"matrix shape {rows.shape} does not match {len(matrix.ids)} ids"
        )
    if len(set(matrix.ids)) != len(matrix.ids):
        raise EmbeddingFormatError("duplicate ids in matrix")
    if rows.size and not np.isfinite(rows).all():
        raise NonFiniteValueError("<matrix>", 0)
    order = sorted(range(len(matrix.ids)), key=lambda i: matrix.ids[i])
    tag_bytes = pretraining_tag.encode("utf-8")
    with Path(path).open("wb") as fp:
        fp.write(_HEADER.pack(MAGIC, VERSION, rows.shape[1], len(matrix.ids)))
        fp.write(_U16.pack(len(tag_bytes)))
        fp.write(tag_bytes)
        for i in order:
            id_bytes = matrix.ids[i].encode("utf-8")
            fp.write(_U16.pack(len(id_bytes)))
            fp.write(id_bytes)
            fp.write(rows[i].astype("<f4").tobytes())


def join(
    dataset: ClassificationDataset, matrix: EmbeddingMatrix
) -> tuple[np.ndarray, list[str]]:
    """Rows aligned to dataset item order, plus the ids with no embedding.

    Missing ids are data for the caller to handle, not a failure.
    """
    index = {image_id: i for i, image_id in enumerate(matrix.ids)}
    found = []
    missing = []
    for item in dataset.items:
        row = index.get(item.image_id)
        if row is None:
            missing.append(item.image_id)
        else:
            found.append(row)
    if not found:
        return np.empty((0, matrix.dim), dtype=np.float32), missing
    return matrix.rows[found], missing

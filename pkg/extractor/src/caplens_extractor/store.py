"""Writer for the caplens embedding container (.cemb).

This is the contract between the extractor and the analysis toolkit, kept
independent here so the two packages share only the byte layout:

* header: magic ``CEMB``, format version u16, dim u32, count u64,
  tag byte-length u16, tag UTF-8 bytes (all little-endian)
* one record per image: id byte-length u16, id UTF-8 bytes,
  dim IEEE-754 32-bit floats

Records are written in id-sorted order and the file appears atomically
(written to a temp name, then renamed).
"""

from __future__ import annotations

import os
import struct
from pathlib import Path
from typing import Mapping

import numpy as np

MAGIC = b"CEMB"
VERSION = 1

_HEADER = struct.Struct("<4sHIQ")
_U16 = struct.Struct("<H")


def write_store(vectors: Mapping[str, np.ndarray], tag: str,
                path: str | Path) -> None:
    path = Path(path)
    ids = sorted(vectors)
    if ids:
        dim = int(np.asarray(vectors[ids[0]]).shape[0])
    else:
        dim = 0
    tag_bytes = tag.encode("utf-8")
    tmp = path.with_name(path.name + ".tmp")
    with tmp.open("wb") as fp:
        fp.write(_HEADER.pack(MAGIC, VERSION, dim, len(ids)))
        fp.write(_U16.pack(len(tag_bytes)))
        fp.write(tag_bytes)
        for image_id in ids:
            vector = np.asarray(vectors[image_id], dtype="<f4")
            if vector.shape != (dim,):
                raise ValueError(
                    f"vector for {image_id!r} has shape {vector.shape}, "
                    f"expected ({dim},)"
                )
            if not np.isfinite(vector).all():
                raise ValueError(f"non-finite embedding for {image_id!r}")
            id_bytes = image_id.encode("utf-8")
            fp.write(_U16.pack(len(id_bytes)))
            fp.write(id_bytes)
            fp.write(vector.tobytes())
    os.replace(tmp, path)

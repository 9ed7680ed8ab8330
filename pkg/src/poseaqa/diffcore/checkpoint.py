"""Parameter checkpoint files.

Layout: magic ``DPW1``, then per parameter: u32 name length, UTF-8 name,
u32 rank, u32 dims, f64 values.  All integers and floats little-endian.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"DPW1"


class CheckpointError(ValueError):
    pass


def save_parameters(params, path):
    path = Path(path)
    names = [p.name for p in params]
    if len(set(names)) != len(names):
        dupes = sorted({n for n in names if names.count(n) > 1})
        raise CheckpointError(f"duplicate parameter names: {dupes}")
    chunks = [MAGIC]
    for p in params:
        encoded = p.name.encode("utf-8")
        chunks.append(struct.pack("<I", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("<I", p.data.ndim))
        chunks.append(struct.pack(f"<{p.data.ndim}I", *p.data.shape))
        chunks.append(np.ascontiguousarray(p.data, dtype="<f8").tobytes())
    path.write_bytes(b"".join(chunks))


def read_checkpoint(path):
    """Return an ordered ``{name: array}`` mapping."""
    blob = Path(path).read_bytes()
    if blob[:4] != MAGIC:
        raise CheckpointError(f"{path}: bad magic {blob[:4]!r}")
    pos, out = 4, {}
    try:
        while pos < len(blob):
            (n,) = struct.unpack_from("<I", blob, pos)
            pos += 4
            name = blob[pos:pos + n].decode("utf-8")
            pos += n
            (rank,) = struct.unpack_from("<I", blob, pos)
            pos += 4
            dims = struct.unpack_from(f"<{rank}I", blob, pos)
            pos += 4 * rank
            count = int(np.prod(dims)) if rank else 1
            values = np.frombuffer(blob, dtype="<f8", count=count, offset=pos)
            pos += 8 * count
            out[name] = values.reshape(dims).astype(np.float64)
    except struct.error as exc:
        raise CheckpointError(f"{path}: truncated checkpoint") from exc
    return out


def load_parameters(params, path, strict=True):
    stored = read_checkpoint(path)
    by_name = {p.name: p for p in params}
    if strict:
        missing = sorted(set(by_name) - set(stored))
        extra = sorted(set(stored) - set(by_name))
        if missing or extra:
            raise CheckpointError(f"{path}: missing {missing}, unexpected {extra}")
    for name, values in stored.items():
        p = by_name.get(name)
        if p is None:
            continue
        if p.data.shape != values.shape:
            raise CheckpointError(f"{name}: checkpoint shape {values.shape} != model shape {p.data.shape}")
        p.data[...] = values
    return params

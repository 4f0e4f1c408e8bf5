"""Simple binary tensor container used by the bev-demo CLI and bindings.

Layout (little-endian):
    magic   4 bytes  b"RKTN"
    version u8       1
    dtype   u8       0 = float32, 1 = uint8
    rank    u8
    dims    rank x u32
    payload C-order values
"""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"RKTN"
VERSION = 1
_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("u1")}
_DTYPE_TAGS = {np.dtype("float32"): 0, np.dtype("uint8"): 1}


def write_tensor(path, arr: np.ndarray):
    arr = np.ascontiguousarray(arr)
    if arr.dtype not in _DTYPE_TAGS:
        arr = arr.astype(np.float32)
    tag = _DTYPE_TAGS[arr.dtype]
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<BBB", VERSION, tag, arr.ndim))
        f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        f.write(arr.astype(arr.dtype.newbyteorder("<")).tobytes())


def read_tensor(path) -> np.ndarray:
    with open(path, "rb") as f:
        data = f.read()
    if data[:4] != MAGIC:
        raise ValueError(f"{path}: not a tensor container (bad magic)")
    version, tag, rank = struct.unpack_from("<BBB", data, 4)
    if version != VERSION:
        raise ValueError(f"{path}: unsupported container version {version}")
    if tag not in _DTYPES:
        raise ValueError(f"{path}: unknown dtype tag {tag}")
    dims = struct.unpack_from(f"<{rank}I", data, 7)
    offset = 7 + 4 * rank
    dtype = _DTYPES[tag]
    count = int(np.prod(dims)) if rank else 1
    expected = offset + count * dtype.itemsize
    if len(data) != expected:
        raise ValueError(f"{path}: payload size mismatch ({len(data)} vs {expected})")
    return np.frombuffer(data, dtype=dtype, count=count, offset=offset).reshape(dims)

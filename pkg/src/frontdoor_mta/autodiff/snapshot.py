"""Flat binary parameter snapshots.

Layout (little-endian)::

    b"FDMT" | uint32 version | uint32 count
    count x ( uint16 name_len | name utf-8 | uint8 ndim | ndim x uint64 dim
              | prod(dims) x float64, row-major )
"""

import struct
from collections import OrderedDict
from pathlib import Path

import numpy as np

from frontdoor_mta.errors import DataError

MAGIC = b"FDMT"
VERSION = 1


def dumps(arrays: "OrderedDict[str, np.ndarray]") -> bytes:
    """Serialize named arrays in the given order."""
    parts = [MAGIC, struct.pack("<II", VERSION, len(arrays))]
    for name, array in arrays.items():
        encoded = name.encode("utf-8")
        data = np.ascontiguousarray(array, dtype="<f8")
        parts.append(struct.pack("<H", len(encoded)))
        parts.append(encoded)
        parts.append(struct.pack("<B", data.ndim))
        parts.append(struct.pack(f"<{data.ndim}Q", *data.shape))
        parts.append(data.tobytes(order="C"))
    return b"".join(parts)


def loads(blob: bytes) -> "OrderedDict[str, np.ndarray]":
    """Inverse of :func:`dumps`."""
    if blob[:4] != MAGIC:
        raise DataError("not a parameter snapshot (bad magic)")
    version, count = struct.unpack_from("<II", blob, 4)
    if version != VERSION:
        raise DataError(f"unsupported snapshot version {version}")
    offset = 12
    arrays: OrderedDict[str, np.ndarray] = OrderedDict()
    for _ in range(count):
        (name_len,) = struct.unpack_from("<H", blob, offset)
        offset += 2
        name = blob[offset : offset + name_len].decode("utf-8")
        offset += name_len
        (ndim,) = struct.unpack_from("<B", blob, offset)
        offset += 1
        shape = struct.unpack_from(f"<{ndim}Q", blob, offset)
        offset += 8 * ndim
        size = int(np.prod(shape)) if ndim else 1
        data = np.frombuffer(blob, dtype="<f8", count=size, offset=offset)
        offset += 8 * size
        arrays[name] = data.reshape(shape).astype(np.float64)
    return arrays


def save(path: Path, arrays: "OrderedDict[str, np.ndarray]") -> None:
    Path(path).write_bytes(dumps(arrays))


def load(path: Path) -> "OrderedDict[str, np.ndarray]":
    path = Path(path)
    if not path.exists():
        raise DataError(f"Parameter snapshot not found: expected {path}")
    return loads(path.read_bytes())

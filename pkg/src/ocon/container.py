"""OCFS1: a small checksummed container for named float64 tensors plus JSON metadata.

Layout (all integers little-endian)::

    magic        8 bytes   b"\\x89OCFS1\\r\\n"
    version      u16       1
    meta_len     u32       length of the JSON block
    payload_len  u64       length of the tensor payload
    meta         meta_len bytes of UTF-8 JSON; ``meta["tensors"]`` lists
                 {"name", "shape"} in payload order
    payload      row-major IEEE-754 binary64, little-endian, tensors back to back
    crc          u32       CRC32C (Castagnoli) of every preceding byte

The header carries both lengths so truncation is detected before the checksum.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import crc32c
import numpy as np

from .errors import BadMagic, ChecksumMismatch, ContainerError, TruncatedFile, VersionMismatch

MAGIC = b"\x89OCFS1\r\n"
VERSION = 1
_HEADER = struct.Struct("<8sHIQ")
_CRC = struct.Struct("<I")


def encode(tensors: dict[str, np.ndarray], meta: dict | None = None) -> bytes:
    meta = dict(meta or {})
    entries = []
    chunks = []
    for name, arr in tensors.items():
        arr = np.asarray(arr)
        if arr.dtype.kind not in "fiub":
            raise TypeError(f"tensor {name!r}: unsupported dtype {arr.dtype}")
        entries.append({"name": name, "shape": list(arr.shape)})
        chunks.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    meta["tensors"] = entries
    meta_bytes = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode("utf-8")
    payload = b"".join(chunks)
    body = _HEADER.pack(MAGIC, VERSION, len(meta_bytes), len(payload)) + meta_bytes + payload
    return body + _CRC.pack(crc32c.crc32c(body))


def decode(data: bytes) -> tuple[dict[str, np.ndarray], dict]:
    if data[: len(MAGIC)] != MAGIC[: len(data)]:
        raise BadMagic("not an OCFS1 container")
    if len(data) < _HEADER.size:
        raise TruncatedFile(f"{len(data)} bytes, header needs {_HEADER.size}")
    _, version, meta_len, payload_len = _HEADER.unpack_from(data)
    if version != VERSION:
        raise VersionMismatch(f"container version {version}, reader supports {VERSION}")
    expected = _HEADER.size + meta_len + payload_len + _CRC.size
    if len(data) < expected:
        raise TruncatedFile(f"{len(data)} bytes, header declares {expected}")
    if len(data) > expected:
        raise ContainerError(f"{len(data) - expected} trailing bytes after checksum")
    (stored,) = _CRC.unpack_from(data, expected - _CRC.size)
    if crc32c.crc32c(data[: expected - _CRC.size]) != stored:
        raise ChecksumMismatch("CRC32C does not match contents")

    meta_start = _HEADER.size
    meta = json.loads(data[meta_start:meta_start + meta_len].decode("utf-8"))
    offset = meta_start + meta_len
    tensors = {}
    for entry in meta.pop("tensors"):
        shape = tuple(entry["shape"])
        count = int(np.prod(shape, dtype=np.int64))
        arr = np.frombuffer(data, dtype="<f8", count=count, offset=offset)
        tensors[entry["name"]] = arr.astype(np.float64).reshape(shape)
        offset += count * 8
    if offset != meta_start + meta_len + payload_len:
        raise ContainerError("tensor table does not match payload length")
    return tensors, meta


def write(path, tensors: dict[str, np.ndarray], meta: dict | None = None) -> None:
    Path(path).write_bytes(encode(tensors, meta))


def read(path) -> tuple[dict[str, np.ndarray], dict]:
    return decode(Path(path).read_bytes())

"""Flat binary tensor files.

Layout (little-endian): a 16-byte header of magic ``PASM``, u8 rank, u8
element kind, u16 reserved (zero), and four u16 dims; then the row-major
payload.  Kind 0 stores fixed-point raws as signed 64-bit integers, kind 1
stores codebook indices as unsigned bytes.  Unused trailing dims are zero.
"""
from __future__ import annotations

import struct
from pathlib import Path
from typing import Sequence, Union

from .errors import FileFormatError

MAGIC = b"PASM"
KIND_FXP_RAW_I64 = 0
KIND_INDEX_U8 = 1

_HEADER = struct.Struct("<4sBBH4H")

PathLike = Union[str, Path]


def write_tensor(path: PathLike, dims: Sequence[int], kind: int, values: Sequence[int]) -> None:
    dims = list(dims)
    if not 1 <= len(dims) <= 4:
        raise FileFormatError(f"rank must be 1..4, got {len(dims)}")
    if any(d < 1 or d > 0xFFFF for d in dims):
        raise FileFormatError(f"dims out of u16 range: {dims}")
    count = 1
    for d in dims:
        count *= d
    if count != len(values):
        raise FileFormatError(f"payload has {len(values)} values, dims imply {count}")
    padded = dims + [0] * (4 - len(dims))
    header = _HEADER.pack(MAGIC, len(dims), kind, 0, *padded)
    if kind == KIND_FXP_RAW_I64:
        lo, hi = -(1 << 63), (1 << 63) - 1
        if values and (min(values) < lo or max(values) > hi):
            raise FileFormatError("raw value exceeds the i64 storage type")
        payload = struct.pack(f"<{len(values)}q", *values)
    elif kind == KIND_INDEX_U8:
        if values and (min(values) < 0 or max(values) > 0xFF):
            raise FileFormatError("index value exceeds the u8 storage type")
        payload = bytes(values)
    else:
        raise FileFormatError(f"unknown element kind {kind}")
    Path(path).write_bytes(header + payload)


def read_tensor(path: PathLike) -> tuple[tuple[int, ...], int, list[int]]:
    """Return ``(dims, kind, values)`` from a tensor file."""
    blob = Path(path).read_bytes()
    if len(blob) < _HEADER.size:
        raise FileFormatError(f"{path}: truncated header")
    magic, rank, kind, _reserved, d0, d1, d2, d3 = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise FileFormatError(f"{path}: bad magic {magic!r}")
    if not 1 <= rank <= 4:
        raise FileFormatError(f"{path}: bad rank {rank}")
    dims = (d0, d1, d2, d3)[:rank]
    if any(d < 1 for d in dims):
        raise FileFormatError(f"{path}: zero dim in {dims}")
    count = 1
    for d in dims:
        count *= d
    body = blob[_HEADER.size:]
    if kind == KIND_FXP_RAW_I64:
        if len(body) != 8 * count:
            raise FileFormatError(f"{path}: payload size mismatch")
        values = list(struct.unpack(f"<{count}q", body))
    elif kind == KIND_INDEX_U8:
        if len(body) != count:
            raise FileFormatError(f"{path}: payload size mismatch")
        values = list(body)
    else:
        raise FileFormatError(f"{path}: unknown element kind {kind}")
    return dims, kind, values


def sniff(path: PathLike) -> bool:
    """True when the file starts with the tensor magic."""
    try:
        with open(path, "rb") as fh:
            return fh.read(4) == MAGIC
    except OSError:
        return False

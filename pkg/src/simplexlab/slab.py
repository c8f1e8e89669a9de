"""Binary container for grid functions, lattice sets, and tagged kernels.

Layout, all little-endian:

    magic   4 bytes  b"SLAB"
    version u8       currently 1
    kind    u8       0 = f64 grid, 1 = packed bit set
    d       u8       ambient dimension
    taglen  u8       length of the construction tag (0 for plain data)
    tag     taglen bytes, UTF-8
    lower   d x i64
    extents d x u64
    payload kind 0: row-major f64 values; kind 1: packbits(mask), little bit order

A JSON form exists for tiny hand-written fixtures.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Union

import numpy as np

from .errors import SlabFormatError
from .grids import Box, GridFunction, LatticeSet

_MAGIC = b"SLAB"
_VERSION = 1

Payload = Union[GridFunction, LatticeSet]


def save_slab(path, obj: Payload) -> None:
    if isinstance(obj, LatticeSet):
        kind = 1
        tag = b""
        payload = np.packbits(obj.mask.reshape(-1), bitorder="little").tobytes()
    elif isinstance(obj, GridFunction):
        kind = 0
        tag = obj.tag.encode("utf-8")
        payload = np.ascontiguousarray(obj.values, dtype="<f8").tobytes()
    else:
        raise SlabFormatError(f"cannot serialize {type(obj).__name__}")
    box = obj.box
    d = box.dim
    if d > 255 or len(tag) > 255:
        raise SlabFormatError("dimension or tag too large for the header")
    head = _MAGIC + struct.pack("<BBBB", _VERSION, kind, d, len(tag)) + tag
    head += struct.pack(f"<{d}q", *box.lower)
    head += struct.pack(f"<{d}Q", *box.extents)
    Path(path).write_bytes(head + payload)


def load_slab(path) -> Payload:
    raw = Path(path).read_bytes()
    if len(raw) < 8 or raw[:4] != _MAGIC:
        raise SlabFormatError(f"{path}: not a SLAB container")
    version, kind, d, taglen = struct.unpack_from("<BBBB", raw, 4)
    if version != _VERSION:
        raise SlabFormatError(f"{path}: unsupported version {version}")
    off = 8
    tag = raw[off : off + taglen].decode("utf-8")
    off += taglen
    need = off + d * 16
    if len(raw) < need:
        raise SlabFormatError(f"{path}: truncated header")
    lower = struct.unpack_from(f"<{d}q", raw, off)
    off += d * 8
    extents = struct.unpack_from(f"<{d}Q", raw, off)
    off += d * 8
    box = Box(lower, extents)
    payload = raw[off:]
    if kind == 0:
        expect = box.size * 8
        if len(payload) != expect:
            raise SlabFormatError(f"{path}: payload {len(payload)}B, expected {expect}B")
        values = np.frombuffer(payload, dtype="<f8").reshape(box.extents)
        return GridFunction(box, values.copy(), tag)
    if kind == 1:
        expect = (box.size + 7) // 8
        if len(payload) != expect:
            raise SlabFormatError(f"{path}: payload {len(payload)}B, expected {expect}B")
        bits = np.unpackbits(
            np.frombuffer(payload, dtype=np.uint8), count=box.size, bitorder="little"
        )
        return LatticeSet(box, bits.reshape(box.extents).astype(bool))
    raise SlabFormatError(f"{path}: unknown kind {kind}")


def load_json_fixture(path) -> Payload:
    """Tiny hand-written fixtures: {'kind': 'grid'|'set', 'lower', 'extents', ...}."""
    data = json.loads(Path(path).read_text())
    try:
        kind = data["kind"]
        box = Box(tuple(data["lower"]), tuple(data["extents"]))
        if kind == "grid":
            values = np.asarray(data["values"], dtype=np.float64).reshape(box.extents)
            return GridFunction(box, values, data.get("tag", ""))
        if kind == "set":
            if "points" in data:
                return LatticeSet.from_points(box, [tuple(p) for p in data["points"]])
            mask = np.asarray(data["mask"], dtype=bool).reshape(box.extents)
            return LatticeSet(box, mask)
    except (KeyError, TypeError, ValueError) as e:
        raise SlabFormatError(f"{path}: bad JSON fixture ({e})") from e
    raise SlabFormatError(f"{path}: unknown kind {data.get('kind')!r}")


def save_json_fixture(path, obj: Payload) -> None:
    box = obj.box
    data = {"lower": list(box.lower), "extents": list(box.extents)}
    if isinstance(obj, LatticeSet):
        data["kind"] = "set"
        data["points"] = [list(map(int, p)) for p in obj.points()]
    else:
        data["kind"] = "grid"
        data["values"] = [float(v) for v in obj.values.reshape(-1)]
        if obj.tag:
            data["tag"] = obj.tag
    Path(path).write_text(json.dumps(data))

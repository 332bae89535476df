"""Binary container for named float32 tensors.

Layout, all integers little-endian u32:

    magic   4 bytes  b"PANW"
    version u32      currently 1
    name    u32 length + that many UTF-8 bytes
    count   u32      number of tensors
    then per tensor:
        name  u32 length + UTF-8 bytes
        rank  u32
        dims  rank * u32
        data  prod(dims) * 4 bytes of little-endian float32, C order

Weights round-trip bit for bit; the architecture itself is not stored and
is rebuilt from configuration before loading.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import FormatError
from .models import Model

MAGIC = b"PANW"
VERSION = 1

_MAX_NAME = 1 << 16
_MAX_RANK = 8


def save_tensors(path, name: str, tensors: dict[str, np.ndarray]) -> None:
    out = bytearray()
    out += MAGIC
    out += struct.pack("<I", VERSION)
    _pack_str(out, name)
    out += struct.pack("<I", len(tensors))
    for key, arr in tensors.items():
        arr = np.asarray(arr, dtype=np.float32)
        if not arr.flags["C_CONTIGUOUS"]:  # ascontiguousarray would flatten 0-d
            arr = np.ascontiguousarray(arr)
        _pack_str(out, key)
        out += struct.pack("<I", arr.ndim)
        out += struct.pack("<%dI" % arr.ndim, *arr.shape)
        out += arr.astype("<f4", copy=False).tobytes()
    Path(path).write_bytes(bytes(out))


def load_tensors(path) -> tuple[str, dict[str, np.ndarray]]:
    try:
        buf = Path(path).read_bytes()
    except OSError as e:
        raise FormatError("cannot read %s: %s" % (path, e)) from None
    r = _Reader(buf, str(path))
    magic = r.take(4, "magic")
    if magic != MAGIC:
        raise FormatError("%s: bad magic %r at byte 0, expected %r" % (path, magic, MAGIC))
    version = r.u32("version")
    if version != VERSION:
        raise FormatError("%s: unsupported version %d" % (path, version))
    name = r.string("model name")
    count = r.u32("tensor count")
    tensors = {}
    for i in range(count):
        key = r.string("tensor %d name" % i)
        rank = r.u32("tensor %r rank" % key)
        if rank > _MAX_RANK:
            raise FormatError("%s: tensor %r has rank %d, limit is %d" % (path, key, rank, _MAX_RANK))
        dims = tuple(r.u32("tensor %r dim %d" % (key, d)) for d in range(rank))
        size = 1
        for d in dims:
            size *= d
        payload = r.take(4 * size, "tensor %r data" % key)
        tensors[key] = np.frombuffer(payload, dtype="<f4").astype(np.float32).reshape(dims)
    if r.pos != len(buf):
        raise FormatError("%s: %d trailing bytes after tensor %d" % (path, len(buf) - r.pos, count - 1))
    return name, tensors


def save_model(path, model: Model) -> None:
    """Parameters and running statistics, in build order."""
    save_tensors(path, model.name, {k: t.data for k, t in model.tensors().items()})


def load_model(path, model: Model) -> str:
    """Load saved tensors into an already built model of the same shape.
    Returns the name recorded in the file."""
    name, tensors = load_tensors(path)
    model.load_tensors(tensors)
    return name


class _Reader:
    def __init__(self, buf: bytes, where: str):
        self.buf = buf
        self.pos = 0
        self.where = where

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.buf):
            raise FormatError(
                "%s: truncated reading %s at byte %d (need %d bytes, have %d)"
                % (self.where, what, self.pos, n, len(self.buf) - self.pos)
            )
        out = self.buf[self.pos : self.pos + n]
        self.pos += n
        return out

    def u32(self, what: str) -> int:
        return struct.unpack("<I", self.take(4, what))[0]

    def string(self, what: str) -> str:
        n = self.u32(what + " length")
        if n > _MAX_NAME:
            raise FormatError("%s: %s length %d exceeds limit %d" % (self.where, what, n, _MAX_NAME))
        raw = self.take(n, what)
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError as e:
            raise FormatError("%s: %s is not valid UTF-8: %s" % (self.where, what, e)) from e


def _pack_str(out: bytearray, s: str) -> None:
    raw = s.encode("utf-8")
    if len(raw) > _MAX_NAME:
        raise FormatError("name %r exceeds %d bytes encoded" % (s[:40], _MAX_NAME))
    out += struct.pack("<I", len(raw))
    out += raw

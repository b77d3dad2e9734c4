"""Reading and writing nodal fields.

FLD1 layout (all little-endian)::

    b"FLD1" | u32 d | d x (u64 n_i, f64 L_i) | prod(n_i) x f64, last axis fastest

PGM images (P2 ascii or P5 binary) are mapped linearly to [0, 1].  The grid
gets isotropic spacing with the longest axis spanning one unit.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .field import Grid, GridError, ScalarField

MAGIC = b"FLD1"


class FieldFormatError(ValueError):
    pass


def encode_fld(f: ScalarField) -> bytes:
    g = f.grid
    parts = [MAGIC, struct.pack("<I", g.ndim)]
    for n, L in zip(g.dims, g.lengths):
        parts.append(struct.pack("<Qd", n, L))
    parts.append(np.ascontiguousarray(f.values, dtype="<f8").tobytes())
    return b"".join(parts)


def decode_fld(data: bytes, name: str = "<bytes>") -> ScalarField:
    if data[:4] != MAGIC:
        raise FieldFormatError(f"{name}: missing FLD1 magic")
    try:
        (d,) = struct.unpack_from("<I", data, 4)
        if d not in (1, 2, 3):
            raise FieldFormatError(f"{name}: unsupported dimension {d}")
        dims, lengths = [], []
        off = 8
        for _ in range(d):
            n, L = struct.unpack_from("<Qd", data, off)
            dims.append(n)
            lengths.append(L)
            off += 16
    except struct.error as exc:
        raise FieldFormatError(f"{name}: truncated header") from exc
    count = int(np.prod(dims))
    if len(data) - off != 8 * count:
        raise FieldFormatError(f"{name}: expected {count} values, found {(len(data) - off) / 8:g}")
    values = np.frombuffer(data, dtype="<f8", count=count, offset=off).astype(np.float64)
    try:
        return ScalarField(Grid(tuple(dims), tuple(lengths)), values.reshape(dims))
    except GridError as exc:
        raise FieldFormatError(f"{name}: {exc}") from exc


def write_fld(path, f: ScalarField) -> None:
    Path(path).write_bytes(encode_fld(f))


def read_fld(path) -> ScalarField:
    path = Path(path)
    return decode_fld(path.read_bytes(), str(path))


def _pgm_tokens(data: bytes, count: int, start: int):
    """Read ``count`` header tokens, skipping ``#`` comments; also return the end offset."""
    pos = start
    out = []
    while len(out) < count:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        end = pos
        while end < len(data) and not data[end:end + 1].isspace():
            end += 1
        if end == pos:
            raise FieldFormatError("truncated PGM header")
        out.append(data[pos:end])
        pos = end
    return out, pos


def decode_pgm(data: bytes, name: str = "<bytes>") -> ScalarField:
    magic = data[:2]
    if magic not in (b"P2", b"P5"):
        raise FieldFormatError(f"{name}: not a P2/P5 PGM file")
    try:
        (w, h, maxval), pos = _pgm_tokens(data, 3, 2)
        width, height, maxval = int(w), int(h), int(maxval)
    except ValueError as exc:
        raise FieldFormatError(f"{name}: bad PGM header") from exc
    if not (0 < maxval < 65536) or width < 2 or height < 2:
        raise FieldFormatError(f"{name}: unsupported PGM geometry {width}x{height}, maxval {maxval}")
    count = width * height
    if magic == b"P2":
        try:
            body = np.array(data[pos:].split(), dtype=np.float64)
        except ValueError as exc:
            raise FieldFormatError(f"{name}: non-numeric pixel data") from exc
        if body.size != count:
            raise FieldFormatError(f"{name}: expected {count} pixels, found {body.size}")
    else:
        pos += 1  # single whitespace byte after maxval
        dtype = ">u1" if maxval < 256 else ">u2"
        nbytes = count * np.dtype(dtype).itemsize
        if len(data) - pos < nbytes:
            raise FieldFormatError(f"{name}: truncated pixel data")
        body = np.frombuffer(data, dtype=dtype, count=count, offset=pos).astype(np.float64)
    values = body.reshape(height, width) / maxval
    longest = max(width, height) - 1
    grid = Grid((height, width), ((height - 1) / longest, (width - 1) / longest))
    return ScalarField(grid, values)


def read_pgm(path) -> ScalarField:
    path = Path(path)
    return decode_pgm(path.read_bytes(), str(path))


def read_field(path) -> ScalarField:
    """Read FLD1 or PGM, dispatching on the magic bytes."""
    path = Path(path)
    data = path.read_bytes()
    if data[:4] == MAGIC:
        return decode_fld(data, str(path))
    if data[:2] in (b"P2", b"P5"):
        return decode_pgm(data, str(path))
    raise FieldFormatError(f"{path}: unrecognised field format")

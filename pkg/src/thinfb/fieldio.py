"""
Binary field files.

Layout (all little-endian):

    8 bytes   magic b"THINFB1\\0"
    u32       version (1)
    u32       n
    u32       m
    u32 x n+1 points per axis
    f64       h
    f64       extent
    f64 x m*N component blocks, row-major, last axis fastest
    u8  x P   plate mask, one byte (0 or 1) per plate node, row-major
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .geometry import Grid, VectorField

__all__ = ["MAGIC", "VERSION", "FieldFileError", "write_field", "read_field", "encode_field", "decode_field"]

MAGIC = b"THINFB1\0"
VERSION = 1


class FieldFileError(ValueError):
    pass


def encode_field(G: VectorField) -> bytes:
    grid = G.grid
    head = MAGIC + struct.pack("<3I", VERSION, grid.n, grid.m)
    head += struct.pack(f"<{grid.n + 1}I", *grid.shape)
    head += struct.pack("<2d", grid.h, grid.extent)
    body = np.ascontiguousarray(G.values, dtype="<f8").tobytes()
    mask = np.ascontiguousarray(G.mask, dtype=np.uint8).tobytes()
    return head + body + mask


def decode_field(data: bytes) -> VectorField:
    if len(data) < len(MAGIC) + 12 or data[: len(MAGIC)] != MAGIC:
        raise FieldFileError("not a field file (bad magic)")
    off = len(MAGIC)
    version, n, m = struct.unpack_from("<3I", data, off)
    off += 12
    if version != VERSION:
        raise FieldFileError(f"unsupported field file version {version}")
    if n not in (1, 2) or m < 1:
        raise FieldFileError(f"invalid header dimensions n={n}, m={m}")
    need = off + 4 * (n + 1) + 16
    if len(data) < need:
        raise FieldFileError("truncated header")
    shape = struct.unpack_from(f"<{n + 1}I", data, off)
    off += 4 * (n + 1)
    h, extent = struct.unpack_from("<2d", data, off)
    off += 16
    try:
        grid = Grid(n, m, h, extent)
    except ValueError as exc:
        raise FieldFileError(f"invalid grid in header: {exc}") from exc
    if tuple(shape) != grid.shape:
        raise FieldFileError(f"header shape {shape} inconsistent with h and extent {grid.shape}")
    nvals = m * int(np.prod(shape))
    nmask = int(np.prod(grid.plate_shape))
    if len(data) != off + 8 * nvals + nmask:
        raise FieldFileError(f"payload is {len(data) - off} bytes, expected {8 * nvals + nmask}")
    values = np.frombuffer(data, dtype="<f8", count=nvals, offset=off).reshape((m,) + grid.shape).astype(float)
    off += 8 * nvals
    raw = np.frombuffer(data, dtype=np.uint8, count=nmask, offset=off)
    if np.any(raw > 1):
        raise FieldFileError("mask bytes must be 0 or 1")
    mask = raw.reshape(grid.plate_shape).astype(bool)
    return VectorField(grid, values, mask)


def write_field(path, G: VectorField) -> None:
    Path(path).write_bytes(encode_field(G))


def read_field(path) -> VectorField:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise FieldFileError(f"cannot read {path}: {exc}") from exc
    return decode_field(data)

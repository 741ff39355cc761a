"""Flow field serialization: VIKF binary dumps and a debug CSV."""

import struct

import numpy as np

from ..errors import SchemaError
from .core import FlowField

_MAGIC = b"VIKF"
_HEADER = struct.Struct("<4sII")

FLOW_CSV_HEADER = "x,y,dx,dy"


def write_flow(field: FlowField) -> bytes:
    """Little-endian dump: magic VIKF, u32 width, u32 height, f32 (dx, dy) pairs."""
    header = _HEADER.pack(_MAGIC, field.width, field.height)
    return header + np.ascontiguousarray(field.u, dtype="<f4").tobytes()


def read_flow(data: bytes) -> FlowField:
    if len(data) < _HEADER.size:
        raise SchemaError("flow dump shorter than its header")
    magic, width, height = _HEADER.unpack_from(data)
    if magic != _MAGIC:
        raise SchemaError(f"bad flow magic {magic!r}")
    expected = _HEADER.size + width * height * 8
    if len(data) != expected:
        raise SchemaError(
            f"flow dump size {len(data)} != expected {expected} "
            f"for {width}x{height}"
        )
    u = np.frombuffer(data, dtype="<f4", offset=_HEADER.size)
    u = u.reshape(height, width, 2).astype(np.float32)
    return FlowField(width, height, u)


def flow_csv_lines(field: FlowField):
    """Yields header plus one `x,y,dx,dy` row per cell, row-major."""
    yield FLOW_CSV_HEADER
    u = field.u
    for y in range(field.height):
        for x in range(field.width):
            yield f"{x},{y},{float(u[y, x, 0])},{float(u[y, x, 1])}"

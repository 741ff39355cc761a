"""Grayscale frames, random marker patterns, and binary PGM (P5) I/O.

Conventions used throughout the package: top-left origin, x rightward,
y downward, 8-bit single-channel intensities, and a physical scale given in
mm per pixel (default 0.1, i.e. 10 px per mm).
"""

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import rng
from .errors import DimensionError, PgmError, SchemaError

DEFAULT_SCALE_MM_PER_PX = 0.1
MIN_PATTERN_SIDE = 16

_WHITESPACE = b" \t\r\n\x0b\x0c"


@dataclass(frozen=True, eq=False)
class Frame:
    """Single-channel 8-bit image with physical scale and timestamp.

    `pixels` is a read-only (height, width) uint8 array. Frames are immutable
    after construction and safe to share across threads.
    """

    width: int
    height: int
    pixels: np.ndarray
    scale: float = DEFAULT_SCALE_MM_PER_PX
    timestamp: float = 0.0

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.dtype != np.uint8:
            raise ValueError(f"pixels must be uint8, got {px.dtype}")
        if px.size != self.width * self.height:
            raise DimensionError(
                f"pixel count {px.size} does not match {self.width}x{self.height}"
            )
        px = np.ascontiguousarray(px.reshape(self.height, self.width))
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)
        if not self.scale > 0:
            raise ValueError(f"scale must be positive, got {self.scale}")
        if self.timestamp < 0:
            raise ValueError(f"timestamp must be non-negative, got {self.timestamp}")

    def with_meta(self, *, scale=None, timestamp=None) -> "Frame":
        return Frame(
            self.width,
            self.height,
            self.pixels,
            self.scale if scale is None else scale,
            self.timestamp if timestamp is None else timestamp,
        )


@dataclass(frozen=True)
class MarkerPattern:
    """Parameters of a seeded dense random marker pattern."""

    seed: int
    width: int
    height: int
    intensity_min: int = 0
    intensity_max: int = 255


def generate_marker_pattern(spec: MarkerPattern) -> Frame:
    """Deterministic i.i.d.-uniform marker image for the given spec.

    Every pixel is drawn independently and uniformly from
    [intensity_min, intensity_max]; the same spec always reproduces the same
    bytes. Sizes below 16x16 are rejected because patch matching degenerates.
    """
    if spec.width < MIN_PATTERN_SIDE or spec.height < MIN_PATTERN_SIDE:
        raise DimensionError(
            f"pattern {spec.width}x{spec.height} below the "
            f"{MIN_PATTERN_SIDE}x{MIN_PATTERN_SIDE} minimum"
        )
    if not (0 <= spec.intensity_min < spec.intensity_max <= 255):
        raise ValueError(
            f"bad intensity bounds [{spec.intensity_min}, {spec.intensity_max}]"
        )
    values = rng.uniform_ints(
        spec.seed, spec.width * spec.height, spec.intensity_min, spec.intensity_max
    )
    pixels = values.astype(np.uint8).reshape(spec.height, spec.width)
    return Frame(spec.width, spec.height, pixels)


def _next_token(data: bytes, pos: int) -> tuple[bytes, int]:
    n = len(data)
    while pos < n:
        c = data[pos]
        if c in _WHITESPACE:
            pos += 1
        elif c == ord("#"):
            while pos < n and data[pos] not in b"\r\n":
                pos += 1
        else:
            break
    start = pos
    while pos < n and data[pos] not in _WHITESPACE:
        pos += 1
    if start == pos:
        raise PgmError("malformed header: truncated before all fields were read")
    return data[start:pos], pos


def read_pgm(data: bytes, *, scale: float = DEFAULT_SCALE_MM_PER_PX,
             timestamp: float = 0.0) -> Frame:
    """Decodes a binary PGM (magic P5, maxval 255) byte string into a Frame."""
    if data[:2] != b"P5":
        raise PgmError("malformed header: not a binary PGM (missing P5 magic)")
    pos = 2
    fields = []
    for name in ("width", "height", "maxval"):
        token, pos = _next_token(data, pos)
        try:
            fields.append(int(token))
        except ValueError:
            raise PgmError(f"malformed header: non-numeric {name} {token!r}") from None
    width, height, maxval = fields
    if width <= 0 or height <= 0:
        raise PgmError(f"malformed header: bad dimensions {width}x{height}")
    if maxval != 255:
        raise PgmError(f"unsupported maxval {maxval} (only 255)")
    if pos >= len(data) or data[pos] not in _WHITESPACE:
        raise PgmError("malformed header: missing whitespace after maxval")
    payload = data[pos + 1:]
    expected = width * height
    if len(payload) < expected:
        raise PgmError(
            f"truncated payload: expected {expected} bytes, got {len(payload)}"
        )
    if len(payload) > expected:
        raise PgmError(
            f"malformed payload: {len(payload) - expected} trailing bytes"
        )
    pixels = np.frombuffer(payload, dtype=np.uint8).reshape(height, width).copy()
    return Frame(width, height, pixels, scale, timestamp)


def write_pgm(frame: Frame) -> bytes:
    """Canonical binary PGM encoding: P5, one space, one newline per field."""
    header = f"P5\n{frame.width} {frame.height}\n255\n".encode("ascii")
    return header + frame.pixels.tobytes()


def _sidecar_path(path: Path) -> Path:
    return path.with_name(path.stem + ".meta.json")


def save_frame(path, frame: Frame, *, sidecar: bool = True) -> None:
    """Writes `frame` as PGM plus an optional `<name>.meta.json` sidecar."""
    path = Path(path)
    path.write_bytes(write_pgm(frame))
    if sidecar:
        meta = {"scale_mm_per_px": frame.scale, "timestamp_s": frame.timestamp}
        _sidecar_path(path).write_text(json.dumps(meta) + "\n")


def load_frame(path) -> Frame:
    """Reads a PGM file, applying sidecar metadata when present."""
    path = Path(path)
    scale = DEFAULT_SCALE_MM_PER_PX
    timestamp = 0.0
    sidecar = _sidecar_path(path)
    if sidecar.exists():
        try:
            meta = json.loads(sidecar.read_text())
            scale = float(meta.get("scale_mm_per_px", scale))
            timestamp = float(meta.get("timestamp_s", timestamp))
        except (ValueError, TypeError) as exc:
            raise SchemaError(f"bad sidecar {sidecar}: {exc}") from exc
    return read_pgm(path.read_bytes(), scale=scale, timestamp=timestamp)

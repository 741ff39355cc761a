"""Counter-based deterministic random numbers.

The generator is splitmix64 (Steele, Lea & Flood, 2014): a stateless 64-bit
finalizer applied to ``seed + k * GOLDEN`` for sample index k. Because it is
counter based, whole arrays are produced in one vectorized pass and every
index is reproducible bit-for-bit on any platform, which is what the golden
image tests rely on.
"""

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_MASK = 0xFFFFFFFFFFFFFFFF


def mix64(counters: np.ndarray) -> np.ndarray:
    """splitmix64 finalizer applied elementwise to uint64 counters."""
    z = counters.astype(np.uint64, copy=True)
    z ^= z >> np.uint64(30)
    z *= _MIX1
    z ^= z >> np.uint64(27)
    z *= _MIX2
    z ^= z >> np.uint64(31)
    return z


def stream(seed: int, count: int, offset: int = 0) -> np.ndarray:
    """`count` uint64 outputs of the stream for `seed`, starting at `offset`."""
    base = np.uint64(seed & _MASK)
    idx = np.arange(offset + 1, offset + count + 1, dtype=np.uint64)
    return mix64(base + idx * _GOLDEN)


def uniform_ints(seed: int, count: int, lo: int, hi: int) -> np.ndarray:
    """Integers uniform on [lo, hi] via multiply-shift of the top 32 bits.

    The reduction bias is below span / 2**32, invisible to any test here.
    """
    span = np.uint64(hi - lo + 1)
    top = stream(seed, count) >> np.uint64(32)
    return (np.int64(lo) + ((top * span) >> np.uint64(32)).astype(np.int64))


def normals(seed: int, count: int) -> np.ndarray:
    """Standard normal draws, Box-Muller over splitmix64 uniforms."""
    n = (count + 1) // 2
    u1 = (stream(seed, n) >> np.uint64(11)).astype(np.float64) * 2.0**-53
    u2 = (stream(seed, n, offset=n) >> np.uint64(11)).astype(np.float64) * 2.0**-53
    u1 = np.maximum(u1, 2.0**-53)
    r = np.sqrt(-2.0 * np.log(u1))
    out = np.concatenate([r * np.cos(2.0 * np.pi * u2), r * np.sin(2.0 * np.pi * u2)])
    return out[:count]

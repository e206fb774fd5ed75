"""
Downlink compression: top-s sparsification followed by min/max stochastic
quantization, with exact bit accounting.

Debug framing of a CompressedUpdate (little-endian, see pack_update):

    uint32 d | uint32 s | uint32 q | float64 x_min | float64 x_max
    uint32[s] support
    ceil(s/8) bytes   signs, 1 bit each, MSB first (1 = negative)
    ceil(s*w/8) bytes levels, w = ceil(log2(q+1)) bits each, MSB first

The framing is for trace dumps only; the bit budget uses bit_cost().
"""

import math
import struct
from typing import Optional, Tuple

import numpy as np

from app.core.config import settings
from app.core.logging_config import get_logger
from app.models.schemas import CompressedUpdate

logger = get_logger(__name__)

HEADER_BITS = 64
# Levels and q travel as uint32 in the debug framing
Q_MAX = 2 ** 31 - 1
_HEADER = struct.Struct("<IIIdd")


def default_sparsity(d: int) -> int:
    """floor(d/50), at least one entry."""
    return max(1, d // 50)


def sparsify(x: np.ndarray, s: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Keep the s largest-magnitude entries.

    Ties are broken towards the lower index.

    Args:
        x: Model-sized vector
        s: Number of entries to keep, 1 <= s <= d

    Returns:
        (support, values): increasing indices and the original values there
    """
    d = len(x)
    if not 1 <= s <= d:
        raise ValueError(f"s must be in [1, {d}], got {s}")
    # Stable sort on -|x| keeps lower indices first among equal magnitudes
    order = np.argsort(-np.abs(x), kind="stable")
    support = np.sort(order[:s])
    return support, np.asarray(x, dtype=float)[support]


def phi(x, q: int, rng: np.random.Generator):
    """
    Stochastic rounding of x in [0, 1] onto the grid {0, 1/q, ..., 1}.

    Returns l/q with probability 1 - (xq - l) and (l+1)/q with probability
    xq - l, where l = floor(xq) clamped to q-1. Accepts scalars or arrays.
    Returns the integer level(s); divide by q for the grid value.
    """
    if q < 1:
        raise ValueError(f"q must be >= 1, got {q}")
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or np.any(x > 1) or not np.all(np.isfinite(x)):
        raise ValueError("phi input must lie in [0, 1]")
    scaled = x * q
    low = np.minimum(np.floor(scaled), q - 1)
    p_up = scaled - low
    up = rng.random(x.shape) < p_up
    levels = (low + up).astype(np.int64)
    return levels if levels.ndim else int(levels)


def quantize(values: np.ndarray, q: int, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray, float, float]:
    """
    Sign + range-normalized stochastic quantization of the kept values.

    Args:
        values: The s kept entries
        q: Number of quantization intervals
        rng: Generator for this round's quantization stream

    Returns:
        (signs, levels, x_min, x_max); signs is True where the value is negative
    """
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValueError("cannot quantize an empty vector")
    if q < 1:
        raise ValueError(f"q must be >= 1, got {q}")

    magnitudes = np.abs(values)
    x_min = float(magnitudes.min())
    x_max = float(magnitudes.max())
    span = x_max - x_min
    if span > 0:
        normalized = np.clip((magnitudes - x_min) / span, 0.0, 1.0)
    else:
        # Degenerate range: every entry reconstructs to sign * x_min
        normalized = np.zeros_like(magnitudes)
    levels = np.atleast_1d(phi(normalized, q, rng))
    signs = values < 0
    return signs, levels, x_min, x_max


def compress(x: np.ndarray, s: int, q: int, rng: np.random.Generator) -> CompressedUpdate:
    """S(x): sparsify then quantize."""
    support, values = sparsify(x, s)
    signs, levels, x_min, x_max = quantize(values, q, rng)
    return CompressedUpdate(
        support=support, signs=signs, levels=levels,
        x_min=x_min, x_max=x_max, q=q, d=len(x),
    )


def decompress(c: CompressedUpdate) -> np.ndarray:
    """Dense length-d reconstruction; zero off the support."""
    out = np.zeros(c.d, dtype=float)
    magnitude = c.x_min + (c.x_max - c.x_min) * (c.levels / c.q)
    out[c.support] = np.where(c.signs, -magnitude, magnitude)
    return out


def log2_binomial(d: int, s: int) -> float:
    """log2 C(d, s) via log-gamma."""
    if s == 0 or s == d:
        return 0.0
    return (math.lgamma(d + 1) - math.lgamma(s + 1) - math.lgamma(d - s + 1)) / math.log(2)


def bit_cost(d: int, s: int, q: int, ceil: Optional[bool] = None) -> float:
    """
    Bits to send S(x): 64 + s(1 + log2(q+1)) + log2 C(d, s).

    Args:
        ceil: Round up to whole bits; defaults to settings.CEIL_BIT_COST

    Returns:
        Bit count as a real number (or its ceiling)
    """
    if not 1 <= s <= d:
        raise ValueError(f"s must be in [1, {d}], got {s}")
    if q < 1:
        raise ValueError(f"q must be >= 1, got {q}")
    bits = HEADER_BITS + s * (1.0 + math.log2(q + 1)) + log2_binomial(d, s)
    use_ceil = settings.CEIL_BIT_COST if ceil is None else ceil
    return float(math.ceil(bits)) if use_ceil else bits


def max_q_for_budget(d: int, s: int, capacity_bits: float, ceil: Optional[bool] = None) -> Optional[int]:
    """
    Largest q >= 1 with bit_cost(d, s, q) <= capacity_bits.

    Returns:
        q, or None when even q = 1 does not fit
    """
    if not math.isfinite(capacity_bits):
        raise ValueError("capacity_bits must be finite")
    if capacity_bits < 0:
        raise ValueError(f"capacity_bits must be >= 0, got {capacity_bits}")
    if bit_cost(d, s, 1, ceil) > capacity_bits:
        return None
    if bit_cost(d, s, Q_MAX, ceil) <= capacity_bits:
        return Q_MAX

    # bit_cost is increasing in q: bisect on [lo feasible, hi infeasible)
    lo, hi = 1, Q_MAX
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if bit_cost(d, s, mid, ceil) <= capacity_bits:
            lo = mid
        else:
            hi = mid
    return lo


def level_width(q: int) -> int:
    """Bits per level on the debug wire: ceil(log2(q+1))."""
    return max(1, (q).bit_length())


def _pack_uint(values: np.ndarray, width: int) -> bytes:
    shifts = np.arange(width - 1, -1, -1, dtype=np.uint64)
    bits = ((values.astype(np.uint64)[:, None] >> shifts) & 1).astype(np.uint8)
    return np.packbits(bits.ravel()).tobytes()


def _unpack_uint(buf: bytes, count: int, width: int) -> np.ndarray:
    bits = np.unpackbits(np.frombuffer(buf, dtype=np.uint8))[: count * width]
    bits = bits.reshape(count, width).astype(np.uint64)
    weights = np.uint64(1) << np.arange(width - 1, -1, -1, dtype=np.uint64)
    return (bits * weights).sum(axis=1).astype(np.int64)


def pack_update(c: CompressedUpdate) -> bytes:
    """Serialize for trace dumps (layout in the module docstring)."""
    width = level_width(c.q)
    parts = [
        _HEADER.pack(c.d, c.s, c.q, c.x_min, c.x_max),
        c.support.astype("<u4").tobytes(),
        np.packbits(c.signs.astype(np.uint8)).tobytes(),
        _pack_uint(c.levels, width),
    ]
    return b"".join(parts)


def unpack_update(blob: bytes) -> CompressedUpdate:
    """Inverse of pack_update."""
    try:
        d, s, q, x_min, x_max = _HEADER.unpack_from(blob, 0)
        offset = _HEADER.size
        support = np.frombuffer(blob, dtype="<u4", count=s, offset=offset).astype(np.int64)
        offset += 4 * s
        sign_bytes = -(-s // 8)
        signs = np.unpackbits(np.frombuffer(blob, dtype=np.uint8, count=sign_bytes, offset=offset))[:s].astype(bool)
        offset += sign_bytes
        width = level_width(q)
        level_bytes = -(-(s * width) // 8)
        levels = _unpack_uint(blob[offset:offset + level_bytes], s, width)
    except (struct.error, ValueError) as e:
        raise ValueError(f"Failed to unpack compressed update: {str(e)}")
    return CompressedUpdate(support=support, signs=signs, levels=levels, x_min=x_min, x_max=x_max, q=q, d=d)

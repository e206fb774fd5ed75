"""
Wireless channel: fading/noise generation plus the broadcast and MAC channel models.

Complex vectors are numpy complex128 arrays; a "ComplexVec" in the docs means
a 1-D array of that dtype.
"""

import math
from typing import Sequence

import numpy as np

from app.core.exceptions import ChannelError
from app.core.logging_config import get_logger
from app.models.schemas import ChannelParams, ChannelRealization

logger = get_logger(__name__)


def complex_gaussian(variance: float, length: int, rng: np.random.Generator) -> np.ndarray:
    """
    Draw iid CN(0, variance) entries.

    Real and imaginary parts are independent N(0, variance/2).
    """
    if length < 1:
        raise ValueError(f"length must be >= 1, got {length}")
    scale = math.sqrt(variance / 2.0)
    parts = rng.standard_normal((2, length)) * scale
    return parts[0] + 1j * parts[1]


def draw_fading(params: ChannelParams, length: int, rng: np.random.Generator, link: str = "dl") -> np.ndarray:
    """
    Draw one fading vector for a downlink ("dl") or uplink ("ul") link.

    Args:
        params: Channel statistics
        length: Number of subchannel uses
        rng: Generator for this (purpose, round, device) stream
        link: "dl" or "ul"

    Returns:
        complex128 array with CN(0, sigma) entries
    """
    if link == "dl":
        sigma = params.sigma_dl
    elif link == "ul":
        sigma = params.sigma_ul
    else:
        raise ValueError(f"Unsupported link: {link}. Use 'dl' or 'ul'")
    return complex_gaussian(sigma, length, rng)


def draw_noise(length: int, rng: np.random.Generator) -> np.ndarray:
    """Unit-variance complex noise, CN(0, 1)."""
    return complex_gaussian(1.0, length, rng)


def draw_realization(
    params: ChannelParams, length: int, rng: np.random.Generator, link: str = "dl"
) -> ChannelRealization:
    """Gains then noise for one link in one round, from a single stream."""
    gains = draw_fading(params, length, rng, link)
    noise = draw_noise(length, rng)
    return ChannelRealization(gains=gains, noise=noise)


def apply_broadcast(x: np.ndarray, h: np.ndarray, z: np.ndarray) -> np.ndarray:
    """y = h * x + z entry-wise."""
    if not (x.shape == h.shape == z.shape):
        raise ChannelError(f"length mismatch: x{x.shape}, h{h.shape}, z{z.shape}")
    return h * x + z


def apply_mac(xs: Sequence[np.ndarray], hs: Sequence[np.ndarray], z: np.ndarray) -> np.ndarray:
    """y = sum_m h_m * x_m + z, the superposition at the PS."""
    if len(xs) == 0 or len(xs) != len(hs):
        raise ChannelError(f"need matching non-empty device lists, got {len(xs)} inputs and {len(hs)} gains")
    y = np.array(z, dtype=complex, copy=True)
    for m, (x, h) in enumerate(zip(xs, hs)):
        if x.shape != z.shape or h.shape != z.shape:
            raise ChannelError(f"device {m}: length mismatch x{x.shape}, h{h.shape}, z{z.shape}")
        y += h * x
    return y


def num_slots(symbols: int, subchannels: int) -> int:
    """Time slots needed to send `symbols` complex symbols over `subchannels`."""
    if subchannels < 1:
        raise ValueError(f"subchannels must be >= 1, got {subchannels}")
    return -(-symbols // subchannels)


def slot_views(vector: np.ndarray, subchannels: int) -> list:
    """Split a symbol vector into consecutive per-slot chunks (last may be short)."""
    return [vector[i:i + subchannels] for i in range(0, len(vector), subchannels)]
